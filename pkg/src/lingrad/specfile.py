"""Problem-spec files: INI sections [domain], [integrand], [data], [solver].

Example::

    [domain]
    shape = annulus 0.5 1.0
    nx = 128

    [integrand]
    name = tv

    [data]
    u0 = 4/(3*r) - 4/3
    h = 4/(3*r) - 4/3
    lambda = 1

    [solver]
    gap_tol = 1e-5

Data entries are expressions over (x, y, r, theta) or ``file:<path>``
references to LGF1 fields on the same grid; vector problems separate
per-channel expressions with ``;``.  Unknown sections or keys are
rejected by name.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .energy import ProblemSpec
from .errors import SpecFileError
from .expr import evaluate_on_points
from .fields import read_lgf
from .gallery import build_bad_f0
from .geometry import Annulus, Ball, GridDomain, Interval, Rectangle
from .integrands import (
    make_area,
    make_hencky,
    make_tv,
    make_vector_tv,
    make_weighted_tv,
)
from .solver import SolverConfig

__all__ = ["parse_spec", "parse_shape", "make_integrand_from_name", "SpecBundle"]

_ALLOWED = {
    "domain": {"shape", "nx"},
    "integrand": {"name"},
    "data": {"u0", "g", "h", "lambda"},
    "solver": {"tau", "sigma", "theta", "max_iters", "gap_tol",
               "boundary_dualized", "check_every", "box_bound", "threads"},
}


@dataclass
class SpecBundle:
    spec: ProblemSpec
    solver_config: SolverConfig
    shape_text: str
    nx: int


def parse_shape(text: str):
    """Parse the shape grammar: disk R | annulus RIN ROUT | rect | interval A B."""
    parts = text.split()
    if not parts:
        raise SpecFileError("empty shape")
    kind, args = parts[0], parts[1:]
    try:
        if kind == "disk" and len(args) == 1:
            return Ball(float(args[0]), 2)
        if kind == "annulus" and len(args) == 2:
            return Annulus(float(args[0]), float(args[1]))
        if kind == "rect" and not args:
            return Rectangle()
        if kind == "interval" and len(args) == 2:
            return Interval(float(args[0]), float(args[1]))
    except ValueError as exc:
        raise SpecFileError(f"bad shape parameters in {text!r}: {exc}") from exc
    raise SpecFileError(
        f"unknown shape {text!r} (expected: disk R | annulus RIN ROUT | "
        "rect | interval A B)")


def make_integrand_from_name(name: str, shape, n_hint: int = 1):
    """Resolve an integrand selection string."""
    name = name.strip()
    d = shape.dim
    if name == "tv":
        return make_tv(1, d)
    if name == "area":
        return make_area(d)
    if name == "hencky":
        return make_hencky(d)
    if name.startswith("weighted_tv:"):
        expr = name.split(":", 1)[1]

        def weight(pts):
            return evaluate_on_points(expr, pts)

        box = shape.bbox()
        return make_weighted_tv(weight, d, sample_box=box)
    if name.startswith("vector_tv:"):
        n = int(name.split(":", 1)[1])
        return make_vector_tv(n, d)
    if name.startswith("bad_f0:"):
        eps = float(name.split(":", 1)[1])
        return build_bad_f0(eps).integrand()
    raise SpecFileError(f"unknown integrand name {name!r}")


def _sample_data(entry: str, points: np.ndarray, n: int, base_dir: str,
                 domain: GridDomain, on_cells: bool):
    """Evaluate an expression (';'-separated per channel) or load file:...'"""
    entry = entry.strip()
    if entry.startswith("file:"):
        path = os.path.join(base_dir, entry[5:].strip())
        values, h = read_lgf(path)
        if on_cells:
            expect = (n,) + domain.grid_shape + ((1,) if domain.dim == 1 else ())
            flat = values.reshape(values.shape[0], -1)
            want = int(np.prod(domain.grid_shape))
            if values.shape[0] != n or flat.shape[1] != want:
                raise SpecFileError(
                    f"field file {path} has shape {values.shape}, grid wants "
                    f"{expect}")
            return flat.reshape((n,) + domain.grid_shape)
        m = len(domain.boundary_faces)
        flat = values.reshape(values.shape[0], -1)
        if values.shape[0] != n or flat.shape[1] != m:
            raise SpecFileError(
                f"boundary file {path} must hold ({n}, {m}) samples, got "
                f"{values.shape}")
        return flat.reshape(n, m).T
    exprs = [e for e in entry.split(";") if e.strip()]
    if len(exprs) == 1 and n > 1:
        exprs = exprs * n
    if len(exprs) != n:
        raise SpecFileError(
            f"need {n} ';'-separated expressions, got {len(exprs)}")
    cols = [evaluate_on_points(e, points) for e in exprs]
    out = np.stack(cols, axis=0)
    return np.moveaxis(out, 0, -1) if not on_cells else out


def parse_spec(path: str, nx: Optional[int] = None) -> SpecBundle:
    """Materialize a ProblemSpec (and solver overrides) from a spec file."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path) as fh:
            cp.read_file(fh, source=path)
    except OSError as exc:
        raise SpecFileError(f"cannot read {path}: {exc}") from exc
    except configparser.Error as exc:
        raise SpecFileError(f"parse error in {path}: {exc}") from exc

    for section in cp.sections():
        if section not in _ALLOWED:
            raise SpecFileError(f"unknown section [{section}] in {path}")
        for key in cp[section]:
            if key not in _ALLOWED[section]:
                raise SpecFileError(
                    f"unknown key {key!r} in section [{section}] of {path}")

    if "domain" not in cp or "shape" not in cp["domain"]:
        raise SpecFileError(f"{path}: missing [domain] shape")
    shape_text = cp["domain"]["shape"]
    shape = parse_shape(shape_text)
    nx_val = nx if nx is not None else cp["domain"].getint("nx", fallback=64)
    domain = GridDomain(shape, nx_val)

    name = cp["integrand"]["name"] if "integrand" in cp and "name" in cp["integrand"] else "tv"
    integrand = make_integrand_from_name(name, shape)
    n = integrand.n_rows

    base_dir = os.path.dirname(os.path.abspath(path))
    data = cp["data"] if "data" in cp else {}
    bf_points = domain.boundary_faces.point
    cells = domain.cell_centers

    if "u0" in data:
        u0 = _sample_data(data["u0"], bf_points, n, base_dir, domain, on_cells=False)
    else:
        u0 = np.zeros((len(domain.boundary_faces), n))

    def cell_field(key):
        if key not in data:
            return None
        raw = data[key]
        if raw.strip().startswith("file:"):
            return _sample_data(raw, cells, n, base_dir, domain, on_cells=True)
        exprs = [e for e in raw.split(";") if e.strip()]
        if len(exprs) == 1 and n > 1:
            exprs = exprs * n
        vals = np.stack([evaluate_on_points(e, cells) for e in exprs], axis=0)
        return vals

    g = cell_field("g")
    h = cell_field("h")
    lam_arr = None
    if "lambda" in data:
        raw = data["lambda"]
        if raw.strip().startswith("file:"):
            lam_arr = _sample_data(raw, cells, 1, base_dir, domain, on_cells=True)[0]
        else:
            lam_arr = evaluate_on_points(raw, cells)

    spec = ProblemSpec(integrand, domain, u0, g=g, h=h, lam=lam_arr)

    config = SolverConfig()
    if "solver" in cp:
        sec = cp["solver"]
        if "tau" in sec:
            config.tau = sec.getfloat("tau")
        if "sigma" in sec:
            config.sigma = sec.getfloat("sigma")
        if "theta" in sec:
            config.theta = sec.getfloat("theta")
        if "max_iters" in sec:
            config.max_iters = sec.getint("max_iters")
        if "gap_tol" in sec:
            config.gap_tol = sec.getfloat("gap_tol")
        if "boundary_dualized" in sec:
            config.boundary_dualized = sec.getboolean("boundary_dualized")
        if "check_every" in sec:
            config.check_every = sec.getint("check_every")
        if "box_bound" in sec:
            config.box_bound = sec.getfloat("box_bound")
        if "threads" in sec:
            config.threads = sec.getint("threads")
    return SpecBundle(spec, config, shape_text, nx_val)
