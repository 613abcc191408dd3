"""Discrete relaxed energy, exact-adjoint operators, and truncation.

The discrete gradient takes forward differences on interior faces (faces
between two inside cells) and is zero elsewhere; the discrete divergence
additionally collects dual values sitting on boundary faces, so that

    <u, div z> + <grad u, z> = sum over boundary faces of h^(d-1) * u * [z, nu]

holds exactly, with [z, nu] the face-normal component of z (sign times the
stored face value).  This discrete Gauss-Green identity is the backbone of
certificate checking; no continuum pairing measure is needed at grid level.

The relaxed energy combines the cell term sum h^d f(x, grad u) (jumps show
up as large one-cell gradients), the boundary penalty
sum w_b f^inf(x_b, (u0 - u) tensor nu) with the geometric face weights and
the one-sided trace u taken from the adjacent inside cell, and the lower
order terms sum h^d (g u + lambda/2 |u - h|^2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidFieldError, ShapeMismatchError
from .fields import DualField, Field
from .geometry import GridDomain
from .integrands import Integrand

__all__ = [
    "ProblemSpec",
    "discrete_gradient",
    "discrete_divergence",
    "boundary_flux",
    "gauss_green_residual",
    "relaxed_energy",
    "lower_order_energy",
    "boundary_penalty",
    "truncate",
    "total_variation",
]


@dataclass
class ProblemSpec:
    """Integrand + domain + boundary datum + lower-order data (g, h, lambda)."""

    integrand: Integrand
    domain: GridDomain
    u0: np.ndarray                 # (m_faces, n) boundary samples
    g: Optional[np.ndarray] = None     # (n, *grid)
    h: Optional[np.ndarray] = None     # (n, *grid)
    lam: Optional[np.ndarray] = None   # (*grid), nonnegative

    def __post_init__(self):
        n = self.integrand.n_rows
        grid = self.domain.grid_shape
        m = len(self.domain.boundary_faces)
        if self.integrand.n_cols != self.domain.dim:
            raise ShapeMismatchError(
                "integrand column dimension must match the spatial dimension"
            )
        u0 = np.asarray(self.u0, dtype=float)
        if u0.shape == (m,) and n == 1:
            u0 = u0[:, None]
        if u0.shape != (m, n):
            raise ShapeMismatchError(f"u0 must have shape ({m}, {n})")
        self.u0 = u0
        for name in ("g", "h"):
            arr = getattr(self, name)
            if arr is None:
                arr = np.zeros((n,) + grid)
            else:
                arr = np.asarray(arr, dtype=float)
                if arr.shape == grid and n == 1:
                    arr = arr[None]
                if arr.shape != (n,) + grid:
                    raise ShapeMismatchError(f"{name} must have shape (n, *grid)")
            setattr(self, name, arr)
        if self.lam is None:
            self.lam = np.zeros(grid)
        else:
            self.lam = np.asarray(self.lam, dtype=float)
            if self.lam.shape != grid:
                raise ShapeMismatchError("lambda must have shape (*grid)")
        if np.any(self.lam < 0):
            raise InvalidFieldError("lambda must be nonnegative")

    @property
    def n_channels(self) -> int:
        return self.integrand.n_rows

    def zero_field(self) -> Field:
        return Field.zeros(self.domain, self.n_channels)


# ---------------------------------------------------------------------------
# Staggered operators
# ---------------------------------------------------------------------------


def _face_masks(domain: GridDomain):
    # cached on the domain: interior faces and the slot mask of boundary faces
    masks = getattr(domain, "_face_mask_cache", None)
    if masks is not None:
        return masks
    interior = domain._interior_face_mask()
    slots = np.zeros_like(interior)
    bf = domain.boundary_faces
    slot_cells = bf.cell.copy()
    neg = bf.sign < 0
    slot_cells[np.arange(len(bf)), bf.axis] -= neg.astype(int)
    slots[(bf.axis,) + tuple(slot_cells.T)] = True
    domain._boundary_slot_cells = slot_cells
    masks = (interior, slots, interior | slots)
    domain._face_mask_cache = masks
    return masks


def boundary_slots(domain: GridDomain) -> np.ndarray:
    """(m, dim) base-cell index of each boundary face's storage slot."""
    _face_masks(domain)
    return domain._boundary_slot_cells


def discrete_gradient(domain: GridDomain, u: np.ndarray) -> np.ndarray:
    """Forward differences of (n, *grid) cell values on interior faces."""
    u = np.asarray(u, dtype=float)
    interior, _, _ = _face_masks(domain)
    n = u.shape[0]
    out = np.zeros((n, domain.dim) + domain.grid_shape)
    inv_h = 1.0 / domain.h
    for a in range(domain.dim):
        sl_lo = [slice(None)] * domain.dim
        sl_hi = [slice(None)] * domain.dim
        sl_lo[a] = slice(0, -1)
        sl_hi[a] = slice(1, None)
        diff = np.zeros_like(u)
        diff[(slice(None),) + tuple(sl_lo)] = (
            u[(slice(None),) + tuple(sl_hi)] - u[(slice(None),) + tuple(sl_lo)]
        ) * inv_h
        out[:, a] = np.where(interior[a][None], diff, 0.0)
    return out


def discrete_divergence(domain: GridDomain, z: np.ndarray) -> np.ndarray:
    """Negative adjoint of the gradient, collecting boundary-face flux."""
    z = np.asarray(z, dtype=float)
    _, _, active = _face_masks(domain)
    n = z.shape[0]
    out = np.zeros((n,) + domain.grid_shape)
    inv_h = 1.0 / domain.h
    for a in range(domain.dim):
        za = np.where(active[a][None], z[:, a], 0.0)
        shifted = np.zeros_like(za)
        sl_hi = [slice(None)] * domain.dim
        sl_lo = [slice(None)] * domain.dim
        sl_hi[a] = slice(1, None)
        sl_lo[a] = slice(0, -1)
        shifted[(slice(None),) + tuple(sl_hi)] = za[(slice(None),) + tuple(sl_lo)]
        out += (za - shifted) * inv_h
    return np.where(domain.inside_mask[None], out, 0.0)


def normal_trace(domain: GridDomain, z: np.ndarray) -> np.ndarray:
    """[z, nu] at boundary faces: sign times the stored face value, (n, m)."""
    bf = domain.boundary_faces
    slots = boundary_slots(domain)
    vals = z[(slice(None), bf.axis.astype(int)) + tuple(slots.T)]
    return vals * bf.sign[None]


def boundary_flux(domain: GridDomain, u: np.ndarray, z: np.ndarray) -> float:
    """Exact discrete flux: sum over boundary faces of h^(d-1) u_adj . [z, nu]."""
    bf = domain.boundary_faces
    u_adj = u[(slice(None),) + tuple(bf.cell.T)]  # (n, m)
    tr = normal_trace(domain, z)
    return float(bf.face_measure * np.sum(u_adj * tr))


def gauss_green_residual(domain: GridDomain, u, z) -> float:
    """|<u, div z> + <grad u, z> - boundary flux|; zero up to roundoff."""
    u = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    z = z.values if isinstance(z, DualField) else np.asarray(z, dtype=float)
    vol = domain.cell_volume
    div = discrete_divergence(domain, z)
    grad = discrete_gradient(domain, u)
    lhs = vol * float(np.sum(u * div)) + vol * float(np.sum(grad * z))
    return abs(lhs - boundary_flux(domain, u, z))


# ---------------------------------------------------------------------------
# Energies
# ---------------------------------------------------------------------------


def _inside_points_and_grads(spec: ProblemSpec, u: np.ndarray):
    domain = spec.domain
    grad = discrete_gradient(domain, u)
    mask = domain.inside_mask
    pts = domain.cell_centers[mask]
    gm = np.moveaxis(grad, (0, 1), (-2, -1))[mask]  # (m_in, n, d)
    return pts, gm, grad


def boundary_penalty(spec: ProblemSpec, u: np.ndarray) -> float:
    """sum w_b f^inf(x_b, (u0 - u_adj) tensor nu) with one-sided traces."""
    bf = spec.domain.boundary_faces
    u_adj = u[(slice(None),) + tuple(bf.cell.T)].T  # (m, n)
    jump = spec.u0 - u_adj
    mat = jump[:, :, None] * bf.normal[:, None, :]  # (m, n, d)
    vals = spec.integrand.recession(bf.point, mat)
    return float(np.sum(bf.weight * vals))


def lower_order_energy(spec: ProblemSpec, u) -> float:
    """sum h^d (g . u + lambda/2 |u - h|^2) over inside cells."""
    u = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    dev = u - spec.h
    dens = np.sum(spec.g * u, axis=0) + 0.5 * spec.lam * np.sum(dev * dev, axis=0)
    return spec.domain.cell_volume * float(np.sum(dens[spec.domain.inside_mask]))


def relaxed_energy(spec: ProblemSpec, u) -> float:
    """Cell term + boundary penalty + lower-order terms of the relaxed functional."""
    u = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise InvalidFieldError("u has non-finite entries")
    pts, gm, _ = _inside_points_and_grads(spec, u)
    cell_term = spec.domain.cell_volume * float(
        np.sum(spec.integrand.value(pts, gm))
    )
    return cell_term + boundary_penalty(spec, u) + lower_order_energy(spec, u)


def total_variation(domain: GridDomain, u: np.ndarray) -> float:
    """Discrete TV: sum h^d |grad u| over cells (Frobenius per cell)."""
    grad = discrete_gradient(domain, u)
    mag = np.sqrt(np.sum(grad * grad, axis=(0, 1)))
    return domain.cell_volume * float(np.sum(mag))


def truncate(u: Field, b: float) -> Field:
    """Pointwise clamp of a scalar field to [-b, b]."""
    if b < 0:
        raise ValueError("truncation level must be nonnegative")
    if u.n_channels != 1:
        raise ShapeMismatchError("truncation is defined for scalar fields")
    return Field(u.domain, np.clip(u.values, -b, b))
