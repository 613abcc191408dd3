"""Domains: analytic shapes, masked grids, boundary faces, curvature.

Orientation conventions, fixed once and used everywhere:

* ``signed_distance`` is negative inside the domain and zero on the
  boundary.  The interior distance-to-boundary function is its negative.
* Boundary normals always point out of the domain.  On the inner loop of
  an annulus this means toward the hole.
* Each boundary face of a grid separates an inside cell from an outside
  one.  ``sign = +1`` means the outside cell sits on the positive side of
  the face's axis, so the staircase outward direction is ``+e_axis``.
* A face carries two measures: the raw face area h^(d-1), which is what
  the exact discrete Gauss-Green identity uses, and a geometric weight
  h^(d-1) * |nu . e_axis| which converges to the boundary surface measure
  and is used for energies and trace errors.

The generalized boundary curvature of an integrand f at a boundary point x
is  min( -div D_xi f^inf(., grad dist), +div D_xi f^inf(., -grad dist) )
with the divergence taken by central differences; for f = |.| on the unit
circle it evaluates to d - 1 = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DomainError, ResolutionError, ShapeMismatchError
from .integrands import Integrand

__all__ = [
    "Ball",
    "Disk",
    "Annulus",
    "Rectangle",
    "Interval",
    "GridDomain",
    "BoundaryFaces",
    "build_domain",
    "boundary_normal",
    "generalized_mean_curvature",
    "curvature_condition_margin",
]


class Ball:
    """Ball of given radius centered at the origin (disk when dim == 2)."""

    def __init__(self, radius: float, dim: int = 2):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self.dim = int(dim)
        self.diameter = 2 * self.radius

    def signed_distance(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.linalg.norm(pts, axis=-1) - self.radius

    def sd_gradient(self, pts):
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=-1, keepdims=True)
        return pts / np.maximum(r, 1e-300)

    def project(self, pts):
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=-1, keepdims=True)
        return pts * (self.radius / np.maximum(r, 1e-300))

    def bbox(self):
        return [(-self.radius, self.radius)] * self.dim


def Disk(radius: float, dim: int = 2) -> Ball:
    """Alias of Ball for the planar case."""
    return Ball(radius, dim)


class Annulus:
    """Region between two concentric spheres, r_in < |x| < r_out."""

    def __init__(self, r_in: float, r_out: float, dim: int = 2):
        if not (0 < r_in < r_out):
            raise ValueError("need 0 < r_in < r_out")
        self.r_in = float(r_in)
        self.r_out = float(r_out)
        self.dim = int(dim)
        self.diameter = 2 * self.r_out

    def signed_distance(self, pts):
        r = np.linalg.norm(np.asarray(pts, dtype=float), axis=-1)
        return np.maximum(self.r_in - r, r - self.r_out)

    def sd_gradient(self, pts):
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=-1, keepdims=True)
        inner_side = (self.r_in - r) > (r - self.r_out)
        unit = pts / np.maximum(r, 1e-300)
        return np.where(inner_side, -unit, unit)

    def project(self, pts):
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=-1, keepdims=True)
        inner_side = (self.r_in - r) > (r - self.r_out)
        target = np.where(inner_side, self.r_in, self.r_out)
        return pts * (target / np.maximum(r, 1e-300))

    def bbox(self):
        return [(-self.r_out, self.r_out)] * self.dim


class Rectangle:
    """Axis-aligned box; the default grid shape covering it exactly."""

    def __init__(self, bounds: Sequence = ((0.0, 1.0), (0.0, 1.0))):
        self.bounds = [(float(lo), float(hi)) for lo, hi in bounds]
        if any(hi <= lo for lo, hi in self.bounds):
            raise ValueError("degenerate rectangle")
        self.dim = len(self.bounds)
        self.diameter = float(
            np.sqrt(sum((hi - lo) ** 2 for lo, hi in self.bounds))
        )

    def signed_distance(self, pts):
        pts = np.asarray(pts, dtype=float)
        per_axis = []
        for a, (lo, hi) in enumerate(self.bounds):
            per_axis.append(np.maximum(lo - pts[..., a], pts[..., a] - hi))
        return np.max(np.stack(per_axis, axis=-1), axis=-1)

    def sd_gradient(self, pts):
        pts = np.asarray(pts, dtype=float)
        per_axis = np.stack(
            [np.maximum(lo - pts[..., a], pts[..., a] - hi)
             for a, (lo, hi) in enumerate(self.bounds)],
            axis=-1,
        )
        which = np.argmax(per_axis, axis=-1)
        grad = np.zeros_like(pts)
        for a, (lo, hi) in enumerate(self.bounds):
            sel = which == a
            sgn = np.where(pts[..., a] - hi > lo - pts[..., a], 1.0, -1.0)
            grad[..., a] = np.where(sel, sgn, 0.0)
        return grad

    def project(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = pts.copy()
        per_axis = np.stack(
            [np.maximum(lo - pts[..., a], pts[..., a] - hi)
             for a, (lo, hi) in enumerate(self.bounds)],
            axis=-1,
        )
        which = np.argmax(per_axis, axis=-1)
        for a, (lo, hi) in enumerate(self.bounds):
            sel = which == a
            nearest = np.where(pts[..., a] - hi > lo - pts[..., a], hi, lo)
            out[..., a] = np.where(sel, nearest, out[..., a])
        return out

    def bbox(self):
        return list(self.bounds)


class Interval(Rectangle):
    """One-dimensional domain (a, b)."""

    def __init__(self, a: float = 0.0, b: float = 1.0):
        super().__init__([(a, b)])


Shape = Union[Ball, Annulus, Rectangle, Interval]


@dataclass
class BoundaryFaces:
    """Flat arrays describing every inside/outside face transition."""

    cell: np.ndarray       # (m, dim) int indices of the adjacent inside cell
    axis: np.ndarray       # (m,) face axis
    sign: np.ndarray       # (m,) +1 if outward staircase direction is +e_axis
    point: np.ndarray      # (m, dim) closest point on the true boundary
    normal: np.ndarray     # (m, dim) outward unit normal at `point`
    weight: np.ndarray     # (m,) geometric surface weight
    face_measure: float    # raw h^(d-1) shared by all faces

    def __len__(self):
        return self.cell.shape[0]


class GridDomain:
    """Masked uniform grid over an analytic shape.

    Cells are squares of side ``h``; a cell belongs to the domain when its
    center is strictly inside.  Fields live on inside cells; dual fields
    live on the + faces of each cell (index [axis, cell]).
    """

    def __init__(self, shape: Shape, nx: int, pad_cells: int = 2):
        if nx < 16:
            raise ResolutionError("resolution must be at least 16")
        self.shape = shape
        self.dim = shape.dim
        if self.dim not in (1, 2):
            raise ResolutionError("grids support dim 1 and 2 only")

        # h = (shape extent)/nx exactly; a ghost ring of pad_cells keeps
        # every boundary face's storage slot inside the array
        box = shape.bbox()
        self.h = float((box[0][1] - box[0][0]) / nx)
        lo = np.array([b[0] - pad_cells * self.h for b in box])
        n_cells = []
        for a in range(self.dim):
            span = box[a][1] - box[a][0]
            n = int(round(span / self.h))
            if abs(n * self.h - span) > 1e-9 * self.h:
                raise ResolutionError("box does not tile with square cells")
            n_cells.append(n + 2 * pad_cells)
        self.n_cells = tuple(n_cells)
        self.origin = lo

        axes = [
            lo[a] + self.h * (np.arange(self.n_cells[a]) + 0.5)
            for a in range(self.dim)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        self.cell_centers = np.stack(mesh, axis=-1)  # (*n_cells, dim)
        self.inside_mask = shape.signed_distance(self.cell_centers) < 0.0
        if not np.any(self.inside_mask):
            raise ResolutionError("no cell center falls inside the shape")

        self.boundary_faces = self._collect_boundary_faces()
        if len(self.boundary_faces) == 0:
            raise ResolutionError("shape produced no boundary faces")

    # faces are indexed (axis, *cell): face a of cell c sits between c and
    # c + e_a.  A face is interior when both cells are inside the mask.
    def _interior_face_mask(self):
        masks = []
        for a in range(self.dim):
            inside = self.inside_mask
            nxt = np.zeros_like(inside)
            sl_to = [slice(None)] * self.dim
            sl_from = [slice(None)] * self.dim
            sl_to[a] = slice(0, -1)
            sl_from[a] = slice(1, None)
            nxt[tuple(sl_to)] = inside[tuple(sl_from)]
            masks.append(inside & nxt)
        return np.stack(masks, axis=0)

    def _collect_boundary_faces(self):
        cells, axes_l, signs = [], [], []
        inside = self.inside_mask
        for a in range(self.dim):
            pad_shape = list(inside.shape)
            pad_shape[a] += 2
            padded = np.zeros(pad_shape, dtype=bool)
            sl = [slice(None)] * self.dim
            sl[a] = slice(1, -1)
            padded[tuple(sl)] = inside
            for sgn in (+1, -1):
                sl_nb = [slice(None)] * self.dim
                sl_nb[a] = slice(2, None) if sgn > 0 else slice(0, -2)
                neighbor_in = padded[tuple(sl_nb)]
                hit = inside & ~neighbor_in
                idx = np.argwhere(hit)
                if idx.size:
                    cells.append(idx)
                    axes_l.append(np.full(len(idx), a))
                    signs.append(np.full(len(idx), sgn))
        if not cells:
            return BoundaryFaces(
                np.zeros((0, self.dim), int), np.zeros(0, int),
                np.zeros(0, int), np.zeros((0, self.dim)),
                np.zeros((0, self.dim)), np.zeros(0), self.h ** (self.dim - 1))
        cell = np.concatenate(cells)
        axis = np.concatenate(axes_l)
        sign = np.concatenate(signs)

        centers = self.cell_centers[tuple(cell.T)]
        face_pts = centers.copy()
        face_pts[np.arange(len(axis)), axis] += 0.5 * self.h * sign
        bpoint = np.atleast_2d(self.shape.project(face_pts))
        normal = np.atleast_2d(self.shape.sd_gradient(bpoint))
        normal = normal / np.linalg.norm(normal, axis=-1, keepdims=True)
        nu_comp = np.abs(normal[np.arange(len(axis)), axis])
        measure = self.h ** (self.dim - 1)
        weight = measure * nu_comp
        return BoundaryFaces(cell, axis, sign, bpoint, normal, weight, measure)

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def bounds(self):
        """Axis-aligned bounding box of the grid, ((lo, hi) per axis)."""
        return tuple(
            (float(self.origin[a]), float(self.origin[a] + self.n_cells[a] * self.h))
            for a in range(self.dim)
        )

    def signed_distance(self, pts):
        return self.shape.signed_distance(pts)

    @property
    def grid_shape(self):
        return self.n_cells

    def __repr__(self):
        return (
            f"GridDomain({type(self.shape).__name__}, n_cells={self.n_cells}, "
            f"h={self.h:.4g}, faces={len(self.boundary_faces)})"
        )


def build_domain(shape, resolution: int) -> GridDomain:
    """Discretize a shape (object or grammar string) at the given resolution.

    Strings follow the problem-spec grammar: ``disk R``,
    ``annulus RIN ROUT``, ``rect``, ``interval A B``.
    """
    if isinstance(shape, str):
        from .specfile import parse_shape

        shape = parse_shape(shape)
    return GridDomain(shape, resolution)


def boundary_normal(domain_or_shape, point):
    """Outward unit normal at (or near) a boundary point.

    The point must lie within one grid spacing (or 1e-3 of the diameter for
    bare shapes) of the boundary; it is projected before evaluating.
    """
    shape = domain_or_shape.shape if isinstance(domain_or_shape, GridDomain) else domain_or_shape
    tol = domain_or_shape.h if isinstance(domain_or_shape, GridDomain) else 1e-3 * shape.diameter
    point = np.asarray(point, dtype=float)
    if np.any(np.abs(shape.signed_distance(point)) > tol):
        raise DomainError("point is too far from the boundary")
    proj = shape.project(point)
    g = shape.sd_gradient(proj)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def generalized_mean_curvature(f: Integrand, domain_or_shape, x,
                               h_fd: Optional[float] = None):
    """Generalized mean curvature of the boundary with respect to f.

    Evaluates min(-div D_xi f^inf(., G), +div D_xi f^inf(., -G)) at boundary
    points x, where G is the gradient of the interior distance function and
    the divergence is taken by central differences of step ``h_fd``
    (default max(grid h, 1e-4 * diameter)).  Normalized so that f = |.| on
    the unit sphere gives d - 1. Scalar integrands only.
    """
    if f.n_rows != 1:
        raise ShapeMismatchError("curvature is defined for scalar integrands")
    if isinstance(domain_or_shape, GridDomain):
        shape = domain_or_shape.shape
        h_grid = domain_or_shape.h
    else:
        shape = domain_or_shape
        h_grid = 0.0
    if h_fd is None:
        h_fd = max(h_grid, 1e-4 * shape.diameter)

    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[-1] != shape.dim:
        raise ShapeMismatchError("point dimension does not match the shape")
    if np.any(np.abs(shape.signed_distance(x)) > max(h_grid, 1e-6 * shape.diameter)):
        raise DomainError("curvature point is not on the boundary")
    x = np.atleast_2d(shape.project(x))

    def field(pts, orientation):
        # D_xi f^inf at the (oriented) interior-distance gradient; the
        # interior distance gradient is minus the signed-distance gradient
        g = -orientation * shape.sd_gradient(pts)
        xi = g[..., None, :]  # (m, 1, dim): scalar integrand, n = 1
        return f.recession_gradient(pts, xi)[..., 0, :]

    def divergence(orientation):
        div = np.zeros(x.shape[0])
        for a in range(shape.dim):
            xp = x.copy()
            xm = x.copy()
            xp[:, a] += h_fd
            xm[:, a] -= h_fd
            div += (field(xp, orientation)[:, a] - field(xm, orientation)[:, a]) / (2 * h_fd)
        return div

    h_val = np.minimum(-divergence(+1.0), divergence(-1.0))
    return h_val if h_val.size > 1 else float(h_val[0])


def curvature_condition_margin(f: Integrand, g_values, domain: GridDomain,
                               c: float):
    """Margin of the discrete curvature condition at every boundary face.

    Returns H(x_b) - sup{|g| over inside cells within 3h of x_b} - c; all
    entries positive means the discrete smallness condition on g holds.
    """
    faces = domain.boundary_faces
    H = generalized_mean_curvature(f, domain, faces.point)
    H = np.atleast_1d(H)
    g_arr = np.asarray(g_values, dtype=float)
    if g_arr.shape != domain.grid_shape:
        raise ShapeMismatchError("g must live on the domain grid")
    centers = domain.cell_centers[domain.inside_mask]
    g_inside = np.abs(g_arr[domain.inside_mask])
    margins = np.empty(len(faces))
    for i in range(len(faces)):
        d2 = np.sum((centers - faces.point[i]) ** 2, axis=-1)
        near = d2 <= (3.0 * domain.h) ** 2
        local = float(g_inside[near].max()) if np.any(near) else 0.0
        margins[i] = H[i] - local - c
    return margins
