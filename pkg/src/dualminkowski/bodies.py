"""Convex bodies as halfspace intersections with a fixed normal set.

A body K = {x : <x, v_i> <= h_i} is stored by its unit normals and positive
support numbers. The normal set never shrinks during optimization (redundant
halfspaces are tolerated and self-correct downstream); pruning happens only at
export. Star bodies carry a positive radial function directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection

from .groups import OrthogonalGroup
from .sphere import SphericalGrid, build_grid

__all__ = [
    "SupportPolytope",
    "StarBody",
    "radial_eval",
    "radial_profile",
    "support_eval",
    "support_profile",
    "polar_radial",
    "wulff_shape",
    "geometry_stats",
    "is_invariant",
    "vertex_enumeration",
    "polar_body",
    "prune",
    "translate",
    "centered",
    "ball_polytope",
    "cube_polytope",
    "shifted_ball_polytope",
    "facet_polygons",
]

_POS_DENOM_TOL = 1e-14


@lru_cache(maxsize=8)
def _probe(n: int) -> SphericalGrid:
    counts = {2: 720, 3: 1280}
    return build_grid(n, counts.get(n, 3000), seed=101)


@dataclass(frozen=True)
class SupportPolytope:
    """K = {x : <x, v_i> <= h_i} with 0 in the interior.

    Invariants enforced at construction: unit normals, h_i >= h_floor > 0,
    at least n+1 halfspaces, and the normals positively span R^n (checked as
    max_i <u, v_i> > 0 on a probe grid), which makes K bounded with 0 interior.
    """

    dim: int
    normals: np.ndarray
    support: np.ndarray
    h_floor: float = 0.0

    def __post_init__(self):
        normals = np.ascontiguousarray(np.asarray(self.normals, dtype=float))
        support = np.ascontiguousarray(np.asarray(self.support, dtype=float))
        if normals.ndim != 2 or normals.shape[1] != self.dim:
            raise ValueError(f"normals must have shape (N, {self.dim})")
        if support.shape != (normals.shape[0],):
            raise ValueError("support numbers must match normal count")
        if normals.shape[0] < self.dim + 1:
            raise ValueError("need at least n+1 halfspaces")
        norms = np.linalg.norm(normals, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-10:
            raise ValueError("normals must be unit vectors within 1e-10")
        floor = self.h_floor
        if floor <= 0.0:
            floor = 1e-6 * float(np.exp(np.mean(np.log(support))))
            object.__setattr__(self, "h_floor", floor)
        if np.any(support < floor):
            i = int(np.argmin(support))
            raise ValueError(
                f"support number {i} = {support[i]:.3e} below floor {floor:.3e}"
            )
        probe = _probe(self.dim)
        cover = np.max(probe.nodes @ normals.T, axis=1)
        if np.min(cover) <= 0.0:
            u = probe.nodes[int(np.argmin(cover))]
            raise ValueError(
                f"normals do not positively span R^{self.dim}: direction {u} uncovered"
            )
        normals.setflags(write=False)
        support.setflags(write=False)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "support", support)

    @property
    def facet_count(self) -> int:
        return self.normals.shape[0]

    def with_support(self, new_h: np.ndarray) -> "SupportPolytope":
        return replace(self, support=np.asarray(new_h, dtype=float))


def radial_profile(body: SupportPolytope, points: np.ndarray,
                   _block_cells: int = 4_000_000):
    """Radial function and supporting-facet index at each unit direction.

    rho(u) = min over {i : <u, v_i> > 0} of h_i / <u, v_i>; the argmin (ties
    to the smallest index) identifies the facet whose supporting hyperplane
    contains the boundary point rho(u) u. Evaluation is blocked so the
    intermediate ratio matrix stays within a fixed memory budget.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m = pts.shape[0]
    rho = np.empty(m)
    idx = np.empty(m, dtype=np.intp)
    step = max(1, _block_cells // body.facet_count)
    for start in range(0, m, step):
        block = pts[start:start + step]
        denom = block @ body.normals.T
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(denom > _POS_DENOM_TOL,
                              body.support[None, :] / denom, np.inf)
        bi = np.argmin(ratios, axis=1)
        idx[start:start + step] = bi
        rho[start:start + step] = ratios[np.arange(block.shape[0]), bi]
    if not np.all(np.isfinite(rho)):
        bad = int(np.argmax(~np.isfinite(rho)))
        raise ValueError(
            f"no positive denominator at direction {pts[bad]}; "
            "normals do not positively span"
        )
    return rho, idx


def radial_eval(body: SupportPolytope, u: np.ndarray) -> tuple[float, int]:
    """Radial value and facet index for one direction."""
    rho, idx = radial_profile(body, np.asarray(u, dtype=float)[None])
    return float(rho[0]), int(idx[0])


def support_eval(body: SupportPolytope, u: np.ndarray) -> float:
    """Support function h_K(u) = max <x, u> over K, by linear programming."""
    u = np.asarray(u, dtype=float)
    res = linprog(-u, A_ub=body.normals, b_ub=body.support,
                  bounds=[(None, None)] * body.dim, method="highs")
    if not res.success:
        raise ValueError(f"support LP failed: {res.message}")
    return float(-res.fun)


def support_profile(body: SupportPolytope, points: np.ndarray,
                    vertices: np.ndarray | None = None) -> np.ndarray:
    """Bulk support values via the vertex representation (h = max <x_j, u>)."""
    if vertices is None:
        vertices = vertex_enumeration(body)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.max(pts @ vertices.T, axis=1)


def polar_radial(body: SupportPolytope, u: np.ndarray) -> float:
    """Radial function of the polar body: rho_{K*}(u) = 1 / h_K(u)."""
    return 1.0 / support_eval(body, u)


def wulff_shape(base: SupportPolytope, phi: np.ndarray, t: float) -> SupportPolytope:
    """Perturbed body with support numbers h_i + t * phi_i on the same normals.

    No pruning: redundant constraints are kept so the parametrization stays
    smooth in h. Raises when any perturbed support number drops below the
    positivity floor of the base body.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape != base.support.shape:
        raise ValueError("perturbation must have one value per normal")
    new_h = base.support + t * phi
    low = np.nonzero(new_h < base.h_floor)[0]
    if low.size:
        raise ValueError(
            f"support number {int(low[0])} would cross the floor "
            f"{base.h_floor:.3e} (value {new_h[int(low[0])]:.3e})"
        )
    return base.with_support(new_h)


def vertex_enumeration(body: SupportPolytope) -> np.ndarray:
    """All vertices of the halfspace intersection (origin used as the
    interior point, which the positivity floor guarantees feasible)."""
    halfspaces = np.column_stack([body.normals, -body.support])
    hs = HalfspaceIntersection(halfspaces, np.zeros(body.dim))
    verts = hs.intersections
    # Qhull emits one point per dual facet; merge duplicates
    scale = float(np.max(np.abs(verts))) or 1.0
    kept: list[np.ndarray] = []
    for v in verts:
        if not kept or np.min(np.linalg.norm(np.array(kept) - v, axis=1)) > 1e-9 * scale:
            kept.append(v)
    return np.array(kept)


def polar_body(body: SupportPolytope) -> SupportPolytope:
    """The polar K* = {x : <x, y> <= 1 for all y in K} as a halfspace body.

    Vertices x_j of K become the constraints <x, x_j> <= 1, i.e. normals
    x_j/|x_j| with support numbers 1/|x_j|.
    """
    verts = vertex_enumeration(body)
    norms = np.linalg.norm(verts, axis=1)
    if np.any(norms < 1e-12):
        raise ValueError("vertex at the origin; polar undefined")
    return SupportPolytope(dim=body.dim, normals=verts / norms[:, None],
                           support=1.0 / norms)


def prune(body: SupportPolytope, tol: float = 1e-9) -> SupportPolytope:
    """Drop halfspaces whose constraint is redundant (h_K(v_i) < h_i)."""
    verts = vertex_enumeration(body)
    achieved = np.max(body.normals @ verts.T, axis=1)
    scale = float(np.max(body.support))
    active = achieved >= body.support - tol * scale
    if not np.any(active):
        raise ValueError("pruning removed every facet")
    return SupportPolytope(dim=body.dim, normals=body.normals[active],
                           support=body.support[active])


def translate(body: SupportPolytope, z: np.ndarray) -> SupportPolytope:
    """The translate K - z on the same normal set (h_i -> h_i - <v_i, z>)."""
    z = np.asarray(z, dtype=float)
    new_h = body.support - body.normals @ z
    if np.any(new_h <= 0.0):
        raise ValueError("translation moves the origin outside the body")
    return SupportPolytope(dim=body.dim, normals=body.normals, support=new_h)


def geometry_stats(body: SupportPolytope, grid: SphericalGrid) -> dict:
    """Centroid, diameter, inradius, circumradius estimators on a grid.

    The centroid comes from the cone decomposition over grid nodes (each node
    contributes a cone of volume w rho^n / n with centroid at n/(n+1) rho u);
    the diameter is the largest origin-chord rho(u) + rho(-u) over nodes.
    Inradius uses the support values at the body's own normals. These are
    probe-grid estimators and feed diagnostics only.
    """
    rho, _ = radial_profile(body, grid.nodes)
    rho_neg, _ = radial_profile(body, -grid.nodes)
    n = body.dim
    cone_vol = grid.weights * rho ** n / n
    total = float(np.sum(cone_vol))
    centroid = (cone_vol * rho)[:, None] * grid.nodes * (n / (n + 1.0))
    centroid = centroid.sum(axis=0) / total
    try:
        verts = vertex_enumeration(body)
        inradius = float(np.min(np.max(body.normals @ verts.T, axis=1)))
    except Exception:
        inradius = min(support_eval(body, v) for v in body.normals)
    return {
        "centroid": centroid,
        "diameter": float(np.max(rho + rho_neg)),
        "inradius": inradius,
        "circumradius": float(np.max(rho)),
        "volume": total,
    }


def is_invariant(body: SupportPolytope, group: OrthogonalGroup,
                 grid: SphericalGrid | None = None,
                 tol: float = 1e-9) -> tuple[bool, float]:
    """Whether rho_K(g u) == rho_K(u) on the grid for every group element.

    Returns (within tolerance, max deviation).
    """
    if grid is None:
        grid = _probe(body.dim)
    rho, _ = radial_profile(body, grid.nodes)
    stacked = np.einsum("kij,nj->kni", group.elements,
                        grid.nodes).reshape(-1, body.dim)
    rho_all, _ = radial_profile(body, stacked)
    deviations = np.abs(rho_all.reshape(group.order, -1) - rho[None, :])
    worst = float(np.max(deviations))
    return worst <= tol, worst


def centered(body: SupportPolytope, grid: SphericalGrid | None = None,
             iterations: int = 4) -> SupportPolytope:
    """Translate the body until the centroid estimate sits at the origin."""
    if grid is None:
        grid = _probe(body.dim)
    out = body
    for _ in range(iterations):
        stats = geometry_stats(out, grid)
        shift = stats["centroid"]
        if np.linalg.norm(shift) <= 1e-12 * stats["circumradius"]:
            break
        out = translate(out, shift)
    return out


def ball_polytope(directions: np.ndarray, radius: float = 1.0) -> SupportPolytope:
    """Ball-like body: h_i = radius on the given unit normal set."""
    dirs = np.asarray(directions, dtype=float)
    return SupportPolytope(dim=dirs.shape[1], normals=dirs,
                           support=np.full(dirs.shape[0], float(radius)))


def cube_polytope(n: int, half_width: float = 1.0) -> SupportPolytope:
    """The cube [-a, a]^n with its 2n axis normals."""
    normals = np.vstack([np.eye(n), -np.eye(n)])
    return SupportPolytope(dim=n, normals=normals,
                           support=np.full(2 * n, float(half_width)))


def shifted_ball_polytope(directions: np.ndarray, radius: float,
                          center: np.ndarray) -> SupportPolytope:
    """Halfspace approximation of a ball of given radius centered off-origin.

    Support numbers h(v) = radius + <center, v>; requires |center| < radius so
    the origin stays interior. The radial minimum is attained opposite the
    center, which makes this the canonical unique-minimal-radius base body.
    """
    dirs = np.asarray(directions, dtype=float)
    center = np.asarray(center, dtype=float)
    if np.linalg.norm(center) >= radius:
        raise ValueError("center must satisfy |center| < radius")
    h = radius + dirs @ center
    return SupportPolytope(dim=dirs.shape[1], normals=dirs, support=h)


def facet_polygons(body: SupportPolytope, tol: float = 1e-7):
    """For n = 3: ordered vertex loops of each nonempty facet.

    Returns a list of (facet_index, (k, 3) vertex array ordered around the
    facet centroid). Redundant facets and degenerate faces are omitted.
    """
    if body.dim != 3:
        raise ValueError("facet polygons are implemented for n = 3 only")
    verts = vertex_enumeration(body)
    scale = float(np.max(np.abs(verts))) or 1.0
    out = []
    for i in range(body.facet_count):
        on_plane = np.abs(verts @ body.normals[i] - body.support[i]) <= tol * scale
        face = verts[on_plane]
        if face.shape[0] < 3:
            continue
        center = face.mean(axis=0)
        normal = body.normals[i]
        # orthonormal frame of the facet plane
        a = np.eye(3)[int(np.argmin(np.abs(normal)))]
        e1 = np.cross(normal, a)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(normal, e1)
        rel = face - center
        order = np.argsort(np.arctan2(rel @ e2, rel @ e1))
        out.append((i, face[order]))
    return out


def facet_area(polygon: np.ndarray) -> float:
    """Area of a planar convex polygon in R^3 given ordered vertices."""
    center = polygon.mean(axis=0)
    total = 0.0
    k = polygon.shape[0]
    for j in range(k):
        a = polygon[j] - center
        b = polygon[(j + 1) % k] - center
        total += 0.5 * np.linalg.norm(np.cross(a, b))
    return float(total)


# ---------------------------------------------------------------------------
# star bodies


@dataclass(frozen=True)
class StarBody:
    """A star body given by a positive radial function on unit vectors.

    sandwich is the smallest c >= 1 with c^-1 <= rho <= c on the probe grid
    (the constant appearing in the compactness estimates). The radial callable
    must be vectorized: (N, n) unit rows in, N positive values out.
    """

    dim: int
    radial_fn: object
    sandwich: float = field(default=0.0)
    label: str = ""

    def __post_init__(self):
        probe = _probe(self.dim)
        vals = self.radial(probe.nodes)
        if np.any(~np.isfinite(vals)) or np.any(vals <= 0.0):
            raise ValueError("radial function must be positive and finite")
        c = max(float(np.max(vals)), 1.0 / float(np.min(vals)), 1.0)
        if self.sandwich <= 0.0:
            object.__setattr__(self, "sandwich", c)
        elif c > self.sandwich * (1 + 1e-9):
            raise ValueError(
                f"declared sandwich constant {self.sandwich} violated ({c:.6g})"
            )

    def radial(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.asarray(self.radial_fn(pts), dtype=float)

    def radial_homogeneous(self, points: np.ndarray) -> np.ndarray:
        """Radial extended to nonzero points by homogeneity of degree -1."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        norms = np.linalg.norm(pts, axis=1)
        if np.any(norms < 1e-14):
            raise ValueError("radial function undefined at zero")
        return self.radial(pts / norms[:, None]) / norms

    def gauge(self, points: np.ndarray) -> np.ndarray:
        """Minkowski gauge ||x||_Q = 1 / rho_Q(x)."""
        return 1.0 / self.radial_homogeneous(points)

    @staticmethod
    def ball(n: int, radius: float = 1.0) -> "StarBody":
        r = float(radius)
        return StarBody(dim=n, radial_fn=lambda pts: np.full(pts.shape[0], r),
                        label=f"ball(r={r})")

    @staticmethod
    def ellipsoid(half_axes) -> "StarBody":
        axes = np.asarray(half_axes, dtype=float)
        if np.any(axes <= 0.0):
            raise ValueError("half axes must be positive")

        def rho(pts):
            return 1.0 / np.sqrt(np.sum((pts / axes[None, :]) ** 2, axis=1))

        return StarBody(dim=axes.size, radial_fn=rho,
                        label=f"ellipsoid{tuple(axes)}")

    @staticmethod
    def from_polytope(body: SupportPolytope, label: str = "") -> "StarBody":
        def rho(pts):
            values, _ = radial_profile(body, pts)
            return values

        return StarBody(dim=body.dim, radial_fn=rho,
                        label=label or "polytope-radial")

    @staticmethod
    def box(half_axes) -> "StarBody":
        """Coordinate box with the exact radial min_i a_i / |u_i|."""
        axes = np.asarray(half_axes, dtype=float)

        def rho(pts):
            with np.errstate(divide="ignore"):
                ratios = np.where(np.abs(pts) > 1e-300,
                                  axes[None, :] / np.abs(pts), np.inf)
            return np.min(ratios, axis=1)

        return StarBody(dim=axes.size, radial_fn=rho, label=f"box{tuple(axes)}")

    def transformed(self, phi: np.ndarray, label: str = "") -> "StarBody":
        """The image phi Q, via rho_{phi Q}(x) = rho_Q(phi^-1 x)."""
        phi_inv = np.linalg.inv(np.asarray(phi, dtype=float))
        base = self

        def rho(pts):
            return base.radial_homogeneous(pts @ phi_inv.T)

        return StarBody(dim=self.dim, radial_fn=rho,
                        label=label or f"transformed({self.label})")

    def is_invariant(self, group: OrthogonalGroup, tol: float = 1e-8) -> tuple[bool, float]:
        probe = _probe(self.dim)
        vals = self.radial(probe.nodes)
        worst = 0.0
        for g in group.elements:
            worst = max(worst, float(np.max(np.abs(self.radial(probe.nodes @ g.T) - vals))))
        return worst <= tol, worst
