"""Dual mixed volumes, facet-atomized dual curvature measures, and the
entropy functional driving the solver.

For a halfspace body the dual curvature measure concentrates on the facet
normals, so it is represented as one atom per normal: each quadrature node u
contributes its integrand value to the facet whose supporting hyperplane
contains the boundary point rho(u) u. Two independent evaluation routes are
provided (spherical-grid binning and an exact boundary integral over facet
polygons) and cross-checked in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bodies import (
    StarBody,
    SupportPolytope,
    facet_area,
    facet_polygons,
    radial_profile,
)
from .groups import OrthogonalGroup, symmetrize_density
from .sphere import SphericalGrid, stable_sum

__all__ = [
    "FacetMeasure",
    "MeasureSpec",
    "dual_mixed_volume",
    "dual_curvature_measure",
    "lp_dual_curvature_measure",
    "dual_curvature_via_boundary",
    "entropy_value",
    "entropy_gradient",
    "affine_invariance_check",
    "transform_polytope",
]


@dataclass(frozen=True)
class FacetMeasure:
    """Per-facet totals of a curvature measure (one atom per body normal)."""

    atoms: np.ndarray
    grid_id: str

    def __post_init__(self):
        atoms = np.ascontiguousarray(np.asarray(self.atoms, dtype=float))
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    def total(self) -> float:
        return stable_sum(self.atoms)


@dataclass(frozen=True)
class MeasureSpec:
    """A finite direction-atomized measure mu on the sphere.

    atoms[i] is the mass attributed to direction i. When built from a density
    f, each grid node deposits w * f(u) on its nearest direction (largest
    inner product, ties to the smallest index), which is exactly the facet
    assignment of a uniform-support body; the discrete stationarity equation
    is then solvable to machine precision.
    """

    directions: np.ndarray
    atoms: np.ndarray
    grid_id: str = ""
    density_label: str = ""

    def __post_init__(self):
        dirs = np.ascontiguousarray(np.asarray(self.directions, dtype=float))
        atoms = np.ascontiguousarray(np.asarray(self.atoms, dtype=float))
        if atoms.shape != (dirs.shape[0],):
            raise ValueError("need one atom per direction")
        if np.any(atoms < 0.0) or not np.all(np.isfinite(atoms)):
            raise ValueError("atoms must be finite and nonnegative")
        if stable_sum(atoms) <= 0.0:
            raise ValueError("measure must be non-trivial (positive total mass)")
        dirs.setflags(write=False)
        atoms.setflags(write=False)
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "atoms", atoms)

    @property
    def total_mass(self) -> float:
        return stable_sum(self.atoms)

    @staticmethod
    def from_density(density, grid: SphericalGrid, directions: np.ndarray,
                     group: OrthogonalGroup | None = None,
                     label: str = "") -> "MeasureSpec":
        f = symmetrize_density(group, density) if group is not None else density
        values = np.asarray(f(grid.nodes), dtype=float)
        if np.any(values < 0.0) or not np.all(np.isfinite(values)):
            raise ValueError("density must be finite and nonnegative")
        dirs = np.asarray(directions, dtype=float)
        atoms = np.zeros(dirs.shape[0])
        step = max(1, 4_000_000 // dirs.shape[0])
        for start in range(0, grid.node_count, step):
            sl = slice(start, start + step)
            idx = np.argmax(grid.nodes[sl] @ dirs.T, axis=1)
            atoms += np.bincount(idx, weights=grid.weights[sl] * values[sl],
                                 minlength=dirs.shape[0])
        return MeasureSpec(directions=dirs, atoms=atoms, grid_id=grid.grid_id,
                           density_label=label)

    @staticmethod
    def from_atoms(atoms, directions, label: str = "") -> "MeasureSpec":
        return MeasureSpec(directions=np.asarray(directions, dtype=float),
                           atoms=np.asarray(atoms, dtype=float),
                           density_label=label)

    def orbit_totals(self, orbit_partition: list[list[int]]) -> np.ndarray:
        return np.array([stable_sum(self.atoms[o]) for o in orbit_partition])


def _integrand(body: SupportPolytope, q_body: StarBody, q: float,
               grid: SphericalGrid):
    """Node values rho_K^q rho_Q^{n-q} / n and the facet assignment."""
    if q == 0.0:
        raise ValueError("dual mixed volume requires q != 0")
    rho, idx = radial_profile(body, grid.nodes)
    rho_q = q_body.radial(grid.nodes)
    n = body.dim
    values = rho ** q * rho_q ** (n - q) / n
    if not np.all(np.isfinite(values)):
        bad = int(np.argmax(~np.isfinite(values)))
        raise ValueError(f"non-finite dual volume integrand at node {bad}")
    return values, idx


def dual_mixed_volume(body: SupportPolytope, q_body: StarBody, q: float,
                      grid: SphericalGrid) -> float:
    """V~_q(K, Q) = (1/n) integral of rho_K^q rho_Q^{n-q} over the sphere."""
    values, _ = _integrand(body, q_body, q, grid)
    return stable_sum(values * grid.weights)


def dual_curvature_measure(body: SupportPolytope, q_body: StarBody, q: float,
                           grid: SphericalGrid) -> FacetMeasure:
    """Facet atoms of the q-th dual curvature measure of K relative to Q.

    Bin i collects (1/n) rho_K^q rho_Q^{n-q} w over the nodes whose radial
    ray exits through facet i; the atoms therefore partition the dual mixed
    volume exactly. Redundant facets receive zero.
    """
    values, idx = _integrand(body, q_body, q, grid)
    atoms = np.bincount(idx, weights=values * grid.weights,
                        minlength=body.facet_count)
    return FacetMeasure(atoms=atoms, grid_id=grid.grid_id)


def lp_dual_curvature_measure(body: SupportPolytope, q_body: StarBody,
                              p: float, q: float,
                              grid: SphericalGrid) -> FacetMeasure:
    """Support-weighted atoms: atom_i of C~_q times h_i^{-p}.

    h_i is used directly even for redundant facets (their atom is zero, so
    the true support value there is irrelevant).
    """
    base = dual_curvature_measure(body, q_body, q, grid)
    return FacetMeasure(atoms=base.atoms * body.support ** (-p),
                        grid_id=grid.grid_id)


def dual_curvature_via_boundary(body: SupportPolytope, q_body: StarBody,
                                q: float, subdivisions: int = 16) -> FacetMeasure:
    """Independent facet atoms from the boundary integral (n = 3 only).

    Atom i = (h_i / n) * integral over facet i of rho_Q^{n-q}(x) dA(x),
    evaluated by fanning each facet polygon into triangles and applying a
    midpoint rule on a uniform triangle subdivision. No spherical grid is
    involved, so this is the cross-check oracle for the grid-binned atoms.
    """
    if body.dim != 3:
        raise ValueError("boundary-integral route requires n = 3")
    if q == 0.0:
        raise ValueError("requires q != 0")
    n = body.dim
    atoms = np.zeros(body.facet_count)
    for i, polygon in facet_polygons(body):
        if facet_area(polygon) < 1e-12:
            continue
        center = polygon.mean(axis=0)
        total = 0.0
        k = polygon.shape[0]
        for j in range(k):
            tri = np.array([center, polygon[j], polygon[(j + 1) % k]])
            total += _triangle_quadrature(tri, q_body, n - q, subdivisions)
        atoms[i] = body.support[i] / n * total
    return FacetMeasure(atoms=atoms, grid_id="boundary-integral")


def _triangle_quadrature(tri: np.ndarray, q_body: StarBody, power: float,
                         s: int) -> float:
    """Midpoint rule for rho_Q^power over a triangle split into s^2 copies."""
    a, b, c = tri
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a))
    if area < 1e-15:
        return 0.0
    centroids = []
    for i in range(s):
        for j in range(s - i):
            # upright subtriangle centroid in barycentric steps of 1/s
            centroids.append(((i + 1 / 3), (j + 1 / 3)))
            if i + j < s - 1:  # inverted subtriangle
                centroids.append(((i + 2 / 3), (j + 2 / 3)))
    bary = np.array(centroids) / s
    pts = a[None, :] + bary[:, :1] * (b - a)[None, :] + bary[:, 1:] * (c - a)[None, :]
    if power == 0.0:
        vals = np.ones(pts.shape[0])
    else:
        vals = q_body.radial_homogeneous(pts) ** power
    return float(area / (s * s) * np.sum(vals))


# ---------------------------------------------------------------------------
# entropy functional


def _check_alignment(body: SupportPolytope, mu: MeasureSpec):
    if body.normals.shape != mu.directions.shape or \
            not np.allclose(body.normals, mu.directions, atol=1e-12):
        raise ValueError("measure atoms must live on the body's normal set")


def entropy_value(body: SupportPolytope, mu: MeasureSpec, q_body: StarBody,
                  p: float, q: float, grid: SphericalGrid) -> float:
    """(1/p) log sum_i h_i^p mu_i - (1/q) log V~_q(K, Q); scale-invariant."""
    if p >= 0 or q <= 0:
        raise ValueError("the entropy functional is used with p < 0 < q")
    _check_alignment(body, mu)
    mass_term = stable_sum(body.support ** p * mu.atoms)
    volume = dual_mixed_volume(body, q_body, q, grid)
    if mass_term <= 0 or volume <= 0:
        raise ValueError("non-positive log argument in entropy functional")
    return math.log(mass_term) / p - math.log(volume) / q


def entropy_gradient(body: SupportPolytope, mu: MeasureSpec, q_body: StarBody,
                     p: float, q: float, grid: SphericalGrid) -> np.ndarray:
    """Analytic gradient of the entropy functional in the support numbers.

    d/dh_i = h_i^{p-1} mu_i / (sum_j h_j^p mu_j) - C~_{q,i} / (h_i V~_q),
    using that a unit bump of h_i changes V~_q by q C~_{q,i} / h_i (the
    first-variation of the dual volume along the body's own Wulff family).
    The pairing <grad, h> vanishes identically: both terms contract to 1.
    """
    _check_alignment(body, mu)
    h = body.support
    weighted = h ** p * mu.atoms
    mass_term = stable_sum(weighted)
    curv = dual_curvature_measure(body, q_body, q, grid)
    volume = curv.total()
    if mass_term <= 0 or volume <= 0:
        raise ValueError("degenerate entropy state")
    return (weighted / h) / mass_term - curv.atoms / (h * volume)


# ---------------------------------------------------------------------------
# affine invariance


def transform_polytope(body: SupportPolytope, phi: np.ndarray) -> SupportPolytope:
    """The image phi K with re-normalized constraints.

    <x, v> <= h maps to the constraint with normal phi^{-T} v / |phi^{-T} v|
    and support number h / |phi^{-T} v|.
    """
    phi = np.asarray(phi, dtype=float)
    phi_inv_t = np.linalg.inv(phi).T
    w = body.normals @ phi_inv_t.T
    norms = np.linalg.norm(w, axis=1)
    return SupportPolytope(dim=body.dim, normals=w / norms[:, None],
                           support=body.support / norms)


def affine_invariance_check(body: SupportPolytope, q_body: StarBody, q: float,
                            phi: np.ndarray, g, grid_a: SphericalGrid,
                            grid_b: SphericalGrid) -> tuple[float, float, float]:
    """Both sides of the unimodular-equivariance identity and their gap.

    Left: integral of g against the curvature atoms of (phi K, phi Q), on
    grid_a. Right: integral of g(phi^{-T} v / |phi^{-T} v|) against the atoms
    of (K, Q), on grid_b. The two grids should be independent so the gap
    reflects genuine quadrature disagreement, not shared bias.
    """
    phi = np.asarray(phi, dtype=float)
    if abs(np.linalg.det(phi) - 1.0) > 1e-10:
        raise ValueError("phi must be unimodular (det = 1 within 1e-10)")
    if np.linalg.cond(phi) > 1e6:
        raise ValueError("phi too ill-conditioned for a meaningful check")

    body_t = transform_polytope(body, phi)
    q_t = q_body.transformed(phi)
    atoms_l = dual_curvature_measure(body_t, q_t, q, grid_a).atoms
    lhs = stable_sum(np.asarray(g(body_t.normals), dtype=float) * atoms_l)

    atoms_r = dual_curvature_measure(body, q_body, q, grid_b).atoms
    # body_t.normals are exactly the renormalized phi^{-T} v_i
    rhs = stable_sum(np.asarray(g(body_t.normals), dtype=float) * atoms_r)
    gap = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
    return lhs, rhs, gap
