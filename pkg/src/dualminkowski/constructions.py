"""Generators of non-origin-symmetric, centered, group-invariant bodies.

The workhorse takes a base body with a unique radial extremum, applies a
generically-sampled rotation, and intersects the orbit of the result under
the group: the constraint pool is group-stable by construction, and for
almost every rotation the extremal boundary point has no antipodal partner
in its orbit, which breaks origin symmetry. A certificate quantifies both
the achieved invariance and the measured asymmetry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bodies import SupportPolytope, is_invariant, radial_profile
from .groups import OrthogonalGroup, certify, probe_grid
from .sphere import SphericalGrid

__all__ = [
    "AsymmetryCertificate",
    "random_generic_rotation",
    "orbit_intersection_body",
    "orbit_intersection_body_circum",
    "dirichlet_voronoi_cone",
    "DirichletVoronoiCone",
    "fundamental_domain_check",
    "certify_asymmetry",
    "radial_extremum_is_unique",
]


@dataclass(frozen=True)
class AsymmetryCertificate:
    """Measured asymmetry of a body together with its invariance deviation.

    max_gap is the largest |rho(u) - rho(-u)| over probe nodes. The body is
    declared non-origin-symmetric when the gap clearly dominates the noise
    floor set by the invariance deviation.
    """

    max_gap: float
    witness: np.ndarray
    invariance_deviation: float

    @property
    def non_origin_symmetric(self) -> bool:
        return self.max_gap > 10.0 * self.invariance_deviation + 1e-6


def certify_asymmetry(body: SupportPolytope, grid: SphericalGrid | None = None,
                      invariance_deviation: float = 0.0) -> AsymmetryCertificate:
    """Probe |rho(u) - rho(-u)| over a grid and report the worst direction."""
    if grid is None:
        grid = probe_grid(body.dim)
    rho_pos, _ = radial_profile(body, grid.nodes)
    rho_neg, _ = radial_profile(body, -grid.nodes)
    gaps = np.abs(rho_pos - rho_neg)
    i = int(np.argmax(gaps))
    return AsymmetryCertificate(max_gap=float(gaps[i]), witness=grid.nodes[i],
                                invariance_deviation=invariance_deviation)


def radial_extremum_is_unique(body: SupportPolytope, mode: str = "min",
                              margin: float = 1e-4,
                              grid: SphericalGrid | None = None):
    """Check (on a probe grid) that the radial extremum is attained at a
    single direction cluster, with the stated margin to the runner-up.

    Returns (ok, extremal direction). The hypothesis in the generator is
    open-dense; this margin test makes it checkable on discrete data.
    """
    if grid is None:
        grid = probe_grid(body.dim)
    rho, _ = radial_profile(body, grid.nodes)
    if mode == "min":
        star = float(np.min(rho))
        near = rho <= star + margin * star
        arg = int(np.argmin(rho))
    elif mode == "max":
        star = float(np.max(rho))
        near = rho >= star - margin * star
        arg = int(np.argmax(rho))
    else:
        raise ValueError("mode must be 'min' or 'max'")
    u_star = grid.nodes[arg]
    cluster_radius = math.sqrt(8.0 * math.pi / grid.node_count)  # ~2 spacings
    cos_floor = 1.0 - cluster_radius ** 2 / 2.0
    ok = bool(np.all(grid.nodes[near] @ u_star >= cos_floor))
    return ok, u_star


def random_generic_rotation(group: OrthogonalGroup, z: np.ndarray, seed: int = 0,
                            max_tries: int = 200,
                            margin: float = 1e-3) -> np.ndarray:
    """Haar-sample h in O(n) until -h z stays `margin` away from the orbit of
    h z. The rejected set has measure zero, so acceptance is near-immediate;
    rejection keeps the almost-every-rotation hypothesis checkable.
    """
    z = np.asarray(z, dtype=float)
    z = z / np.linalg.norm(z)
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        m = rng.standard_normal((group.dim, group.dim))
        qmat, r = np.linalg.qr(m)
        h = qmat * np.sign(np.diag(r))[None, :]
        hz = h @ z
        orbit = group.apply(hz[None])[:, 0, :]
        if float(np.min(np.linalg.norm(orbit + hz[None], axis=1))) >= margin:
            return h
    raise ValueError(
        f"no generic rotation found in {max_tries} tries (margin {margin})"
    )


def _pool_orbit_constraints(group: OrthogonalGroup, base: SupportPolytope,
                            rotation: np.ndarray) -> SupportPolytope:
    """Constraints of the intersection over the group orbit of rotation@base.

    Every g contributes the rotated constraints (normal g @ h @ v_i, same
    support number); near-duplicate normals are merged keeping the smaller
    support value, so the set stays group-stable.
    """
    rotated = base.normals @ rotation.T
    all_normals = np.concatenate(group.apply(rotated), axis=0)
    all_support = np.tile(base.support, group.order)
    order = np.lexsort(np.round(all_normals, 9).T)
    normals_sorted = all_normals[order]
    support_sorted = all_support[order]
    kept_n: list[np.ndarray] = []
    kept_h: list[float] = []
    for v, h in zip(normals_sorted, support_sorted):
        if kept_n and np.linalg.norm(kept_n[-1] - v) <= 1e-9:
            kept_h[-1] = min(kept_h[-1], float(h))
        else:
            kept_n.append(v)
            kept_h.append(float(h))
    return SupportPolytope(dim=base.dim, normals=np.array(kept_n),
                           support=np.array(kept_h))


def _checked_group(group: OrthogonalGroup) -> None:
    cert = certify(group)
    if not cert.admissible_for_asymmetric_construction():
        raise ValueError(
            "group must have no nonzero fixed point and must not contain -I "
            f"(certificate: {cert})"
        )


def orbit_intersection_body(group: OrthogonalGroup, base: SupportPolytope,
                            rotation: np.ndarray | None = None, seed: int = 0,
                            grid: SphericalGrid | None = None):
    """Invariant body from a base with unique minimal radius.

    Returns (body, certificate). The intersection of the rotated orbit is
    group-invariant by constraint pooling; the unique inner touching point
    of the base guarantees (for the generically sampled rotation) a boundary
    point whose antipode is interior, certifying non-symmetry.
    """
    _checked_group(group)
    ok, u_min = radial_extremum_is_unique(base, "min", grid=grid)
    if not ok:
        raise ValueError("base body lacks a unique minimal radius (margin 1e-4)")
    if rotation is None:
        rotation = random_generic_rotation(group, u_min, seed=seed)
    body = _pool_orbit_constraints(group, base, rotation)
    _, deviation = is_invariant(body, group, grid)
    cert = certify_asymmetry(body, grid, invariance_deviation=deviation)
    return body, cert


def orbit_intersection_body_circum(group: OrthogonalGroup, base: SupportPolytope,
                                   rotation: np.ndarray | None = None,
                                   seed: int = 0,
                                   grid: SphericalGrid | None = None):
    """Dual variant: base with unique maximal radius.

    The provable witness here is one-sided: the antipode of the rotated outer
    touching point stays strictly inside (rho_K(-hz) < max rho_C), because
    -hz already misses the rotated base copy. The touch radius rho_K(hz)
    itself drops below max rho_C for any fixed-point-free group, since hz
    would have to survive every rotated copy to stay on the boundary; it is
    recorded for diagnostics but not asserted.
    """
    _checked_group(group)
    ok, u_max = radial_extremum_is_unique(base, "max", grid=grid)
    if not ok:
        raise ValueError("base body lacks a unique maximal radius (margin 1e-4)")
    rho_max, _ = radial_profile(base, u_max[None])
    if rotation is None:
        rotation = random_generic_rotation(group, u_max, seed=seed)
    body = _pool_orbit_constraints(group, base, rotation)
    _, deviation = is_invariant(body, group, grid)
    cert = certify_asymmetry(body, grid, invariance_deviation=deviation)
    hz = rotation @ u_max
    rho_at, _ = radial_profile(body, hz[None])
    rho_anti, _ = radial_profile(body, -hz[None])
    checks = {
        "touch_radius": float(rho_at[0]),
        "base_max_radius": float(rho_max[0]),
        "antipodal_radius": float(rho_anti[0]),
        "antipode_interior": bool(rho_anti[0] < rho_max[0] - 1e-9),
    }
    return body, cert, checks


# ---------------------------------------------------------------------------
# Dirichlet-Voronoi fundamental cone


@dataclass(frozen=True)
class DirichletVoronoiCone:
    """Polyhedral cone {x : <g z - z, x> <= 0 for all g}, a fundamental
    domain closure for the group action (all constraints pass through 0)."""

    anchor: np.ndarray
    normals: np.ndarray  # rows g z - z, duplicates merged, g != identity

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.normals.shape[0] == 0:
            return np.ones(pts.shape[0], dtype=bool)
        return np.all(pts @ self.normals.T <= tol, axis=1)

    def strictly_contains(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.normals.shape[0] == 0:
            return np.ones(pts.shape[0], dtype=bool)
        return np.all(pts @ self.normals.T < -tol, axis=1)


def dirichlet_voronoi_cone(group: OrthogonalGroup, anchor: np.ndarray,
                           margin: float = 1e-6) -> DirichletVoronoiCone:
    """Fundamental cone of the orbit of a generic unit anchor point.

    Genericity required of the anchor: g z != z and g z != -z for every
    non-identity g, with the stated margin; callers should perturb and retry
    on rejection. One homogeneous halfspace per non-identity element, with
    duplicate normals merged.
    """
    z = np.asarray(anchor, dtype=float)
    z = z / np.linalg.norm(z)
    normals: list[np.ndarray] = []
    eye = np.eye(group.dim)
    for g in group.elements:
        if np.max(np.abs(g - eye)) <= 1e-12:
            continue
        gz = g @ z
        if np.linalg.norm(gz - z) <= margin or np.linalg.norm(gz + z) <= margin:
            raise ValueError(
                "anchor is non-generic for this group (orbit point collides "
                "with the anchor or its antipode); perturb and retry"
            )
        a = gz - z
        if not normals or np.min(np.linalg.norm(np.array(normals) - a, axis=1)) > 1e-9:
            normals.append(a)
    return DirichletVoronoiCone(anchor=z, normals=np.array(normals).reshape(-1, group.dim))


def fundamental_domain_check(group: OrthogonalGroup, cone: DirichletVoronoiCone,
                             sample_count: int = 10000, seed: int = 0) -> dict:
    """Monte-Carlo check of the tiling property: every sampled point lies in
    some rotated copy of the cone, and in at most one copy's interior."""
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((sample_count, group.dim))
    covered = np.zeros(sample_count, dtype=bool)
    interior_hits = np.zeros(sample_count, dtype=int)
    for g in group.elements:
        local = pts @ g  # g^-1 x as rows (g orthogonal: g^-1 = g^T)
        covered |= cone.contains(local)
        interior_hits += cone.strictly_contains(local).astype(int)
    return {
        "sample_count": sample_count,
        "covered": int(np.sum(covered)),
        "max_interior_hits": int(np.max(interior_hits)),
        "all_covered": bool(np.all(covered)),
        "interiors_disjoint": bool(np.max(interior_hits) <= 1),
    }
