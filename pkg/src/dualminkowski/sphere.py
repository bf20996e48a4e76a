"""Deterministic quadrature on the unit sphere S^{n-1}.

Every integral in the package (dual volumes, facet measures, the entropy
functional) is evaluated as a weighted node sum over one of these grids, so
grids are immutable and reproducible from their (scheme, node_count, seed)
triple.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SphericalGrid",
    "unit_ball_volume",
    "sphere_area",
    "build_grid",
    "integrate",
    "integrate_with_stderr",
    "fibonacci_sphere_nodes",
    "icosphere_nodes",
    "stable_sum",
]

SCHEMES = ("uniform-angle", "fibonacci-sphere", "monte-carlo")

_NODE_NORM_TOL = 1e-12


def unit_ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n: pi^(n/2) / Gamma(n/2 + 1)."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def sphere_area(k: int) -> float:
    """Surface area of the unit sphere in R^k.

    Counting conventions for the degenerate cases: the 0-sphere in R^1 is the
    two-point set {-1, +1}, so sphere_area(1) = 2, and sphere_area(0) = 1 (the
    empty product that appears when a radial integral has no angular part).
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if k == 0:
        return 1.0
    if k == 1:
        return 2.0
    return k * unit_ball_volume(k)


def stable_sum(values) -> float:
    """Order-stable compensated sum (exact rounding via math.fsum)."""
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


@dataclass(frozen=True)
class SphericalGrid:
    """Quadrature nodes and weights on S^{n-1}.

    nodes is an (N, n) array of unit vectors, weights an (N,) array of positive
    reals carrying (n-1)-dimensional surface measure. Grids are immutable;
    arrays are set non-writeable at construction.
    """

    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    scheme: str
    seed: int = 0
    grid_id: str = field(default="", compare=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(np.asarray(self.nodes, dtype=float))
        weights = np.ascontiguousarray(np.asarray(self.weights, dtype=float))
        if nodes.ndim != 2 or nodes.shape[1] != self.dim:
            raise ValueError(f"nodes must have shape (N, {self.dim})")
        if weights.shape != (nodes.shape[0],):
            raise ValueError("weights must match node count")
        norms = np.linalg.norm(nodes, axis=1)
        worst = np.max(np.abs(norms - 1.0))
        if worst > _NODE_NORM_TOL:
            raise ValueError(f"node norms deviate from 1 by {worst:.3e}")
        if np.any(weights <= 0.0):
            raise ValueError("weights must be strictly positive")
        total = stable_sum(weights)
        target = sphere_area(self.dim)
        tol = 1e-9 if self.scheme == "uniform-angle" else 0.005 * target
        if abs(total - target) > max(tol, 1e-9):
            raise ValueError(
                f"total weight {total:.12g} misses surface area {target:.12g}"
            )
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if not self.grid_id:
            gid = f"{self.scheme}:n{self.dim}:N{nodes.shape[0]}:s{self.seed}"
            object.__setattr__(self, "grid_id", gid)

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    def total_weight(self) -> float:
        return stable_sum(self.weights)


def fibonacci_sphere_nodes(count: int) -> np.ndarray:
    """Near-uniform spiral nodes on S^2 (golden-angle lattice)."""
    k = np.arange(count, dtype=float)
    z = 1.0 - (2.0 * k + 1.0) / count
    phi = k * math.pi * (3.0 - math.sqrt(5.0))
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    nodes = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    return _renormalize(nodes)


def icosphere_nodes(level: int) -> np.ndarray:
    """Vertices of an icosahedron subdivided `level` times, projected to S^2.

    Yields 12, 42, 162, 642, ... = 10*4^level + 2 unit vectors.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(level):
        midpoint_cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in midpoint_cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                midpoint_cache[key] = len(verts) - 1
            return midpoint_cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return _renormalize(np.array(verts))


def _renormalize(nodes: np.ndarray) -> np.ndarray:
    return nodes / np.linalg.norm(nodes, axis=1, keepdims=True)


def build_grid(n: int, node_count: int, scheme: str = "", seed: int = 0) -> SphericalGrid:
    """Construct a quadrature grid on S^{n-1}.

    Default schemes: exact uniform angles for n=2, a Fibonacci lattice with
    equal weights 4*pi/N for n=3, and seeded equal-weight Monte-Carlo for
    n >= 4. The result is deterministic for fixed (scheme, node_count, seed).
    """
    if n < 2:
        raise ValueError(f"sphere dimension requires n >= 2, got {n}")
    if node_count < 8:
        raise ValueError(f"node_count must be >= 8, got {node_count}")
    if not scheme:
        scheme = {2: "uniform-angle", 3: "fibonacci-sphere"}.get(n, "monte-carlo")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")

    if scheme == "uniform-angle":
        if n != 2:
            raise ValueError("uniform-angle grids are defined only for n=2")
        theta = 2.0 * math.pi * np.arange(node_count) / node_count
        nodes = np.column_stack([np.cos(theta), np.sin(theta)])
        weights = np.full(node_count, 2.0 * math.pi / node_count)
    elif scheme == "fibonacci-sphere":
        if n != 3:
            raise ValueError("fibonacci-sphere grids are defined only for n=3")
        nodes = fibonacci_sphere_nodes(node_count)
        weights = np.full(node_count, 4.0 * math.pi / node_count)
    else:
        rng = np.random.default_rng(seed)
        nodes = rng.standard_normal((node_count, n))
        nodes = _renormalize(nodes)
        weights = np.full(node_count, sphere_area(n) / node_count)

    return SphericalGrid(dim=n, nodes=_renormalize(nodes), weights=weights,
                         scheme=scheme, seed=seed)


def _evaluate(grid: SphericalGrid, f) -> np.ndarray:
    """Evaluate f on all grid nodes; f maps an (N, n) array to an (N,) array."""
    values = np.asarray(f(grid.nodes), dtype=float)
    if values.shape != (grid.node_count,):
        raise ValueError(
            f"integrand returned shape {values.shape}, expected ({grid.node_count},)"
        )
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise ValueError(f"integrand is non-finite at node {idx}: {values[idx]!r}")
    return values


def integrate(grid: SphericalGrid, f) -> float:
    """Quadrature of f over S^{n-1}: sum_i w_i f(u_i), compensated summation.

    f must be a pure vectorized function taking the (N, n) node array and
    returning N finite values. The reduction order is fixed (node index
    order), so repeated evaluation is bit-stable.
    """
    values = _evaluate(grid, f)
    return stable_sum(values * grid.weights)


def integrate_with_stderr(grid: SphericalGrid, f) -> tuple[float, float]:
    """Integral plus a Monte-Carlo standard-error estimate from node variance."""
    values = _evaluate(grid, f)
    total = stable_sum(values * grid.weights)
    area = sphere_area(grid.dim)
    stderr = area * float(np.std(values)) / math.sqrt(grid.node_count)
    return total, stderr
