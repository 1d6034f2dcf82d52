"""Lattice definitions, nearest-point search and Voronoi cell statistics.

Three lattices are supported: the integer lattice Z^n, the hexagonal lattice
A2 and the "diamond" lattice.  The diamond lattice is handled as the union of
two scalar codebooks, Z^n and Z^n + 1/2, each scaled by the stride; the
banded generator matrix returned by :func:`generator_matrix` is kept for
reference only.  :func:`fundamental_basis` gives a basis of the point set the
quantizers actually use.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, ParameterError, SearchSpaceTooLargeError

__all__ = [
    "LatticeKind",
    "LatticeSpec",
    "LatticePoint",
    "SecondMomentEstimate",
    "round_half_away",
    "generator_matrix",
    "fundamental_basis",
    "cell_volume",
    "nearest_point",
    "nearest_points",
    "nearest_point_bruteforce",
    "nearest_points_bruteforce",
    "estimate_second_moment",
]


class LatticeKind(enum.Enum):
    INTEGER = "z"
    HEXAGONAL = "a2"
    DIAMOND = "diamond"

    @classmethod
    def parse(cls, value: "str | LatticeKind") -> "LatticeKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ParameterError(f"unknown lattice kind {value!r}") from None


@dataclass(frozen=True)
class LatticeSpec:
    kind: LatticeKind
    dimension: int
    stride: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", LatticeKind.parse(self.kind))
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ParameterError(f"dimension must be a positive integer, got {self.dimension}")
        object.__setattr__(self, "dimension", int(self.dimension))
        if self.kind is LatticeKind.HEXAGONAL and self.dimension != 2:
            raise DimensionMismatchError(f"A2 lattice requires dimension 2, got {self.dimension}")
        if not (np.isfinite(self.stride) and self.stride > 0):
            raise ParameterError(f"stride must be positive, got {self.stride}")
        object.__setattr__(self, "stride", float(self.stride))

    def with_stride(self, stride: float) -> "LatticeSpec":
        return LatticeSpec(self.kind, self.dimension, stride)


@dataclass
class LatticePoint:
    """A lattice point with the integer data that reproduces it.

    ``indices`` are generator coefficients for A2 and per-axis integers for
    the other kinds, where ``coords = (indices + coset_flag / 2) * stride``.
    """

    coords: np.ndarray
    coset_flag: int = 0
    indices: np.ndarray = field(default=None)

    def reconstruct(self, spec: LatticeSpec) -> np.ndarray:
        return reconstruct_points(spec, self.indices[None, :], np.array([self.coset_flag]))[0]

    def __eq__(self, other):
        if not isinstance(other, LatticePoint):
            return NotImplemented
        return self.coset_flag == other.coset_flag and np.array_equal(self.coords, other.coords)


@dataclass(frozen=True)
class SecondMomentEstimate:
    g_value: float
    std_error: float
    sample_count: int


_SQRT3_2 = math.sqrt(3.0) / 2.0


def round_half_away(x):
    """Round to nearest integer, ties away from zero (platform independent)."""
    x = np.asarray(x, dtype=float)
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def generator_matrix(spec: LatticeSpec) -> np.ndarray:
    n, d = spec.dimension, spec.stride
    if spec.kind is LatticeKind.INTEGER:
        u = np.eye(n)
    elif spec.kind is LatticeKind.HEXAGONAL:
        u = np.array([[1.0, 0.0], [0.5, _SQRT3_2]])
    else:
        # banded form: first row e_1, row i has +1/2 at column i-1 and -1/2 at column i
        u = np.zeros((n, n))
        u[0, 0] = 1.0
        for i in range(1, n):
            u[i, i - 1] = 0.5
            u[i, i] = -0.5
    return d * u


def fundamental_basis(spec: LatticeSpec) -> np.ndarray:
    """Row basis of the point set that :func:`nearest_point` quantizes to.

    Differs from :func:`generator_matrix` only for the diamond lattice, whose
    two-coset union Z^n ∪ (Z^n + 1/2) is spanned by e_1..e_{n-1} and the
    all-halves vector.
    """
    if spec.kind is not LatticeKind.DIAMOND:
        return generator_matrix(spec)
    n = spec.dimension
    b = np.eye(n)
    b[n - 1, :] = 0.5
    return spec.stride * b


def cell_volume(spec: LatticeSpec) -> float:
    return float(abs(np.linalg.det(fundamental_basis(spec))))


def _as_batch(spec: LatticeSpec, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[None, :]
    if z.ndim != 2 or z.shape[1] != spec.dimension:
        raise DimensionMismatchError(
            f"expected vectors of length {spec.dimension}, got shape {np.shape(z)}"
        )
    return z


def reconstruct_points(spec: LatticeSpec, indices, flags) -> np.ndarray:
    indices = np.asarray(indices, dtype=float)
    if spec.kind is LatticeKind.HEXAGONAL:
        return indices @ generator_matrix(spec)
    flags = np.asarray(flags, dtype=float).reshape(-1, 1)
    return (indices + 0.5 * flags) * spec.stride


def _a2_candidates(spec: LatticeSpec, z: np.ndarray, radius: int):
    u = generator_matrix(spec)
    centre = round_half_away(z @ np.linalg.inv(u))
    offs = np.arange(-radius, radius + 1)
    grid = np.array([(a, b) for a in offs for b in offs], dtype=float)
    # search the rounded coefficients first so exact ties keep them
    order = np.argsort(np.abs(grid).sum(axis=1), kind="stable")
    grid = grid[order]
    cand = centre[:, None, :] + grid[None, :, :]
    pts = cand @ u
    d2 = np.sum((z[:, None, :] - pts) ** 2, axis=2)
    best = np.argmin(d2, axis=1)
    rows = np.arange(len(z))
    return cand[rows, best].astype(np.int64), pts[rows, best]


def nearest_points(spec: LatticeSpec, z):
    """Batch nearest-point quantization.

    Returns ``(indices, flags, coords)`` for an ``(N, n)`` array of inputs.
    For the diamond lattice both cosets are rounded and the nearer one is
    kept; exact ties keep the base coset.
    """
    z = _as_batch(spec, z)
    flags = np.zeros(len(z), dtype=np.uint8)
    if spec.kind is LatticeKind.HEXAGONAL:
        idx, coords = _a2_candidates(spec, z, 1)
        return idx, flags, coords
    u = z / spec.stride
    k0 = round_half_away(u)
    q0 = k0 * spec.stride
    if spec.kind is LatticeKind.INTEGER:
        return k0.astype(np.int64), flags, q0
    k1 = round_half_away(u - 0.5)
    q1 = (k1 + 0.5) * spec.stride
    e0 = np.sum((z - q0) ** 2, axis=1)
    e1 = np.sum((z - q1) ** 2, axis=1)
    pick = e1 < e0
    flags[pick] = 1
    idx = np.where(pick[:, None], k1, k0).astype(np.int64)
    coords = np.where(pick[:, None], q1, q0)
    return idx, flags, coords


def nearest_point(spec: LatticeSpec, z) -> LatticePoint:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise DimensionMismatchError("nearest_point expects a single vector")
    idx, flags, coords = nearest_points(spec, z)
    return LatticePoint(coords=coords[0], coset_flag=int(flags[0]), indices=idx[0])


def _check_search_space(n: int, radius: int):
    if int(radius) != radius or radius < 2:
        raise ParameterError(f"radius must be an integer >= 2, got {radius}")
    if n * math.log2(2 * radius + 1) > 40:
        raise SearchSpaceTooLargeError(
            f"box of half-width {radius} in {n} dimensions exceeds 2^40 points"
        )


def _box_search(resid: np.ndarray, radius: int):
    """Exhaustive search of integer offsets in [-radius, radius]^n minimising
    sum((resid - o)^2), with branch-and-bound pruning.

    Coordinates are separable and nonnegative, so any prefix whose partial
    cost already exceeds the cost of the box centre cannot lead to a better
    point; all other branches are enumerated.
    """
    nz, n = resid.shape
    offs = np.arange(-radius, radius + 1)
    k = len(offs)
    bound = np.sum(resid**2, axis=1)
    bound = bound * (1 + 1e-9) + 1e-300
    owner = np.arange(nz)
    prefix = np.zeros((nz, 0), dtype=np.int64)
    cost = np.zeros(nz)
    for i in range(n):
        owner = np.repeat(owner, k)
        prefix = np.hstack([np.repeat(prefix, k, axis=0), np.tile(offs, len(cost))[:, None]])
        cost = np.repeat(cost, k) + (resid[owner, i] - prefix[:, i]) ** 2
        keep = cost <= bound[owner]
        owner, prefix, cost = owner[keep], prefix[keep], cost[keep]
    order = np.lexsort((cost, owner))
    owner, prefix, cost = owner[order], prefix[order], cost[order]
    first = np.ones(len(owner), dtype=bool)
    first[1:] = owner[1:] != owner[:-1]
    best_off = np.zeros((nz, n), dtype=np.int64)
    best_cost = np.full(nz, np.inf)
    best_off[owner[first]] = prefix[first]
    best_cost[owner[first]] = cost[first]
    return best_off, best_cost


def nearest_points_bruteforce(spec: LatticeSpec, z, radius: int = 2, chunk: int = 20000):
    """Oracle nearest-point search by enumeration of a coefficient box.

    The box has half-width ``radius`` around the rounded coefficients of each
    input (per coset for the diamond lattice).  Returns ``(indices, flags,
    coords)`` like :func:`nearest_points`.
    """
    z = _as_batch(spec, z)
    _check_search_space(spec.dimension, radius)
    if len(z) > chunk:
        parts = [nearest_points_bruteforce(spec, z[i : i + chunk], radius, chunk)
                 for i in range(0, len(z), chunk)]
        return tuple(np.concatenate(p) for p in zip(*parts))
    flags = np.zeros(len(z), dtype=np.uint8)
    if spec.kind is LatticeKind.HEXAGONAL:
        idx, coords = _a2_candidates(spec, z, radius)
        return idx, flags, coords
    u = z / spec.stride
    shifts = [0.0] if spec.kind is LatticeKind.INTEGER else [0.0, 0.5]
    best = None
    for flag, s in enumerate(shifts):
        centre = np.floor(u - s + 0.5)
        off, cost = _box_search(u - s - centre, radius)
        idx = (centre + off).astype(np.int64)
        if best is None:
            best = (idx, cost)
            continue
        pick = cost < best[1]
        flags[pick] = flag
        best = (np.where(pick[:, None], idx, best[0]), np.where(pick, cost, best[1]))
    idx = best[0]
    return idx, flags, reconstruct_points(spec, idx, flags)


def nearest_point_bruteforce(spec: LatticeSpec, z, radius: int = 2) -> LatticePoint:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise DimensionMismatchError("nearest_point_bruteforce expects a single vector")
    idx, flags, coords = nearest_points_bruteforce(spec, z, radius)
    return LatticePoint(coords=coords[0], coset_flag=int(flags[0]), indices=idx[0])


def estimate_second_moment(
    spec: LatticeSpec, samples: int = 10**6, seed: int = 0, chunk: int = 1 << 16
) -> SecondMomentEstimate:
    """Monte Carlo estimate of the normalized second moment G.

    Points are drawn uniformly in the fundamental parallelotope of
    :func:`fundamental_basis` (exactly one cell volume), quantized with
    :func:`nearest_point`, and ``|z - Q(z)|^2 / (n V^(2/n))`` is averaged.
    Each chunk of ``chunk`` samples uses its own child of ``SeedSequence(seed)``,
    so the result does not depend on how chunks are scheduled.
    """
    if samples < 10**4:
        raise ParameterError(f"need at least 10^4 samples, got {samples}")
    n = spec.dimension
    basis = fundamental_basis(spec)
    norm = n * cell_volume(spec) ** (2.0 / n)
    nchunks = -(-samples // chunk)
    total = 0.0
    total_sq = 0.0
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(nchunks)):
        m = min(chunk, samples - i * chunk)
        rng = np.random.default_rng(child)
        z = rng.random((m, n)) @ basis
        _, _, q = nearest_points(spec, z)
        e = np.sum((z - q) ** 2, axis=1) / norm
        total += float(e.sum())
        total_sq += float((e * e).sum())
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0) * samples / (samples - 1)
    return SecondMomentEstimate(mean, math.sqrt(var / samples), samples)
