"""Deterministic symmetric-matrix algebra.

Symmetric matrices are stored as the packed upper triangle in row-major
order ``(1,1),(1,2),...,(1,d),(2,2),...,(d,d)``.  All public index
arguments (probe positions, entry lookups) are 1-based, matching the
usual mathematical convention; they are mapped to the 0-based packed
offset internally and nowhere else.

Everything here is pure and operates on immutable values, so all
functions are safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

ORTHOGONALITY_TOL = 1e-10
CONJUGATION_ASYMMETRY_TOL = 1e-10


@lru_cache(maxsize=None)
def _triu_indices(d: int) -> tuple[np.ndarray, np.ndarray]:
    iu, ju = np.triu_indices(d)
    iu.setflags(write=False)
    ju.setflags(write=False)
    return iu, ju


@lru_cache(maxsize=None)
def pairing_weights(d: int) -> np.ndarray:
    """Packed weights for the trace pairing: 1 on the diagonal, 2 off it."""
    iu, ju = _triu_indices(d)
    w = np.where(iu == ju, 1.0, 2.0)
    w.setflags(write=False)
    return w


def packed_size(d: int) -> int:
    return d * (d + 1) // 2


def _packed_offset(d: int, j: int, k: int) -> int:
    # 1-based logical (j, k) with j <= k -> 0-based packed offset.
    i, l = j - 1, k - 1
    return i * d - i * (i - 1) // 2 + (l - i)


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """Real symmetric d x d matrix, packed upper triangle."""

    dim: int
    packed: np.ndarray

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        packed = np.asarray(self.packed, dtype=np.float64)
        if packed.shape != (packed_size(self.dim),):
            raise ValueError(
                f"packed storage for dim={self.dim} needs "
                f"{packed_size(self.dim)} entries, got shape {packed.shape}"
            )
        packed = packed.copy()
        packed.setflags(write=False)
        object.__setattr__(self, "packed", packed)

    @classmethod
    def zeros(cls, d: int) -> "SymMatrix":
        return cls(d, np.zeros(packed_size(d)))

    @classmethod
    def identity(cls, d: int) -> "SymMatrix":
        p = np.zeros(packed_size(d))
        for j in range(1, d + 1):
            p[_packed_offset(d, j, j)] = 1.0
        return cls(d, p)

    @classmethod
    def from_full(cls, a: np.ndarray, atol: float = 0.0) -> "SymMatrix":
        """Pack a full square matrix; asymmetry above `atol` is an error."""
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
        if asym > atol:
            raise ValueError(f"matrix asymmetry {asym:.3e} exceeds atol={atol:.3e}")
        d = a.shape[0]
        iu, ju = _triu_indices(d)
        return cls(d, a[iu, ju])

    def to_full(self) -> np.ndarray:
        d = self.dim
        iu, ju = _triu_indices(d)
        full = np.zeros((d, d))
        full[iu, ju] = self.packed
        full[ju, iu] = self.packed
        return full

    def entry(self, j: int, k: int) -> float:
        """Logical entry at 1-based position (j, k)."""
        if not (1 <= j <= self.dim and 1 <= k <= self.dim):
            raise IndexError(f"position ({j},{k}) out of range for dim={self.dim}")
        if j > k:
            j, k = k, j
        return float(self.packed[_packed_offset(self.dim, j, k)])

    def scale(self, t: float) -> "SymMatrix":
        return SymMatrix(self.dim, self.packed * t)


@dataclass(frozen=True, eq=False)
class OrthogonalMatrix:
    """Element of O(d); orthogonality is validated at construction."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (self.dim, self.dim):
            raise ValueError(f"expected shape {(self.dim, self.dim)}, got {m.shape}")
        err = float(np.max(np.abs(m.T @ m - np.eye(self.dim))))
        if err > ORTHOGONALITY_TOL:
            raise ValueError(
                f"matrix is not orthogonal: max|O^T O - I| = {err:.3e} "
                f"> {ORTHOGONALITY_TOL:.1e}"
            )
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, d: int) -> "OrthogonalMatrix":
        return cls(d, np.eye(d))

    @classmethod
    def transposition(cls, d: int, i: int, j: int) -> "OrthogonalMatrix":
        """Permutation matrix swapping 1-based coordinates i and j."""
        if not (1 <= i <= d and 1 <= j <= d and i != j):
            raise ValueError(f"invalid transposition ({i},{j}) for dim={d}")
        m = np.eye(d)
        m[[i - 1, j - 1]] = m[[j - 1, i - 1]]
        return cls(d, m)

    def transpose(self) -> "OrthogonalMatrix":
        return OrthogonalMatrix(self.dim, self.matrix.T.copy())


@dataclass(frozen=True)
class Rot2State:
    """Entries (a, b, d) of a symmetric 2x2 matrix plus a rotation angle."""

    a: float
    b: float
    d: float
    theta: float


def trace_pairing(a: SymMatrix, b: SymMatrix) -> float:
    """Tr(A^T B) via the diagonal-plus-twice-off-diagonal expansion.

    The elementwise products are formed before the off-diagonal doubling
    (an exact scaling by 2), so the result is bitwise symmetric in its
    arguments.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return float(np.sum((a.packed * b.packed) * pairing_weights(a.dim)))


def probe_offdiag(d: int, k: int, j: int, t: float) -> SymMatrix:
    """Matrix with value t at 1-based positions (k, j) and (j, k), else 0."""
    if not (1 <= k < j <= d):
        raise ValueError(f"need 1 <= k < j <= d, got k={k}, j={j}, d={d}")
    p = np.zeros(packed_size(d))
    p[_packed_offset(d, k, j)] = t
    return SymMatrix(d, p)


def probe_diag(d: int, j: int, t: float) -> SymMatrix:
    """Matrix with single nonzero entry t at 1-based position (j, j)."""
    if not (1 <= j <= d):
        raise ValueError(f"need 1 <= j <= d, got j={j}, d={d}")
    p = np.zeros(packed_size(d))
    p[_packed_offset(d, j, j)] = t
    return SymMatrix(d, p)


def embed2(m2: SymMatrix, d: int) -> SymMatrix:
    """Embed a 2x2 symmetric matrix as the top-left block of a d x d zero matrix."""
    if m2.dim != 2:
        raise ValueError(f"embed2 needs a 2x2 matrix, got dim={m2.dim}")
    if d < 2:
        raise ValueError(f"need d >= 2, got {d}")
    p = np.zeros(packed_size(d))
    p[_packed_offset(d, 1, 1)] = m2.packed[0]
    p[_packed_offset(d, 1, 2)] = m2.packed[1]
    p[_packed_offset(d, 2, 2)] = m2.packed[2]
    return SymMatrix(d, p)


def rotation_embed(theta: float, d: int) -> OrthogonalMatrix:
    """Rotation of the first two coordinates, identity on the rest."""
    if d < 2:
        raise ValueError(f"need d >= 2, got {d}")
    c, s = math.cos(theta), math.sin(theta)
    m = np.eye(d)
    m[0, 0] = c
    m[0, 1] = -s
    m[1, 0] = s
    m[1, 1] = c
    return OrthogonalMatrix(d, m)


def conjugate(o: OrthogonalMatrix, x: SymMatrix) -> SymMatrix:
    """O X O^T, re-symmetrized by averaging with its transpose.

    Floating-point conjugation is not exactly symmetric; the asymmetry is
    asserted to stay below CONJUGATION_ASYMMETRY_TOL before averaging.
    """
    if o.dim != x.dim:
        raise ValueError(f"dimension mismatch: {o.dim} vs {x.dim}")
    m = o.matrix @ x.to_full() @ o.matrix.T
    asym = float(np.max(np.abs(m - m.T)))
    if asym > CONJUGATION_ASYMMETRY_TOL:
        raise ValueError(f"conjugation asymmetry {asym:.3e} exceeds tolerance")
    return SymMatrix.from_full((m + m.T) / 2.0)


def rotate2_closed_form(s: Rot2State) -> tuple[float, float, float]:
    """Closed-form entries (A, B, D) of the rotated 2x2 symmetric matrix.

    Matches conjugation by ``rotation_embed(theta, 2)``.  theta == 0.0
    returns (a, b, d) unchanged so that a zero rotation is exact.
    """
    a, b, d, theta = s.a, s.b, s.d, s.theta
    if theta == 0.0:
        return (a, b, d)
    c2 = math.cos(2.0 * theta)
    s2 = math.sin(2.0 * theta)
    half_sum = (a + d) / 2.0
    half_diff = (a - d) / 2.0
    big_a = half_sum + half_diff * c2 - b * s2
    big_b = half_diff * s2 + b * c2
    big_d = half_sum - half_diff * c2 + b * s2
    return (big_a, big_b, big_d)


def rotate2_derivatives(a: float, b: float, d: float) -> tuple[float, float, float]:
    """Angle derivatives (dA, dB, dD) = (-2B, A - D, 2B) of the rotated entries."""
    return (-2.0 * b, a - d, 2.0 * b)


# ---------------------------------------------------------------------------
# Deterministic identity suite
# ---------------------------------------------------------------------------

DEFAULT_FD_STEP = 1e-4
THETA_GRID_POINTS = 32


def _theta_grid() -> np.ndarray:
    return np.arange(THETA_GRID_POINTS) * (2.0 * np.pi / THETA_GRID_POINTS)


def _check_closed_form_vs_conjugation(rng: np.random.Generator, trials: int) -> float:
    worst = 0.0
    for _ in range(trials):
        a, b, d = rng.uniform(-2.0, 2.0, size=3)
        theta = rng.uniform(0.0, 2.0 * np.pi)
        big_a, big_b, big_d = rotate2_closed_form(Rot2State(a, b, d, theta))
        m = SymMatrix(2, np.array([a, b, d]))
        ref = conjugate(rotation_embed(theta, 2), m)
        worst = max(
            worst,
            abs(big_a - ref.packed[0]),
            abs(big_b - ref.packed[1]),
            abs(big_d - ref.packed[2]),
        )
    return worst


def _check_derivatives_fd(rng: np.random.Generator, sets: int, h: float) -> float:
    worst = 0.0
    for _ in range(sets):
        a, b, d = rng.uniform(-2.0, 2.0, size=3)
        for theta in _theta_grid():
            big = rotate2_closed_form(Rot2State(a, b, d, theta))
            da, db, dd = rotate2_derivatives(*big)
            plus = rotate2_closed_form(Rot2State(a, b, d, theta + h))
            minus = rotate2_closed_form(Rot2State(a, b, d, theta - h))
            for exact, (p, m) in zip((da, db, dd), zip(plus, minus)):
                worst = max(worst, abs((p - m) / (2.0 * h) - exact))
    return worst


def _check_trace_pairing(rng: np.random.Generator, trials: int) -> float:
    worst = 0.0
    for _ in range(trials):
        d = int(rng.integers(1, 7))
        a = SymMatrix.from_full(_random_sym_full(rng, d))
        b = SymMatrix.from_full(_random_sym_full(rng, d))
        direct = float(np.trace(a.to_full() @ b.to_full()))
        worst = max(worst, abs(trace_pairing(a, b) - direct))
    return worst


def _check_trace_det_preservation(rng: np.random.Generator, trials: int) -> float:
    worst = 0.0
    for _ in range(trials):
        a, b, d = rng.uniform(-2.0, 2.0, size=3)
        theta = rng.uniform(0.0, 2.0 * np.pi)
        big_a, big_b, big_d = rotate2_closed_form(Rot2State(a, b, d, theta))
        worst = max(worst, abs((big_a + big_d) - (a + d)))
        worst = max(worst, abs((big_a * big_d - big_b**2) - (a * d - b**2)))
    return worst


def _check_rotation_composition(rng: np.random.Generator, trials: int) -> float:
    worst = 0.0
    for _ in range(trials):
        a, b, d = rng.uniform(-2.0, 2.0, size=3)
        t1, t2 = rng.uniform(0.0, 2.0 * np.pi, size=2)
        step1 = rotate2_closed_form(Rot2State(a, b, d, t1))
        step2 = rotate2_closed_form(Rot2State(*step1, t2))
        joint = rotate2_closed_form(Rot2State(a, b, d, t1 + t2))
        worst = max(worst, max(abs(x - y) for x, y in zip(step2, joint)))
    return worst


def _random_sym_full(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.uniform(-2.0, 2.0, size=(d, d))
    return (z + z.T) / 2.0


def run_identity_suite(fd_step: float = DEFAULT_FD_STEP, seed: int = 0) -> list[dict]:
    """Run all closed-form identity checks; returns per-check records.

    Each record carries the measured max residual, the pinned tolerance,
    and a pass flag.  Deterministic for a fixed seed.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    checks = [
        ("closed_form_vs_conjugation", _check_closed_form_vs_conjugation(rng, 100), 1e-12),
        ("derivatives_vs_central_differences", _check_derivatives_fd(rng, 20, fd_step), 1e-6),
        ("trace_pairing_vs_direct_product", _check_trace_pairing(rng, 100), 1e-12),
        ("trace_det_preservation", _check_trace_det_preservation(rng, 100), 1e-12),
        ("rotation_composition", _check_rotation_composition(rng, 100), 1e-12),
    ]
    return [
        {"name": name, "max_residual": float(res), "tolerance": tol, "passed": bool(res <= tol)}
        for name, res, tol in checks
    ]
