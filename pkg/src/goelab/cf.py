"""Empirical and theoretical characteristic functions.

Empirical CFs (ECFs) are sample means of exp(i t X) over a symmetric
t-grid, with a distribution-free uniform confidence radius
``sqrt(2 ln(4G/delta) / n)`` (Hoeffding plus a union bound over the G
grid points and the real/imaginary components).

Floating-point determinism contract: samples are split into consecutive
blocks of 4096; within a block, sums are taken by numpy's pairwise
reduction; block sums are then combined by a fixed halving tree.  Any
partition of the sample stream at block boundaries therefore reproduces
the sequential result bit-for-bit, independent of thread count.

On equispaced grids the per-point phases exp(i t_g x) are produced by a
complex-power recurrence re-anchored to libm trig every 16 steps; drift
is below 5e-15 in modulus, orders of magnitude under every statistical
tolerance.  Non-equispaced grids evaluate trig directly per point.

The ECF values at negative t are mirrored from positive t (conjugate
symmetry of CFs of real samples holds exactly by construction), and the
value at t = 0 is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from goelab.ensembles import SampleBatch, as_batch
from goelab.symmetric import SymMatrix, pairing_weights

BLOCK = 4096
_ANCHOR_STRIDE = 16
MODULUS_GATE = 0.2

DEFAULT_T_MAX = 4.0
DEFAULT_GRID_POINTS = 41


class UnreliableRegionError(ValueError):
    """The ECF is too small or too close to the grid edge for a reliable
    log-derivative estimate; the caller should shrink |t|."""


def hoeffding_radius(n: int, grid_size: int, delta: float) -> float:
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    return math.sqrt(2.0 * math.log(4.0 * grid_size / delta) / n)


@dataclass(frozen=True, eq=False)
class TGrid:
    """Strictly increasing symmetric grid of frequencies containing 0."""

    points: np.ndarray
    spacing: float | None = None

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 1 or pts.size < 1:
            raise ValueError("grid must be a nonempty 1-d array")
        if pts.size > 1 and not np.all(np.diff(pts) > 0):
            raise ValueError("grid points must be strictly increasing")
        if not np.array_equal(pts[::-1], -pts):
            raise ValueError("grid must be symmetric about 0")
        if pts[pts.size // 2] != 0.0:
            raise ValueError("grid must contain 0")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "spacing", self._detect_spacing(pts))

    @staticmethod
    def _detect_spacing(pts: np.ndarray) -> float | None:
        if pts.size < 3:
            return None
        h = float(pts[-1] - pts[-2])
        k0 = pts.size // 2
        for g in range(1, pts.size - k0):
            if abs(pts[k0 + g] - g * h) > 1e-9 * max(1.0, abs(pts[k0 + g])):
                return None
        return h

    @classmethod
    def symmetric(cls, t_max: float = DEFAULT_T_MAX, n_points: int = DEFAULT_GRID_POINTS) -> "TGrid":
        """Equispaced symmetric grid; n_points must be odd so 0 is included."""
        if n_points < 1 or n_points % 2 == 0:
            raise ValueError(f"n_points must be odd and >= 1, got {n_points}")
        if n_points == 1:
            return cls(np.zeros(1))
        k = (n_points - 1) // 2
        if t_max <= 0:
            raise ValueError(f"t_max must be positive, got {t_max}")
        pos = t_max * np.arange(k + 1) / k
        return cls(np.concatenate([-pos[:0:-1], pos]))

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def zero_index(self) -> int:
        return self.points.size // 2

    @property
    def pos_half(self) -> np.ndarray:
        return self.points[self.zero_index :]

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        idx = int(np.searchsorted(self.points, t))
        best, err = -1, math.inf
        for i in (idx - 1, idx, idx + 1):
            if 0 <= i < self.size and abs(self.points[i] - t) < err:
                best, err = i, abs(self.points[i] - t)
        if best < 0 or err > tol * max(1.0, abs(t)):
            raise ValueError(f"t={t!r} is not a grid point")
        return best

    def same_as(self, other: "TGrid") -> bool:
        return np.array_equal(self.points, other.points)

    def to_dict(self) -> dict:
        return {
            "t_max": float(self.points[-1]),
            "points": int(self.size),
            "equispaced": self.spacing is not None,
        }


# ---------------------------------------------------------------------------
# Deterministic accumulation kernel
# ---------------------------------------------------------------------------


def _phase_matrix(x: np.ndarray, t: float) -> np.ndarray:
    th = t * x
    w = np.empty(th.shape, dtype=np.complex128)
    np.cos(th, out=w.real)
    np.sin(th, out=w.imag)
    return w


def _pos_block_sums(values: np.ndarray, pos: np.ndarray, spacing: float | None) -> np.ndarray:
    """Per-block sums of exp(i t x) at the nonnegative grid points.

    values: (n, C) float64, pos: (Gpos,) with pos[0] == 0.
    Returns complex sums, shape (n_blocks, Gpos, C).

    Work arrays are laid out (C, block) so every sum reduces over the last,
    contiguous axis: the summation order is then identical for every column
    count, keeping single-column and multi-column paths bitwise equal.
    """
    n, ncols = values.shape
    vt = values.T  # (C, n); strides only feed elementwise ufuncs
    gpos = pos.size
    n_blocks = max(1, -(-n // BLOCK))
    sums = np.empty((n_blocks, gpos, ncols), dtype=np.complex128)
    use_recurrence = spacing is not None and gpos >= 2
    for bi in range(n_blocks):
        x = vt[:, bi * BLOCK : (bi + 1) * BLOCK]
        sums[bi, 0, :] = complex(x.shape[1])  # terms at t=0 are exactly 1
        if gpos == 1:
            continue
        if use_recurrence:
            w = _phase_matrix(x, spacing)
            z = w.copy()
            sums[bi, 1, :] = z.sum(axis=1)
            for g in range(2, gpos):
                if g % _ANCHOR_STRIDE == 0:
                    z = _phase_matrix(x, float(pos[g]))
                else:
                    np.multiply(z, w, out=z)
                sums[bi, g, :] = z.sum(axis=1)
        else:
            for g in range(1, gpos):
                sums[bi, g, :] = _phase_matrix(x, float(pos[g])).sum(axis=1)
    return sums


def _tree_reduce(blocks: np.ndarray) -> np.ndarray:
    """Halving-tree reduction over axis 0; odd trailing element carries up."""
    a = blocks
    while a.shape[0] > 1:
        nb = a.shape[0]
        s = a[0 : nb - 1 : 2] + a[1:nb:2]
        if nb % 2:
            s = np.concatenate([s, a[nb - 1 : nb]], axis=0)
        a = s
    return a[0]


def _point_block_sums(values: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Direct-evaluation block sums at arbitrary points; values 1-d."""
    n = values.shape[0]
    n_blocks = max(1, -(-n // BLOCK))
    sums = np.empty((n_blocks, pts.size), dtype=np.complex128)
    for bi in range(n_blocks):
        x = values[bi * BLOCK : (bi + 1) * BLOCK]
        th = np.multiply.outer(pts, x)  # (P, block): reduce the contiguous axis
        w = np.empty(th.shape, dtype=np.complex128)
        np.cos(th, out=w.real)
        np.sin(th, out=w.imag)
        sums[bi] = w.sum(axis=1)
    return sums


# ---------------------------------------------------------------------------
# Estimates
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ECFEstimate:
    """ECF values on a grid with a uniform confidence radius at level 1-delta."""

    grid: TGrid
    re: np.ndarray
    im: np.ndarray
    n: int
    radius: float
    delta: float

    def __post_init__(self) -> None:
        re = np.asarray(self.re, dtype=np.float64)
        im = np.asarray(self.im, dtype=np.float64)
        if re.shape != (self.grid.size,) or im.shape != (self.grid.size,):
            raise ValueError("re/im shapes do not match the grid")
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    def values(self) -> np.ndarray:
        return self.re + 1j * self.im

    def modulus(self) -> np.ndarray:
        return np.abs(self.values())

    def at(self, t: float) -> complex:
        i = self.grid.index_of(t)
        return complex(self.re[i], self.im[i])

    def merge(self, other: "ECFEstimate") -> "ECFEstimate":
        """Pooled estimate: count-weighted mean of the two estimates."""
        if not self.grid.same_as(other.grid):
            raise ValueError("cannot merge estimates on different grids")
        if self.delta != other.delta:
            raise ValueError("cannot merge estimates with different delta")
        if self.n <= 0 or other.n <= 0:
            raise ValueError("merge requires empirical estimates (n > 0)")
        n = self.n + other.n
        re = (self.n * self.re + other.n * other.re) / n
        im = (self.n * self.im + other.n * other.im) / n
        return ECFEstimate(self.grid, re, im, n, hoeffding_radius(n, self.grid.size, self.delta), self.delta)

    @classmethod
    def from_cf(
        cls,
        fn: Callable[[np.ndarray], np.ndarray],
        grid: TGrid,
        delta: float = 0.01,
        radius: float = 0.0,
    ) -> "ECFEstimate":
        """Wrap a closed-form CF as an exact estimate (n = 0).

        A nonzero radius models non-statistical slack, e.g. first-order
        parameter uncertainty when the CF was fitted from data.
        """
        v = np.asarray(fn(grid.points), dtype=np.complex128)
        return cls(grid, v.real.copy(), v.imag.copy(), 0, float(radius), delta)

    def csv_text(self) -> str:
        lines = ["t,re,im,radius,n"]
        for t, r, i in zip(self.grid.points, self.re, self.im):
            lines.append(f"{t:.17g},{r:.17g},{i:.17g},{self.radius:.17g},{self.n}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "t": self.grid.points.tolist(),
            "re": self.re.tolist(),
            "im": self.im.tolist(),
            "n": self.n,
            "radius": self.radius,
            "delta": self.delta,
        }


class ECFAccumulator:
    """Mergeable ECF accumulator over the fixed block/tree summation scheme.

    Feeds must respect the global block structure: once an update leaves a
    partial trailing block the stream is closed.  Merging concatenates
    block sums, so parallel accumulation over block-aligned chunks is
    bitwise identical to sequential accumulation.
    """

    def __init__(self, grid: TGrid, delta: float = 0.01):
        self.grid = grid
        self.delta = delta
        self._blocks: list[np.ndarray] = []
        self._n = 0
        self._closed = False

    @property
    def n(self) -> int:
        return self._n

    def update(self, samples: np.ndarray) -> "ECFAccumulator":
        x = np.asarray(samples, dtype=np.float64).reshape(-1)
        if x.size == 0:
            return self
        if self._closed:
            raise ValueError("accumulator already ends in a partial block")
        sums = _pos_block_sums(x[:, None], self.grid.pos_half, self.grid.spacing)
        self._blocks.extend(sums[:, :, 0])
        self._n += x.size
        if x.size % BLOCK:
            self._closed = True
        return self

    def merge(self, other: "ECFAccumulator") -> "ECFAccumulator":
        if not self.grid.same_as(other.grid) or self.delta != other.delta:
            raise ValueError("accumulator configs differ")
        if self._closed and other._n > 0:
            raise ValueError("left accumulator ends in a partial block")
        out = ECFAccumulator(self.grid, self.delta)
        out._blocks = self._blocks + other._blocks
        out._n = self._n + other._n
        out._closed = other._closed
        return out

    def estimate(self) -> ECFEstimate:
        if self._n < 1:
            raise ValueError("no samples accumulated")
        total = _tree_reduce(np.asarray(self._blocks))
        return _estimate_from_pos(total, self._n, self.grid, self.delta)


def _estimate_from_pos(total: np.ndarray, n: int, grid: TGrid, delta: float) -> ECFEstimate:
    re_pos = total.real / n
    im_pos = total.imag / n
    k0 = grid.zero_index
    re = np.concatenate([re_pos[:0:-1], re_pos]) if k0 else re_pos
    im = np.concatenate([-im_pos[:0:-1], im_pos]) if k0 else im_pos
    return ECFEstimate(grid, re, im, n, hoeffding_radius(n, grid.size, delta), delta)


# ---------------------------------------------------------------------------
# Public estimation API
# ---------------------------------------------------------------------------


def ecf_scalar(samples, grid: TGrid, delta: float = 0.01) -> ECFEstimate:
    """ECF of a scalar sample on the grid."""
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.size < 2:
        raise ValueError(f"need at least 2 samples, got {x.size}")
    return ecf_columns(x[:, None], grid, delta)[0]


def ecf_columns(values: np.ndarray, grid: TGrid, delta: float = 0.01) -> list[ECFEstimate]:
    """ECFs of each column of (n, C) sample values, one kernel pass."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] < 1:
        raise ValueError("values must be a nonempty (n, C) array")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    sums = _pos_block_sums(values, grid.pos_half, grid.spacing)
    total = _tree_reduce(sums)  # (Gpos, C)
    n = values.shape[0]
    return [_estimate_from_pos(total[:, c], n, grid, delta) for c in range(values.shape[1])]


def trace_projections(samples, probes: Sequence[SymMatrix]) -> np.ndarray:
    """Per-sample trace pairings with each probe as columns of (n, P)."""
    batch = as_batch(samples)
    if any(p.dim != batch.dim for p in probes):
        raise ValueError("probe dimension does not match the samples")
    w = pairing_weights(batch.dim)
    cols = np.stack([p.packed * w for p in probes], axis=1)
    return batch.packed @ cols


def ecf_trace(samples, probe: SymMatrix, grid: TGrid, delta: float = 0.01) -> ECFEstimate:
    """ECF of t -> E exp(i t Tr(probe^T X)), i.e. the matrix CF along a probe ray."""
    batch = as_batch(samples)
    if batch.n < 2:
        raise ValueError(f"need at least 2 samples, got {batch.n}")
    return ecf_columns(trace_projections(batch, [probe]), grid, delta)[0]


def evaluate_ecf_points(samples, points, delta: float = 0.01) -> tuple[np.ndarray, float]:
    """ECF values of a scalar sample at arbitrary points, plus their radius."""
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    pts = np.asarray(points, dtype=np.float64).reshape(-1)
    if x.size < 2:
        raise ValueError(f"need at least 2 samples, got {x.size}")
    total = _tree_reduce(_point_block_sums(x, pts))
    return total / x.size, hoeffding_radius(x.size, pts.size, delta)


# ---------------------------------------------------------------------------
# Closed forms and comparisons
# ---------------------------------------------------------------------------


def normal_cf(mu: float, sigma2: float, t):
    """CF of N(mu, sigma2): exp(i mu t - sigma2 t^2 / 2)."""
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be nonnegative, got {sigma2}")
    t = np.asarray(t, dtype=np.float64)
    out = np.exp(1j * mu * t - 0.5 * sigma2 * t * t)
    return complex(out) if out.ndim == 0 else out


def uniform_cf(half_width: float, t):
    """CF of U(-half_width, half_width): sin(a t)/(a t), exact 1 at t = 0."""
    if half_width < 0:
        raise ValueError(f"half_width must be nonnegative, got {half_width}")
    t = np.asarray(t, dtype=np.float64)
    out = np.sinc(half_width * t / np.pi).astype(np.complex128)
    return complex(out) if out.ndim == 0 else out


def product_form_cf(diag_cf: Callable, offdiag_cf: Callable, m: SymMatrix) -> complex:
    """CF of an independent-entry symmetric matrix evaluated at M.

    The trace expansion splits the matrix CF into a product of scalar
    factors: diag_cf at each diagonal entry and offdiag_cf at twice each
    off-diagonal entry.
    """
    out = complex(1.0)
    d = m.dim
    for j in range(1, d + 1):
        out *= complex(diag_cf(m.entry(j, j)))
        for k in range(j + 1, d + 1):
            out *= complex(offdiag_cf(2.0 * m.entry(j, k)))
    return out


def product_form_curve(
    diag_cf: Callable, offdiag_cf: Callable, probe: SymMatrix, grid: TGrid
) -> np.ndarray:
    """product_form_cf along the ray t * probe, vectorized over the grid."""
    t = grid.points
    out = np.ones(t.size, dtype=np.complex128)
    d = probe.dim
    for j in range(1, d + 1):
        out *= diag_cf(t * probe.entry(j, j))
        for k in range(j + 1, d + 1):
            out *= offdiag_cf(2.0 * t * probe.entry(j, k))
    return out


class CfDistance(NamedTuple):
    sup_dist: float
    threshold: float
    passed: bool
    t_at_max: float

    def to_dict(self) -> dict:
        return {
            "sup_dist": self.sup_dist,
            "threshold": self.threshold,
            "pass": self.passed,
            "t_at_max": self.t_at_max,
        }


def cf_distance(e1: ECFEstimate, e2: ECFEstimate) -> CfDistance:
    """Sup-norm distance between two estimates vs. their combined radius."""
    if not e1.grid.same_as(e2.grid):
        raise ValueError("estimates live on different grids")
    diff = np.abs(e1.values() - e2.values())
    i = int(np.argmax(diff))
    sup = float(diff[i])
    threshold = e1.radius + e2.radius
    return CfDistance(sup, threshold, sup <= threshold, float(e1.grid.points[i]))


def log_cf_derivative_ratio(e: ECFEstimate, t: float, symmetric: bool = True) -> float:
    """Estimate (1/t) phi'(2t) / phi(2t) by central differences on the grid.

    Reliable only where the estimated CF is well away from zero; the
    modulus gate and the grid-edge check raise UnreliableRegionError so
    the caller can shrink |t|.  For symmetric underlying variables the
    CF is real and only the real part is used.
    """
    if t == 0.0:
        raise ValueError("t must be nonzero")
    h = e.grid.spacing
    if h is None:
        raise ValueError("log-derivative estimation needs an equispaced grid")
    try:
        i = e.grid.index_of(2.0 * t)
    except ValueError:
        raise UnreliableRegionError(f"2t={2 * t!r} is not a grid point") from None
    if i - 1 < 0 or i + 1 >= e.grid.size:
        raise UnreliableRegionError(f"2t={2 * t!r} is too close to the grid edge")
    mods = np.abs(e.values()[[i - 1, i, i + 1]])
    if np.min(mods) < MODULUS_GATE:
        raise UnreliableRegionError(
            f"|ECF| = {np.min(mods):.3f} < {MODULUS_GATE} near 2t={2 * t!r}"
        )
    if symmetric:
        deriv = (e.re[i + 1] - e.re[i - 1]) / (2.0 * h)
        return float(deriv / e.re[i] / t)
    vals = e.values()
    deriv_c = (vals[i + 1] - vals[i - 1]) / (2.0 * h)
    return float((deriv_c / vals[i] / t).real)
