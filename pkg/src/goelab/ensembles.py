"""Seeded samplers for the matrix ensembles used in the experiments.

Randomness comes from numpy's counter-based Philox generator keyed by a
(seed, stream) pair, so every sampler is a pure function of its SeedSpec:
identical (seed, stream) reproduce identical output bit-for-bit on one
build.  Batches drawn from distinct streams are independent and may be
generated in parallel.  Normal variates use numpy's ziggurat transform;
that choice is load-bearing for seed-pinned regression baselines and is
fixed here once.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from goelab.symmetric import (
    OrthogonalMatrix,
    SymMatrix,
    _triu_indices,
    packed_size,
)

_MASK64 = (1 << 64) - 1

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
SQRT6 = math.sqrt(6.0)


def _splitmix64(x: int) -> int:
    """One splitmix64 step; standard 64-bit mixing for stream derivation."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass(frozen=True)
class SeedSpec:
    """Seed plus substream index for reproducible, splittable randomness."""

    seed: int = 0
    stream: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        object.__setattr__(self, "stream", int(self.stream) & _MASK64)

    def generator(self) -> np.random.Generator:
        # 128-bit Philox key: one key per (seed, stream) pair.
        key = (self.stream << 64) | self.seed
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, index: int) -> "SeedSpec":
        return SeedSpec(self.seed, (self.stream + int(index)) & _MASK64)

    def child(self, *indices: int) -> "SeedSpec":
        """Derive a disjoint stream by hashing indices into the stream id."""
        s = self.stream
        for i in indices:
            s = _splitmix64(s ^ _splitmix64(int(i) & _MASK64))
        return SeedSpec(self.seed, s)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "stream": self.stream}


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """A batch of symmetric matrices as packed upper-triangle rows."""

    dim: int
    packed: np.ndarray  # shape (n, d(d+1)/2)

    def __post_init__(self) -> None:
        p = np.asarray(self.packed, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != packed_size(self.dim):
            raise ValueError(
                f"packed batch for dim={self.dim} needs "
                f"{packed_size(self.dim)} columns, got shape {p.shape}"
            )
        object.__setattr__(self, "packed", p)

    @property
    def n(self) -> int:
        return self.packed.shape[0]

    @classmethod
    def from_matrices(cls, mats: Sequence[SymMatrix]) -> "SampleBatch":
        if not mats:
            raise ValueError("empty sample list")
        d = mats[0].dim
        if any(m.dim != d for m in mats):
            raise ValueError("mixed dimensions in sample list")
        return cls(d, np.vstack([m.packed for m in mats]))

    def matrices(self) -> list[SymMatrix]:
        return [SymMatrix(self.dim, row) for row in self.packed]

    def entry(self, j: int, k: int) -> np.ndarray:
        """Column of logical entries at 1-based position (j, k)."""
        if j > k:
            j, k = k, j
        if not (1 <= j and k <= self.dim):
            raise IndexError(f"position ({j},{k}) out of range for dim={self.dim}")
        i, l = j - 1, k - 1
        off = i * self.dim - i * (i - 1) // 2 + (l - i)
        return self.packed[:, off]

    def halves(self) -> tuple["SampleBatch", "SampleBatch"]:
        h = self.n // 2
        return (SampleBatch(self.dim, self.packed[:h]), SampleBatch(self.dim, self.packed[h:]))

    def take(self, n: int) -> "SampleBatch":
        if n > self.n:
            raise ValueError(f"requested {n} samples from a batch of {self.n}")
        return SampleBatch(self.dim, self.packed[:n])


def as_batch(samples: "SampleBatch | Sequence[SymMatrix]") -> SampleBatch:
    if isinstance(samples, SampleBatch):
        return samples
    return SampleBatch.from_matrices(list(samples))


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


def sample_gaussian_full(d: int, rng: np.random.Generator) -> np.ndarray:
    """Full d x d matrix of independent standard normals."""
    return rng.standard_normal((d, d))


def goe_batch(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """n packed GOE matrices: (Z + Z^T)/sqrt(2) with Z iid standard normal."""
    z = rng.standard_normal((n, d, d))
    iu, ju = _triu_indices(d)
    # upper triangle of (Z + Z^T)/sqrt(2), assembled without the full matrix
    return (z[:, iu, ju] + z[:, ju, iu]) / SQRT2


def sample_goe(d: int, rng: np.random.Generator) -> SymMatrix:
    return SymMatrix(d, goe_batch(d, 1, rng)[0])


def affine_goe_batch(
    d: int, mu: float, s: float, n: int, rng: np.random.Generator
) -> np.ndarray:
    """n packed draws of mu*I + s*Y with Y from the GOE sampler."""
    if s < 0:
        raise ValueError(f"scale must be nonnegative, got {s}")
    out = s * goe_batch(d, n, rng)
    if mu != 0.0:
        iu, ju = _triu_indices(d)
        out[:, iu == ju] += mu
    return out


def sample_affine_goe(d: int, mu: float, s: float, rng: np.random.Generator) -> SymMatrix:
    return SymMatrix(d, affine_goe_batch(d, mu, s, 1, rng)[0])


def haar_orthogonal_batch(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """n Haar-distributed orthogonal matrices via sign-corrected QR.

    Column i of Q is multiplied by sign(R_ii), with sign(0) taken as +1;
    this makes QR of a Gaussian matrix exactly Haar.
    """
    z = rng.standard_normal((n, d, d))
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    signs = np.where(diag < 0.0, -1.0, 1.0)
    return q * signs[:, None, :]


def sample_haar_orthogonal(d: int, rng: np.random.Generator) -> OrthogonalMatrix:
    return OrthogonalMatrix(d, haar_orthogonal_batch(d, 1, rng)[0])


def uniform_sym_batch(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Independent-entry uniform control, moment-matched to the GOE.

    Off-diagonal entries are U(-sqrt(3), sqrt(3)) (variance 1), diagonal
    entries U(-sqrt(6), sqrt(6)) (variance 2), so any invariance failure
    is attributable to distribution shape rather than scale.
    """
    m = packed_size(d)
    u = rng.uniform(-1.0, 1.0, size=(n, m))
    iu, ju = _triu_indices(d)
    scale = np.where(iu == ju, SQRT6, SQRT3)
    return u * scale


def sample_uniform_sym(d: int, rng: np.random.Generator) -> SymMatrix:
    return SymMatrix(d, uniform_sym_batch(d, 1, rng)[0])


def symmetrized_haar_batch(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """(O + O^T)/2 for Haar orthogonal O: invariant in law, dependent entries."""
    if d < 2:
        raise ValueError(f"symmetrized Haar needs d >= 2, got {d}")
    o = haar_orthogonal_batch(d, n, rng)
    x = (o + o.transpose(0, 2, 1)) / 2.0
    iu, ju = _triu_indices(d)
    return np.ascontiguousarray(x[:, iu, ju])


def sample_symmetrized_haar(d: int, rng: np.random.Generator) -> SymMatrix:
    return SymMatrix(d, symmetrized_haar_batch(d, 1, rng)[0])


# ---------------------------------------------------------------------------
# Declarative ensemble specification
# ---------------------------------------------------------------------------

KINDS = ("goe", "affine-goe", "uniform-sym", "sym-haar")


@dataclass(frozen=True)
class EnsembleSpec:
    """Declarative description of a samplable symmetric-matrix distribution."""

    kind: str
    dim: int
    mu: float = 0.0
    scale: float = 1.0  # multiplies a GOE draw; off-diag variance is scale**2

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}; expected one of {KINDS}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.kind == "sym-haar" and self.dim < 2:
            raise ValueError("sym-haar requires dim >= 2")
        if self.scale < 0:
            raise ValueError(f"scale must be nonnegative, got {self.scale}")

    def sample(self, n: int, seed: SeedSpec) -> SampleBatch:
        rng = seed.generator()
        if self.kind == "goe":
            packed = goe_batch(self.dim, n, rng)
        elif self.kind == "affine-goe":
            packed = affine_goe_batch(self.dim, self.mu, self.scale, n, rng)
        elif self.kind == "uniform-sym":
            packed = uniform_sym_batch(self.dim, n, rng)
        else:
            packed = symmetrized_haar_batch(self.dim, n, rng)
        return SampleBatch(self.dim, packed)

    def label(self) -> str:
        if self.kind == "affine-goe":
            return f"affine-goe(mu={self.mu:g}, scale2={self.scale**2:g})"
        return self.kind

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim}
        if self.kind == "affine-goe":
            out["mu"] = self.mu
            out["scale2"] = self.scale**2
        return out


# ---------------------------------------------------------------------------
# Sample CSV interface
# ---------------------------------------------------------------------------


class SampleCsvError(ValueError):
    """Malformed sample CSV; carries the offending 1-based row number."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")


def _csv_header(d: int) -> list[str]:
    iu, ju = _triu_indices(d)
    return [f"x_{i + 1}_{j + 1}" for i, j in zip(iu, ju)]


def save_samples_csv(path_or_file, batch: SampleBatch) -> None:
    """One row per matrix, upper triangle row-major, 17 significant digits."""
    own = isinstance(path_or_file, (str, bytes))
    f = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        f.write(",".join(_csv_header(batch.dim)) + "\n")
        np.savetxt(f, batch.packed, fmt="%.17g", delimiter=",")
    finally:
        if own:
            f.close()


def _dim_from_columns(m: int) -> int:
    d = int((math.isqrt(8 * m + 1) - 1) // 2)
    if packed_size(d) != m:
        raise SampleCsvError(
            f"{m} columns is not an upper-triangle count d(d+1)/2 for any d"
        )
    return d


def load_samples_csv(path_or_file) -> SampleBatch:
    """Read a sample CSV; malformed content reports its 1-based data row."""
    own = isinstance(path_or_file, (str, bytes))
    f = open(path_or_file, "r", newline="") if own else path_or_file
    try:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise SampleCsvError("empty file") from None
        d = _dim_from_columns(len(header))
        if header != _csv_header(d):
            raise SampleCsvError(
                f"header does not name upper-triangle positions for dim={d}"
            )
        m = len(header)
        rows = []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != m:
                raise SampleCsvError(f"expected {m} fields, found {len(row)}", row=i)
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise SampleCsvError(str(exc), row=i) from None
        if not rows:
            raise SampleCsvError("no data rows")
        return SampleBatch(d, np.asarray(rows, dtype=np.float64))
    finally:
        if own:
            f.close()


def samples_csv_text(batch: SampleBatch) -> str:
    buf = io.StringIO()
    save_samples_csv(buf, batch)
    return buf.getvalue()
