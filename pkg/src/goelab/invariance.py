"""Statistical tests for distributional equality under orthogonal conjugation.

The conjugation test compares, for probe M and orthogonal O, the ECF of
Tr(M^T X) with the ECF of Tr((O^T M O)^T X); by the cyclic-trace identity
the latter equals the CF of the conjugated matrix evaluated at M.  Each
(O, M) record makes two comparisons: one on a shared batch (zero variance
under exact invariance, maximal power) and one across independent batches
(unbiased even if a sampler correlates X with its conjugate).

delta is a per-record confidence parameter; reports carry the family-wise
union bound records * delta rather than adjusting thresholds further.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from goelab.cf import (
    CfDistance,
    ECFEstimate,
    TGrid,
    cf_distance,
    ecf_columns,
    ecf_scalar,
)
from goelab.ensembles import EnsembleSpec, SampleBatch, SeedSpec, as_batch
from goelab.symmetric import (
    OrthogonalMatrix,
    SymMatrix,
    conjugate,
    pairing_weights,
    probe_diag,
    probe_offdiag,
    rotation_embed,
)

INVARIANCE_GRID_POINTS = 21
ROTATION_ANGLES = (math.pi / 6, math.pi / 4, math.pi / 3, math.pi / 2)
ROTATION_LABELS = ("pi/6", "pi/4", "pi/3", "pi/2")
MIN_INVARIANCE_N = 10_000


def thread_count() -> int:
    """Parallelism degree: RMT_THREADS env var, 0 = auto, unset = serial."""
    raw = os.environ.get("RMT_THREADS", "").strip()
    if not raw:
        return 1
    k = int(raw)
    if k < 0:
        raise ValueError(f"RMT_THREADS must be >= 0, got {k}")
    return os.cpu_count() or 1 if k == 0 else k


class NamedProbe(NamedTuple):
    name: str
    matrix: SymMatrix


class NamedOrthogonal(NamedTuple):
    name: str
    matrix: OrthogonalMatrix


def default_probes(d: int, n_random: int = 5, seed: SeedSpec | None = None) -> list[NamedProbe]:
    """Unit off-diagonal and diagonal probes plus seeded random symmetric probes.

    The structured probes isolate single-entry CFs; the random ones test
    joint projections that no single entry determines.
    """
    probes = [
        NamedProbe(f"offdiag({k},{j})", probe_offdiag(d, k, j, 1.0))
        for k in range(1, d + 1)
        for j in range(k + 1, d + 1)
    ]
    probes += [NamedProbe(f"diag({j})", probe_diag(d, j, 1.0)) for j in range(1, d + 1)]
    if n_random > 0:
        rng = (seed or SeedSpec(0)).child(0x9B0BE5).generator()
        for i in range(n_random):
            z = rng.standard_normal((d, d))
            probes.append(NamedProbe(f"random[{i}]", SymMatrix.from_full((z + z.T) / 2.0)))
    return probes


def default_orthogonal_family(
    d: int, count: int = 10, seed: SeedSpec | None = None
) -> list[NamedOrthogonal]:
    """All transpositions, four fixed rotations, and `count` Haar draws."""
    if d < 2:
        raise ValueError(f"need d >= 2, got {d}")
    fam = [
        NamedOrthogonal(f"swap({i},{j})", OrthogonalMatrix.transposition(d, i, j))
        for i in range(1, d + 1)
        for j in range(i + 1, d + 1)
    ]
    fam += [
        NamedOrthogonal(f"rot({lbl})", rotation_embed(theta, d))
        for lbl, theta in zip(ROTATION_LABELS, ROTATION_ANGLES)
    ]
    if count > 0:
        from goelab.ensembles import haar_orthogonal_batch

        rng = (seed or SeedSpec(0)).child(0xA11CE).generator()
        for i, o in enumerate(haar_orthogonal_batch(d, count, rng)):
            fam.append(NamedOrthogonal(f"haar[{i}]", OrthogonalMatrix(d, o)))
    return fam


def _coerce_probes(probes: Sequence) -> list[NamedProbe]:
    out = []
    for i, p in enumerate(probes):
        if isinstance(p, NamedProbe):
            out.append(p)
        elif isinstance(p, SymMatrix):
            out.append(NamedProbe(f"probe[{i}]", p))
        else:
            out.append(NamedProbe(str(p[0]), p[1]))
    for name, m in out:
        if float(np.max(np.abs(m.packed))) == 0.0:
            raise ValueError(f"probe {name} is the zero matrix")
    return out


def _coerce_family(family: Sequence) -> list[NamedOrthogonal]:
    out = []
    for i, o in enumerate(family):
        if isinstance(o, NamedOrthogonal):
            out.append(o)
        elif isinstance(o, OrthogonalMatrix):
            out.append(NamedOrthogonal(f"orth[{i}]", o))
        else:
            out.append(NamedOrthogonal(str(o[0]), o[1]))
    return out


# ---------------------------------------------------------------------------
# Two-sample Kolmogorov-Smirnov
# ---------------------------------------------------------------------------


def kolmogorov_sf(lam: float) -> float:
    """Survival function of the Kolmogorov distribution, alternating series."""
    if lam <= 0.05:
        return 1.0
    total, sign = 0.0, 1.0
    for k in range(1, 201):
        term = math.exp(-2.0 * k * k * lam * lam)
        total += sign * term
        if term < 1e-17:
            break
        sign = -sign
    return min(1.0, max(0.0, 2.0 * total))


def ks_two_sample(xs, ys) -> tuple[float, float]:
    """Two-sample KS statistic and asymptotic p-value.

    The p-value uses the Kolmogorov distribution at sqrt(n_eff) * D with
    effective size n_eff = nx ny / (nx + ny).
    """
    xs = np.sort(np.asarray(xs, dtype=np.float64).reshape(-1))
    ys = np.sort(np.asarray(ys, dtype=np.float64).reshape(-1))
    if xs.size == 0 or ys.size == 0:
        raise ValueError("both samples must be nonempty")
    pooled = np.concatenate([xs, ys])
    cdf_x = np.searchsorted(xs, pooled, side="right") / xs.size
    cdf_y = np.searchsorted(ys, pooled, side="right") / ys.size
    d = float(np.max(np.abs(cdf_x - cdf_y)))
    n_eff = xs.size * ys.size / (xs.size + ys.size)
    return d, kolmogorov_sf(math.sqrt(n_eff) * d)


# ---------------------------------------------------------------------------
# Entry symmetry
# ---------------------------------------------------------------------------


def entry_symmetry_record(x: np.ndarray, grid: TGrid, delta: float, ks_alpha: float = 0.01) -> dict:
    """Evidence that a scalar sample is symmetric about 0.

    Checks that the imaginary ECF part stays within the confidence radius
    of 0 at every grid point and that the sample is KS-indistinguishable
    from its negation.
    """
    e = ecf_scalar(x, grid, delta)
    im_max = float(np.max(np.abs(e.im)))
    stat, p = ks_two_sample(x, -x)
    passed = bool(im_max <= e.radius and p >= ks_alpha)
    return {
        "im_max": im_max,
        "radius": e.radius,
        "ks_stat": stat,
        "ks_p": p,
        "ks_alpha": ks_alpha,
        "pass": passed,
    }


def test_entry_symmetry(samples, k: int, j: int, grid: TGrid | None = None, delta: float = 0.01) -> bool:
    """True iff entry (k, j), k < j, looks symmetric about 0."""
    if k >= j:
        raise ValueError(f"need k < j (off-diagonal entry), got k={k}, j={j}")
    batch = as_batch(samples)
    grid = grid or TGrid.symmetric()
    return entry_symmetry_record(batch.entry(k, j), grid, delta)["pass"]


# ---------------------------------------------------------------------------
# Conjugation invariance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InvarianceRecord:
    probe: str
    orthogonal: str
    same_batch: CfDistance
    independent: CfDistance

    @property
    def passed(self) -> bool:
        return self.same_batch.passed and self.independent.passed

    def to_dict(self) -> dict:
        return {
            "probe": self.probe,
            "orthogonal": self.orthogonal,
            "same_batch": self.same_batch.to_dict(),
            "independent": self.independent.to_dict(),
            "pass": self.passed,
        }


@dataclass(frozen=True)
class InvarianceReport:
    dim: int
    n: int
    delta: float
    mode: str  # "fresh-batches" or "on-batch"
    seed: SeedSpec | None
    grid: TGrid
    records: list[InvarianceRecord]

    @property
    def overall_pass(self) -> bool:
        return all(r.passed for r in self.records)

    @property
    def probes_tested(self) -> int:
        return len({r.probe for r in self.records})

    @property
    def orthogonals_tested(self) -> int:
        return len({r.orthogonal for r in self.records})

    def failures(self) -> list[InvarianceRecord]:
        return [r for r in self.records if not r.passed]

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "n": self.n,
            "delta": self.delta,
            "mode": self.mode,
            "seed": self.seed.to_dict() if self.seed else None,
            "grid": self.grid.to_dict(),
            "probes_tested": self.probes_tested,
            "orthogonals_tested": self.orthogonals_tested,
            "records": [r.to_dict() for r in self.records],
            "family_wise_delta_bound": min(1.0, 2 * len(self.records) * self.delta),
            "overall_pass": self.overall_pass,
        }


def _conjugated_probes(
    o: OrthogonalMatrix, probes: list[NamedProbe]
) -> list[tuple[bytes, SymMatrix]]:
    """O^T M O for each probe, keyed by packed bytes for ECF deduplication."""
    ot = o.transpose()
    out = []
    for _, m in probes:
        c = conjugate(ot, m)
        out.append((c.packed.tobytes(), c))
    return out


def _column_estimates(
    batch: SampleBatch,
    keyed: list[tuple[bytes, SymMatrix]],
    grid: TGrid,
    delta: float,
    cache: dict[bytes, ECFEstimate],
) -> None:
    """Fill `cache` with ECFs of Tr(M^T X) for the keyed probes not yet present."""
    todo = {}
    for key, m in keyed:
        if key not in cache and key not in todo:
            todo[key] = m
    if not todo:
        return
    w = pairing_weights(batch.dim)
    cols = np.stack([m.packed * w for m in todo.values()], axis=1)
    values = batch.packed @ cols
    for key, est in zip(todo.keys(), ecf_columns(values, grid, delta)):
        cache[key] = est


def _records_for_orthogonal(
    named_o: NamedOrthogonal,
    probes: list[NamedProbe],
    batch_a: SampleBatch,
    batch_b: SampleBatch,
    grid: TGrid,
    delta: float,
) -> list[InvarianceRecord]:
    conj = _conjugated_probes(named_o.matrix, probes)
    probe_keyed = [(p.matrix.packed.tobytes(), p.matrix) for p in probes]
    ecf_a: dict[bytes, ECFEstimate] = {}
    ecf_b: dict[bytes, ECFEstimate] = {}
    _column_estimates(batch_a, probe_keyed + conj, grid, delta, ecf_a)
    _column_estimates(batch_b, conj, grid, delta, ecf_b)
    records = []
    for (pkey, _), (ckey, _), p in zip(probe_keyed, conj, probes):
        e_probe = ecf_a[pkey]
        same = cf_distance(e_probe, ecf_a[ckey])
        indep = cf_distance(e_probe, ecf_b[ckey])
        records.append(InvarianceRecord(p.name, named_o.name, same, indep))
    return records


def test_conjugation_invariance(
    spec: EnsembleSpec,
    n: int,
    orthogonal_family: Sequence | None = None,
    probes: Sequence | None = None,
    delta: float = 0.01,
    seed: SeedSpec | None = None,
    grid: TGrid | None = None,
    haar_count: int = 10,
    threads: int | None = None,
) -> InvarianceReport:
    """Test O X O^T = X in law over a family of orthogonals and probes.

    For each orthogonal a fresh pair of independent batches is drawn and
    shared across probes: per record the statistical guarantees are those
    of independent batches, and the union bound over records needs no
    independence across them.
    """
    if spec.dim < 2:
        raise ValueError("invariance testing requires dim >= 2")
    if n < MIN_INVARIANCE_N:
        raise ValueError(f"need n >= {MIN_INVARIANCE_N}, got {n}")
    seed = seed or SeedSpec(0)
    grid = grid or TGrid.symmetric(n_points=INVARIANCE_GRID_POINTS)
    family = _coerce_family(
        orthogonal_family
        if orthogonal_family is not None
        else default_orthogonal_family(spec.dim, haar_count, seed)
    )
    named_probes = _coerce_probes(
        probes if probes is not None else default_probes(spec.dim, seed=seed)
    )
    for _, o in family:
        if o.dim != spec.dim:
            raise ValueError("orthogonal dimension does not match the ensemble")
    for _, m in named_probes:
        if m.dim != spec.dim:
            raise ValueError("probe dimension does not match the ensemble")

    def run_one(idx_named):
        idx, named_o = idx_named
        batch_a = spec.sample(n, seed.child(idx, 0))
        batch_b = spec.sample(n, seed.child(idx, 1))
        return _records_for_orthogonal(named_o, named_probes, batch_a, batch_b, grid, delta)

    k = thread_count() if threads is None else max(1, threads)
    jobs = list(enumerate(family))
    if k > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=k) as pool:
            per_o = list(pool.map(run_one, jobs))
    else:
        per_o = [run_one(job) for job in jobs]
    records = [r for sub in per_o for r in sub]
    return InvarianceReport(spec.dim, n, delta, "fresh-batches", seed, grid, records)


def invariance_on_batch(
    samples,
    orthogonal_family: Sequence,
    probes: Sequence,
    delta: float = 0.01,
    grid: TGrid | None = None,
    max_n: int | None = None,
) -> InvarianceReport:
    """Invariance check against a fixed sample batch (no fresh draws).

    The same-batch comparison uses all samples; the independent
    comparison splits the batch into halves.  This is the form usable on
    ingested sample files.
    """
    batch = as_batch(samples)
    if batch.dim < 2:
        raise ValueError("invariance testing requires dim >= 2")
    if max_n is not None and batch.n > max_n:
        batch = batch.take(max_n)
    grid = grid or TGrid.symmetric(n_points=INVARIANCE_GRID_POINTS)
    family = _coerce_family(orthogonal_family)
    named_probes = _coerce_probes(probes)
    half1, half2 = batch.halves()
    probe_keyed = [(p.matrix.packed.tobytes(), p.matrix) for p in named_probes]
    full_cache: dict[bytes, ECFEstimate] = {}
    h1_cache: dict[bytes, ECFEstimate] = {}
    h2_cache: dict[bytes, ECFEstimate] = {}
    _column_estimates(batch, probe_keyed, grid, delta, full_cache)
    _column_estimates(half1, probe_keyed, grid, delta, h1_cache)
    records = []
    for named_o in family:
        conj = _conjugated_probes(named_o.matrix, named_probes)
        _column_estimates(batch, conj, grid, delta, full_cache)
        _column_estimates(half2, conj, grid, delta, h2_cache)
        for (pkey, _), (ckey, _), p in zip(probe_keyed, conj, named_probes):
            same = cf_distance(full_cache[pkey], full_cache[ckey])
            indep = cf_distance(h1_cache[pkey], h2_cache[ckey])
            records.append(InvarianceRecord(p.name, named_o.name, same, indep))
    return InvarianceReport(batch.dim, batch.n, delta, "on-batch", None, grid, records)
