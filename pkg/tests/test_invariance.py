import math

import numpy as np
import pytest
import scipy.special
import scipy.stats

from goelab.cf import TGrid
from goelab.ensembles import EnsembleSpec, SeedSpec
from goelab.invariance import (
    NamedOrthogonal,
    default_orthogonal_family,
    default_probes,
    invariance_on_batch,
    kolmogorov_sf,
    ks_two_sample,
)
from goelab.invariance import test_conjugation_invariance as conjugation_invariance
from goelab.invariance import test_entry_symmetry as entry_symmetry
from goelab.symmetric import OrthogonalMatrix

SEED = SeedSpec(1618)
SMALL_GRID = TGrid.symmetric(4.0, 21)


class TestKsTwoSample:
    def test_identical_samples(self):
        x = np.arange(1000.0)
        d, p = ks_two_sample(x, x)
        assert d == 0.0 and p == 1.0

    def test_disjoint_point_masses(self):
        d, p = ks_two_sample(np.zeros(1000), np.ones(1000))
        assert d == 1.0
        assert p < 1e-12

    def test_mean_shift_power(self):
        rng = SEED.generator()
        d, p = ks_two_sample(rng.standard_normal(10_000), rng.standard_normal(10_000) + 0.5)
        assert p < 1e-6

    def test_same_distribution_p_large(self):
        rng = SEED.generator()
        d, p = ks_two_sample(rng.standard_normal(20_000), rng.standard_normal(20_000))
        assert p > 0.01

    def test_matches_scipy(self):
        rng = SEED.generator()
        for nx, ny in [(500, 500), (1000, 400)]:
            x, y = rng.standard_normal(nx), rng.standard_normal(ny) * 1.1
            d, p = ks_two_sample(x, y)
            ref = scipy.stats.ks_2samp(x, y, method="asymp")
            assert d == pytest.approx(ref.statistic, abs=1e-12)
            # p-value: limiting Kolmogorov distribution at sqrt(n_eff) * D
            n_eff = nx * ny / (nx + ny)
            assert p == pytest.approx(
                float(scipy.special.kolmogorov(math.sqrt(n_eff) * d)), abs=1e-9
            )

    def test_kolmogorov_sf_matches_scipy(self):
        import scipy.special

        for lam in (0.3, 0.5, 1.0, 1.5, 2.5):
            assert kolmogorov_sf(lam) == pytest.approx(
                float(scipy.special.kolmogorov(lam)), abs=1e-12
            )

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ks_two_sample([], [1.0])

    def test_kolmogorov_sf_bounds(self):
        assert kolmogorov_sf(0.0) == 1.0
        assert kolmogorov_sf(10.0) < 1e-80
        lams = np.linspace(0.3, 3.0, 20)
        vals = [kolmogorov_sf(l) for l in lams]
        assert all(0.0 <= v <= 1.0 for v in vals)
        assert all(a >= b for a, b in zip(vals, vals[1:]))  # monotone


class TestDefaultFamilies:
    def test_d2_enumeration(self):
        fam = default_orthogonal_family(2, count=0)
        assert len(fam) == 5  # swap(1,2) + 4 rotations
        assert fam[0].name == "swap(1,2)"

    def test_d3_enumeration(self):
        fam = default_orthogonal_family(3, count=2, seed=SEED)
        assert len(fam) == 3 + 4 + 2
        assert sum(n.startswith("swap") for n, _ in fam) == 3
        assert sum(n.startswith("rot") for n, _ in fam) == 4
        assert sum(n.startswith("haar") for n, _ in fam) == 2

    def test_all_members_orthogonal(self):
        for _, o in default_orthogonal_family(4, count=3, seed=SEED):
            assert np.max(np.abs(o.matrix.T @ o.matrix - np.eye(4))) <= 1e-10

    def test_default_probes_composition(self):
        probes = default_probes(4, n_random=5, seed=SEED)
        names = [p.name for p in probes]
        assert sum(n.startswith("offdiag") for n in names) == 6
        assert sum(n.startswith("diag") for n in names) == 4
        assert sum(n.startswith("random") for n in names) == 5


class TestEntrySymmetry:
    def test_goe_entry_symmetric(self):
        batch = EnsembleSpec("goe", 3).sample(20_000, SEED)
        assert entry_symmetry(batch, 1, 2, SMALL_GRID)

    def test_affine_offdiag_still_symmetric(self):
        batch = EnsembleSpec("affine-goe", 3, mu=1.0, scale=1.0).sample(20_000, SEED)
        assert entry_symmetry(batch, 1, 3, SMALL_GRID)

    def test_shifted_entries_fail(self):
        batch = EnsembleSpec("goe", 3).sample(20_000, SEED)
        shifted = batch.packed.copy()
        shifted[:, 1] += 0.5  # logical entry (1,2)
        from goelab.ensembles import SampleBatch

        assert not entry_symmetry(SampleBatch(3, shifted), 1, 2, SMALL_GRID)

    def test_diagonal_pair_rejected(self):
        batch = EnsembleSpec("goe", 3).sample(100, SEED)
        with pytest.raises(ValueError):
            entry_symmetry(batch, 2, 2, SMALL_GRID)


class TestConjugationInvariance:
    def test_identity_family_zero_distance(self):
        spec = EnsembleSpec("goe", 3)
        fam = [NamedOrthogonal("identity", OrthogonalMatrix.identity(3))]
        rep = conjugation_invariance(spec, 10_000, fam, delta=0.01, seed=SEED)
        assert rep.overall_pass
        assert all(r.same_batch.sup_dist == 0.0 for r in rep.records)

    def test_goe_passes_small(self):
        rep = conjugation_invariance(
            EnsembleSpec("goe", 3), 20_000, delta=0.01, seed=SEED, haar_count=2
        )
        assert rep.overall_pass
        assert rep.orthogonals_tested == 3 + 4 + 2
        assert rep.probes_tested == 3 + 3 + 5

    def test_uniform_control_fails_offdiag_probe(self):
        rep = conjugation_invariance(
            EnsembleSpec("uniform-sym", 3), 20_000, delta=0.01, seed=SEED, haar_count=2
        )
        assert not rep.overall_pass
        offdiag_failures = [r for r in rep.failures() if r.probe.startswith("offdiag")]
        assert offdiag_failures
        # permutations relabel independent entries: they can never fail uniform
        assert all(not r.orthogonal.startswith("swap") for r in rep.failures())

    def test_report_is_pure_function_of_inputs(self):
        spec = EnsembleSpec("goe", 2)
        r1 = conjugation_invariance(spec, 10_000, delta=0.01, seed=SEED, haar_count=1)
        r2 = conjugation_invariance(spec, 10_000, delta=0.01, seed=SEED, haar_count=1)
        assert r1.to_dict() == r2.to_dict()

    def test_dimension_validation(self):
        with pytest.raises(ValueError):
            conjugation_invariance(EnsembleSpec("goe", 1), 10_000, seed=SEED)
        with pytest.raises(ValueError):
            conjugation_invariance(EnsembleSpec("goe", 2), 100, seed=SEED)

    def test_zero_probe_rejected(self):
        from goelab.symmetric import SymMatrix

        with pytest.raises(ValueError, match="zero matrix"):
            conjugation_invariance(
                EnsembleSpec("goe", 2),
                10_000,
                probes=[SymMatrix.zeros(2)],
                seed=SEED,
            )

    def test_calibration_over_substreams(self):
        # per-record failure probability is <= delta by Hoeffding; over 100
        # reduced-size substream runs at most 2 may fail (99.9% binomial
        # envelope is far looser; in practice the count is 0)
        spec = EnsembleSpec("goe", 2)
        probes = default_probes(2, n_random=2, seed=SEED)
        failures = 0
        for s in range(100):
            rep = conjugation_invariance(
                spec,
                10_000,
                probes=probes,
                delta=0.01,
                seed=SEED.substream(s),
                haar_count=1,
                grid=SMALL_GRID,
            )
            failures += not rep.overall_pass
        assert failures <= 2


class TestInvarianceOnBatch:
    def test_goe_batch_passes(self):
        batch = EnsembleSpec("goe", 3).sample(20_000, SEED)
        fam = default_orthogonal_family(3, count=2, seed=SEED)
        probes = default_probes(3, n_random=2, seed=SEED)
        rep = invariance_on_batch(batch, fam, probes, delta=0.01, grid=SMALL_GRID)
        assert rep.overall_pass
        assert rep.mode == "on-batch"

    def test_uniform_batch_fails(self):
        batch = EnsembleSpec("uniform-sym", 3).sample(20_000, SEED)
        fam = default_orthogonal_family(3, count=2, seed=SEED)
        probes = default_probes(3, n_random=2, seed=SEED)
        rep = invariance_on_batch(batch, fam, probes, delta=0.01, grid=SMALL_GRID)
        assert not rep.overall_pass

    def test_max_n_truncation(self):
        batch = EnsembleSpec("goe", 2).sample(30_000, SEED)
        fam = default_orthogonal_family(2, count=0)
        probes = default_probes(2, n_random=1, seed=SEED)
        rep = invariance_on_batch(batch, fam, probes, delta=0.01, grid=SMALL_GRID, max_n=10_000)
        assert rep.n == 10_000


def test_report_json_round_trip():
    import json

    rep = conjugation_invariance(
        EnsembleSpec("goe", 2), 10_000, delta=0.01, seed=SEED, haar_count=1
    )
    encoded = json.dumps(rep.to_dict())
    decoded = json.loads(encoded)
    assert decoded["overall_pass"] is True
    assert decoded["records"][0]["same_batch"]["sup_dist"] >= 0.0
    assert decoded["family_wise_delta_bound"] == pytest.approx(
        min(1.0, 2 * len(rep.records) * 0.01)
    )
