import itertools

import numpy as np
import pytest

from wordshift.changepoint import (DetectorConfig, bootstrap_pvalues, detect,
                                   detect_ensemble, mean_shift,
                                   normalize_ensemble, sort_results,
                                   write_report_csv)
from wordshift.series import SeriesEnsemble


def exhaustive_pvalues(series):
    """Exact per-pivot tail fractions over every distinct arrangement.

    Uniform over the distinct multiset permutations, which equals uniform
    over all n! permutations because equal values form equal-sized classes.
    """
    series = np.asarray(series, dtype=float)
    observed = mean_shift(series)
    arrangements = np.array(sorted(set(itertools.permutations(series.tolist()))))
    shifts = mean_shift(arrangements)
    return (shifts > observed).mean(axis=0)


def make_ensemble(values):
    values = np.asarray(values, dtype=float)
    return SeriesEnsemble("frequency", [f"w{i}" for i in range(values.shape[0])],
                          values)


class TestNormalizeEnsemble:
    def test_hand_computed_column(self):
        # column [1,2,3]: mu=2, population sigma=sqrt(2/3)
        ens = make_ensemble([[1.0], [2.0], [3.0]])
        norm = normalize_ensemble(ens)
        np.testing.assert_allclose(norm.zscores[:, 0],
                                   [-1.224745, 0.0, 1.224745], atol=1e-6)

    def test_degenerate_column_is_zero(self):
        ens = make_ensemble([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]])
        norm = normalize_ensemble(ens)
        np.testing.assert_array_equal(norm.zscores[:, 0], 0.0)
        assert norm.stds[0] == 0.0

    def test_idempotent_on_normalized_input(self):
        rng = np.random.default_rng(0)
        values = rng.normal(size=(50, 6))
        values -= values.mean(axis=0)
        values /= np.sqrt(np.mean(values ** 2, axis=0))
        norm = normalize_ensemble(make_ensemble(values))
        np.testing.assert_allclose(norm.zscores, values, atol=1e-12)

    def test_columns_zero_mean(self):
        rng = np.random.default_rng(1)
        norm = normalize_ensemble(make_ensemble(rng.normal(size=(30, 8))))
        np.testing.assert_allclose(norm.zscores.mean(axis=0), 0.0, atol=1e-9)

    def test_single_word_rejected(self):
        with pytest.raises(ValueError):
            normalize_ensemble(make_ensemble([[1.0, 2.0]]))


class TestMeanShift:
    def test_step_function(self):
        k = mean_shift([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
        assert k[2] == pytest.approx(1.0)  # pivot j=3

    def test_constant_series(self):
        np.testing.assert_array_equal(mean_shift([2.0] * 5), np.zeros(4))

    def test_arithmetic(self):
        k = mean_shift([1.0, 2.0, 3.0, 4.0])
        assert k[0] == pytest.approx(2.0)  # mean(2,3,4) - 1

    def test_too_short(self):
        with pytest.raises(ValueError):
            mean_shift([1.0])

    def test_shift_equivariance(self):
        # the identity is exact in reals; float cumsums leave ~1e-15 dust
        rng = np.random.default_rng(2)
        for _ in range(100):
            s = rng.normal(size=12)
            c = rng.normal()
            np.testing.assert_allclose(mean_shift(s + c), mean_shift(s), atol=1e-12)

    def test_scale_equivariance_exact(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            s = rng.normal(size=10)
            c = float(rng.integers(1, 5))  # power-of-two-free exact scaling check
            np.testing.assert_allclose(mean_shift(c * s), c * mean_shift(s),
                                       rtol=1e-12)


class TestBootstrap:
    def test_constant_series_p_zero(self):
        rng = np.random.default_rng(4)
        p = bootstrap_pvalues(np.full(6, 3.0), 500, rng)
        np.testing.assert_array_equal(p, np.zeros(5))

    def test_matches_exhaustive_oracle_on_step(self):
        series = np.array([0.0] * 4 + [3.0] * 4)
        exact = exhaustive_pvalues(series)
        rng = np.random.default_rng(5)
        estimate = bootstrap_pvalues(series, 1000, rng)
        np.testing.assert_allclose(estimate, exact, atol=0.02)
        assert exact[3] == 0.0          # pivot 4 is the maximal arrangement
        assert estimate[3] < 0.05

    def test_deterministic_given_seed(self):
        series = np.random.default_rng(6).normal(size=10)
        p1 = bootstrap_pvalues(series, 300, np.random.default_rng([7, 1]))
        p2 = bootstrap_pvalues(series, 300, np.random.default_rng([7, 1]))
        np.testing.assert_array_equal(p1, p2)

    def test_null_distribution_depends_only_on_multiset(self):
        # same multiset, different arrangement: identical permutation nulls
        rng1 = np.random.default_rng(8)
        rng2 = np.random.default_rng(8)
        a = np.array([1.0, 5.0, 2.0, 4.0, 3.0])
        b = np.array([5.0, 4.0, 3.0, 2.0, 1.0])
        perms_a = rng1.permuted(np.tile(a, (400, 1)), axis=1)
        perms_b = rng2.permuted(np.tile(b, (400, 1)), axis=1)
        ka = np.sort(mean_shift(perms_a)[:, 2])
        kb = np.sort(mean_shift(perms_b)[:, 2])
        # distributions agree (same generator consumed identically aside,
        # the sorted samples come from the same finite null)
        assert set(np.round(ka, 12)) <= set(np.round(mean_shift(
            np.array(sorted(set(itertools.permutations(a.tolist())))))[:, 2], 12))
        assert set(np.round(kb, 12)) <= set(np.round(mean_shift(
            np.array(sorted(set(itertools.permutations(b.tolist())))))[:, 2], 12))


class TestDetect:
    def test_all_zero_series_not_significant(self):
        config = DetectorConfig(bootstrap=200, gamma=1.75, seed=1)
        result = detect(np.zeros(10), config, np.random.default_rng(0))
        assert not result.significant
        assert result.min_pvalue == 1.0
        assert result.ecp_index is None

    def test_step_series_found_at_pivot_five(self):
        series = np.array([0.0] * 5 + [3.0] * 5)
        config = DetectorConfig(bootstrap=1000, gamma=1.75, seed=1)
        result = detect(series, config, np.random.default_rng(1))
        assert result.ecp_index == 5
        assert result.min_pvalue < 0.01
        assert result.significant

    def test_ties_resolve_to_earliest(self):
        # symmetric double step: pivots 2 and 4 have equal mean shifts, and
        # z passes gamma at both; both p-values tie at zero
        series = np.array([0.0, 0.0, 2.0, 2.0, 4.0, 4.0])
        config = DetectorConfig(bootstrap=400, gamma=1.5, seed=3)
        result = detect(series, config, np.random.default_rng(3))
        candidates = np.flatnonzero(series[1:] >= 1.5) + 1
        pv = result.pvalues[candidates - 1]
        assert result.ecp_index == candidates[np.argmin(pv)]
        first_min = candidates[pv == pv.min()][0]
        assert result.ecp_index == first_min

    def test_gamma_infinite_gates_everything(self):
        series = np.array([0.0] * 5 + [5.0] * 5)
        config = DetectorConfig(bootstrap=100, gamma=np.inf, seed=1)
        result = detect(series, config, np.random.default_rng(2))
        assert not result.significant
        assert result.min_pvalue == 1.0

    def test_pvalues_in_unit_interval(self):
        rng = np.random.default_rng(9)
        config = DetectorConfig(bootstrap=200, gamma=-np.inf, seed=2)
        for _ in range(20):
            result = detect(rng.normal(size=12), config, np.random.default_rng(5))
            assert np.all(result.pvalues >= 0.0)
            assert np.all(result.pvalues <= 1.0)

    def test_detection_power_with_temporal_noise(self):
        # jump of 2 z-units plus sigma=0.25 within-word noise
        rng = np.random.default_rng(10)
        config = DetectorConfig(bootstrap=500, gamma=1.75, seed=4)
        hits = 0
        trials = 100
        for t in range(trials):
            series = rng.normal(scale=0.25, size=20)
            series[10:] += 2.0
            result = detect(series, config, np.random.default_rng([6, t]))
            if result.ecp_index is not None and abs(result.ecp_index - 10) <= 1:
                hits += 1
        assert hits / trials >= 0.9


class TestEnsembleAndReport:
    def test_per_word_streams_independent_of_order(self):
        rng = np.random.default_rng(11)
        values = rng.normal(size=(6, 12))
        values[3, 6:] += 4.0
        norm = normalize_ensemble(make_ensemble(values))
        config = DetectorConfig(bootstrap=300, gamma=1.0, seed=9)
        first = detect_ensemble(norm, config)
        second = detect_ensemble(norm, config)
        for a, b in zip(first, second):
            assert a.min_pvalue == b.min_pvalue
            np.testing.assert_array_equal(a.pvalues, b.pvalues)

    def test_report_sorted_and_formatted(self, tmp_path):
        rng = np.random.default_rng(12)
        values = rng.normal(size=(5, 10)) * 0.1
        values[2, 5:] += 5.0
        norm = normalize_ensemble(make_ensemble(values))
        config = DetectorConfig(bootstrap=300, gamma=1.5, seed=13)
        results = detect_ensemble(norm, config, labels=[str(t) for t in range(10)])
        path = tmp_path / "report.csv"
        write_report_csv(results, "frequency", path)
        lines = path.read_text().splitlines()
        assert lines[0] == "word,method,significant,ecp_label,p_value,max_zscore"
        pvals = [float(line.split(",")[4]) for line in lines[1:]]
        assert pvals == sorted(pvals)
        assert lines[1].split(",")[0] == "w2"

    def test_sort_breaks_ties_by_zscore_then_word(self):
        from wordshift.changepoint import ChangePointResult
        mk = lambda w, p, z: ChangePointResult(w, True, 1, "1", p, np.array([p]), z)
        rows = [mk("b", 0.5, 2.0), mk("a", 0.5, 3.0), mk("c", 0.1, 1.0),
                mk("d", 0.5, 2.0)]
        ordered = [r.word for r in sort_results(rows)]
        assert ordered == ["c", "a", "b", "d"]
