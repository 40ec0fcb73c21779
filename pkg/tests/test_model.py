import json

import numpy as np
import pytest

from prap.model import (
    Problem,
    SeedSpec,
    make_problem,
    measure,
    problem_from_json,
    problem_to_json,
    sample_gaussian_matrix,
    sample_signal,
)

EPS = np.finfo(np.float64).eps


class TestSeedSpec:
    def test_same_labels_same_stream(self):
        a = SeedSpec(42, n=8, m=80, trial_index=3, stream_tag="matrix").rng()
        b = SeedSpec(42, n=8, m=80, trial_index=3, stream_tag="matrix").rng()
        np.testing.assert_array_equal(a.standard_normal(100), b.standard_normal(100))

    @pytest.mark.parametrize(
        "labels", [{"trial_index": 1}, {"stream_tag": "x"}, {"n": 9}, {"m": 81}]
    )
    def test_distinct_labels_distinct_streams(self, labels):
        base = SeedSpec(42, n=8, m=80, trial_index=0, stream_tag="")
        other = base.with_labels(**labels)
        assert not np.array_equal(base.rng().standard_normal(8), other.rng().standard_normal(8))

    def test_with_labels_preserves_master(self):
        spec = SeedSpec(7).with_labels(n=4, stream_tag="signal")
        assert spec.master_seed == 7
        assert spec.n == 4


class TestSampleGaussianMatrix:
    def test_second_moment(self):
        A = sample_gaussian_matrix(1000, 1, SeedSpec(0))
        stderr = 1.0 / np.sqrt(A.size)  # Var(|a|^2) = 1 for unit complex Gaussian
        assert abs(np.mean(np.abs(A) ** 2) - 1.0) <= 1.1 * 3 * stderr

    def test_determinism_bitwise(self):
        A1 = sample_gaussian_matrix(50, 7, SeedSpec(123, stream_tag="matrix"))
        A2 = sample_gaussian_matrix(50, 7, SeedSpec(123, stream_tag="matrix"))
        np.testing.assert_array_equal(A1, A2)

    def test_real_imag_uncorrelated(self):
        A = sample_gaussian_matrix(2000, 2, SeedSpec(1)).ravel()
        corr = np.corrcoef(A.real, A.imag)[0, 1]
        assert abs(corr) <= 3.0 / np.sqrt(A.size)

    def test_statistical_sanity_large(self):
        # desk-scale hypothesis test on the entry second moment
        A = sample_gaussian_matrix(1000, 100, SeedSpec(2))
        assert A.size >= 10**5
        assert abs(np.mean(np.abs(A) ** 2) - 1.0) <= 5.0 / np.sqrt(A.size)

    def test_bad_shapes(self):
        with pytest.raises(ValueError):
            sample_gaussian_matrix(0, 3, SeedSpec(0))


class TestSampleSignal:
    def test_repeatable_bitwise(self):
        x1 = sample_signal(4, SeedSpec(9, stream_tag="signal"))
        x2 = sample_signal(4, SeedSpec(9, stream_tag="signal"))
        np.testing.assert_array_equal(x1, x2)

    def test_unit_norm(self):
        x = sample_signal(32, SeedSpec(10))
        assert abs(np.linalg.norm(x) - 1.0) <= 2 * EPS

    def test_unnormalized_mode(self):
        x = sample_signal(1000, SeedSpec(11), normalize=False)
        assert np.linalg.norm(x) > 2  # ~sqrt(1000) with overwhelming probability

    def test_trials_differ(self):
        x1 = sample_signal(6, SeedSpec(12, trial_index=0))
        x2 = sample_signal(6, SeedSpec(12, trial_index=1))
        assert np.any(x1 != x2)


class TestMeasure:
    def test_identity_matrix(self):
        b = measure(np.eye(2, dtype=complex), np.array([3.0, -4j]))
        np.testing.assert_array_equal(b, [3.0, 4.0])

    def test_zero_signal(self):
        A = sample_gaussian_matrix(5, 3, SeedSpec(13))
        np.testing.assert_array_equal(measure(A, np.zeros(3, dtype=complex)), np.zeros(5))

    def test_global_phase_invariance(self):
        A = sample_gaussian_matrix(20, 4, SeedSpec(14))
        x0 = sample_signal(4, SeedSpec(14, stream_tag="signal"))
        for phi in (0.5, 2.0, -1.3):
            np.testing.assert_allclose(
                measure(A, np.exp(1j * phi) * x0), measure(A, x0), rtol=1e-12, atol=1e-13
            )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            measure(np.eye(3, dtype=complex), np.zeros(2, dtype=complex))


class TestProblem:
    def test_measurements_match_truth_exactly(self):
        problem = make_problem(4, 20, SeedSpec(15))
        np.testing.assert_array_equal(problem.b, measure(problem.A, problem.x0))
        assert not problem.uniqueness_warning

    def test_uniqueness_warning_below_threshold(self):
        assert make_problem(4, 10, SeedSpec(16)).uniqueness_warning  # 10 < 4*4-4
        assert not make_problem(4, 12, SeedSpec(16)).uniqueness_warning

    def test_determinism(self):
        p1 = make_problem(6, 30, SeedSpec(17))
        p2 = make_problem(6, 30, SeedSpec(17))
        np.testing.assert_array_equal(p1.A, p2.A)
        np.testing.assert_array_equal(p1.b, p2.b)
        np.testing.assert_array_equal(p1.x0, p2.x0)

    def test_matrix_and_signal_streams_independent(self):
        problem = make_problem(3, 9, SeedSpec(18))
        # regenerating with the same labels reproduces each component
        A = sample_gaussian_matrix(9, 3, SeedSpec(18, n=3, m=9, stream_tag="matrix"))
        np.testing.assert_array_equal(problem.A, A)

    def test_negative_b_rejected(self):
        with pytest.raises(ValueError):
            Problem(np.eye(2, dtype=complex), b=np.array([1.0, -0.5]))

    def test_inconsistent_b_rejected(self):
        A = np.eye(2, dtype=complex)
        with pytest.raises(ValueError):
            Problem(A, b=np.array([1.0, 1.0]), x0=np.array([1.0, 0.0 + 0j]))

    def test_b_only_problem_allowed(self):
        problem = Problem(np.eye(3, dtype=complex), b=np.array([2.0, 1.0, 0.5]))
        assert problem.x0 is None
        assert problem.n == 3


class TestSerialization:
    def test_roundtrip_exact(self):
        problem = make_problem(5, 18, SeedSpec(19))
        blob = json.dumps(problem_to_json(problem))
        restored = problem_from_json(json.loads(blob))
        np.testing.assert_array_equal(restored.A, problem.A)
        np.testing.assert_array_equal(restored.b, problem.b)
        np.testing.assert_array_equal(restored.x0, problem.x0)
        assert restored.uniqueness_warning == problem.uniqueness_warning

    def test_roundtrip_without_truth(self):
        problem = Problem(np.eye(2, dtype=complex), b=np.array([1.0, 2.0]))
        restored = problem_from_json(problem_to_json(problem))
        assert restored.x0 is None
        np.testing.assert_array_equal(restored.b, problem.b)

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError):
            problem_from_json({"format": "something-else"})
