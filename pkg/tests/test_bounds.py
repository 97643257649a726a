import numpy as np
import pytest

from jsrbound.bounds import (
    best_average_lower_bound,
    best_bounds,
    classify_stability,
    default_parameters,
    kron_accuracy,
    kron_lift_bounds,
    kronecker_bounds,
    lift_accuracy,
    lift_bounds,
    lower_bound_average,
    plan_accuracy,
    recursive_accuracy,
    recursive_lift_bounds,
    sum_bounds,
)
from jsrbound.config import Budget, EllipsoidSettings, Tolerances
from jsrbound.errors import CapacityError, HypothesisError, ValidationError
from jsrbound.lifting import sdp_lift
from jsrbound.matrix_core import spectral_radius
from jsrbound.models import METHODS, CertifiedInterval, MatrixSet
from jsrbound.oracle import brute_force_bounds

FAST_ELLIPSOID = EllipsoidSettings(subgradient_steps=100, bisection_levels=8)


@pytest.fixture
def nonnegative_pair() -> MatrixSet:
    return MatrixSet.of([[[1.0, 1.0], [0.0, 1.0]], [[1.0, 0.0], [1.0, 1.0]]])


@pytest.fixture
def signed_pair() -> MatrixSet:
    return MatrixSet.of([[[0.6, -0.8], [0.3, 0.4]], [[-0.2, 0.9], [0.7, -0.5]]])


def _random_sets(seed: int, count: int, m: int = 2, n: int = 3):
    rng = np.random.default_rng(seed)
    return [MatrixSet.of([rng.uniform(-1, 1, (n, n)) for _ in range(m)]) for _ in range(count)]


def test_accuracy_tables():
    assert [round(kron_accuracy(2, k), 3) for k in (2, 4, 8, 16)] == [0.707, 0.841, 0.917, 0.958]
    assert [round(recursive_accuracy(2, d), 3) for d in (1, 2, 3, 4, 5)] == [0.707, 0.841, 0.917, 0.958, 0.979]
    for got, quoted in zip([recursive_accuracy(2, d) for d in range(1, 6)], [0.707, 0.840, 0.917, 0.957, 0.978]):
        assert got == pytest.approx(quoted, abs=1.5e-3)


def test_sum_bounds(nonnegative_pair: MatrixSet):
    iv = sum_bounds(nonnegative_pair)
    assert iv.upper == pytest.approx(3.0)
    assert iv.lower == pytest.approx(1.5)
    assert iv.hypothesis == "nonnegative"


def test_kronecker_bounds_accuracy(nonnegative_pair: MatrixSet):
    iv = kronecker_bounds(nonnegative_pair, 4)
    assert iv.guaranteed_accuracy == pytest.approx(2 ** (-1 / 4))
    assert round(iv.guaranteed_accuracy, 2) == 0.84
    assert iv.lower == pytest.approx(iv.guaranteed_accuracy * iv.upper)
    oracle = brute_force_bounds(nonnegative_pair, 8)
    assert iv.upper >= oracle.lower - 1e-9
    assert iv.lower <= oracle.upper + 1e-9


def test_kronecker_bounds_single_matrix_is_exact():
    A = np.array([[0.3, -1.2], [0.4, 0.1]])
    iv = kronecker_bounds(MatrixSet.of([A]), 3)
    assert iv.upper == pytest.approx(spectral_radius(A), rel=1e-9)
    assert iv.lower == pytest.approx(iv.upper)


def test_kronecker_bounds_need_a_cone(signed_pair: MatrixSet):
    with pytest.raises(HypothesisError):
        kronecker_bounds(signed_pair, 2)
    with pytest.raises(HypothesisError):
        sum_bounds(signed_pair)

    asserted = MatrixSet.of(signed_pair.matrices, cone_asserted=True)
    iv = kronecker_bounds(asserted, 2)
    assert iv.hypothesis == "cone_asserted"


def test_kronecker_bounds_refuse_oversized_power(nonnegative_pair: MatrixSet):
    with pytest.raises(CapacityError):
        kronecker_bounds(nonnegative_pair, 30)


def test_lift_bounds_identity_pair():
    iv = lift_bounds(MatrixSet.of([np.eye(2), np.eye(2)]), 1)
    assert iv.upper == pytest.approx(2**0.5)
    assert iv.lower == pytest.approx(1.0)
    assert round(iv.guaranteed_accuracy, 3) == 0.707


def test_lift_bounds_opposite_pair_is_tight_from_below():
    A = np.array([[0.5, 1.0], [-0.3, 0.8]])
    iv = lift_bounds(MatrixSet.of([A, -A]), 1)
    assert iv.upper == pytest.approx(2**0.5 * spectral_radius(A), rel=1e-9)
    assert iv.lower == pytest.approx(spectral_radius(A), rel=1e-9)


def test_lift_bounds_matches_dense_lifted_sum():
    ms = _random_sets(21, 1)[0]
    M = sum(sdp_lift(A) for A in ms.matrices)
    iv = lift_bounds(ms, 1)
    assert iv.upper == pytest.approx(spectral_radius(M) ** 0.5, rel=1e-9)


def test_all_lifted_bounds_bracket_the_oracle():
    for ms in _random_sets(8, 5):
        oracle = brute_force_bounds(ms, 8)
        intervals = [
            lift_bounds(ms, 1),
            lift_bounds(ms, 2),
            kron_lift_bounds(ms, 2),
            recursive_lift_bounds(ms, 2),
        ]
        for iv in intervals:
            assert iv.upper >= oracle.lower - 1e-9, iv.method
            assert iv.lower <= oracle.upper + 1e-9, iv.method


def test_depth_one_and_l_one_agree():
    ms = _random_sets(9, 1)[0]
    a = lift_bounds(ms, 1)
    b = recursive_lift_bounds(ms, 1)
    c = kron_lift_bounds(ms, 1)
    assert a.upper == pytest.approx(b.upper, rel=1e-9)
    assert a.upper == pytest.approx(c.upper, rel=1e-9)


def test_invalid_parameters():
    ms = _random_sets(1, 1)[0]
    with pytest.raises(ValidationError):
        lift_bounds(ms, 0)
    with pytest.raises(ValidationError):
        recursive_lift_bounds(ms, -1)


def test_average_lower_bounds(signed_pair: MatrixSet):
    uniform = lower_bound_average(signed_pair)
    value, weights = best_average_lower_bound(signed_pair)
    assert value >= uniform
    assert value >= max(spectral_radius(A) for A in signed_pair.matrices)
    assert sum(weights) == pytest.approx(1.0)
    assert value <= brute_force_bounds(signed_pair, 8).upper + 1e-9


def test_average_rejects_bad_weights(signed_pair: MatrixSet):
    with pytest.raises(ValidationError):
        lower_bound_average(signed_pair, [0.7, 0.7])
    with pytest.raises(ValidationError):
        lower_bound_average(signed_pair, [1.2, -0.2])
    with pytest.raises(ValidationError):
        lower_bound_average(signed_pair, [1.0])


def test_plan_three_matrices_high_accuracy():
    plan = plan_accuracy(3, 5, 0.05)
    assert plan.method == "lift"
    assert plan.params == {"l": 11}
    assert plan.predicted_dim == 15**11
    assert plan.guaranteed_accuracy >= 0.95
    assert not plan.feasible
    kron = next(c for c in plan.alternatives if c.method == "kron")
    assert kron.params == {"k": 22}
    assert kron.predicted_dim == 5**22


def test_plan_two_matrices_seventy_percent():
    plan = plan_accuracy(2, 5, 0.3)
    assert plan.method == "lift"
    assert plan.params == {"l": 1}
    assert plan.predicted_dim == 15
    assert plan.feasible
    kron = next(c for c in plan.alternatives if c.method == "kron")
    assert kron.params == {"k": 2}
    assert kron.predicted_dim == 25


def test_plan_ties_prefer_fewer_lift_stages():
    plan = plan_accuracy(2, 1, 0.3)
    assert plan.method == "kron"


def test_plan_single_matrix_is_exact():
    plan = plan_accuracy(1, 4, 0.5)
    assert plan.method == "kron"
    assert plan.params == {"k": 1}
    assert plan.guaranteed_accuracy == 1.0


def test_plan_without_cone_and_invalid_epsilon():
    plan = plan_accuracy(2, 2, 0.1, cone_available=False)
    assert all(c.method != "kron" for c in plan.alternatives)
    assert plan.method != "kron"
    with pytest.raises(ValidationError):
        plan_accuracy(2, 2, 1.0)


def test_classify_stability():
    assert classify_stability(CertifiedInterval(0.5, 0.9, "x")) == "stable"
    assert classify_stability(CertifiedInterval(1.1, 1.5, "x")) == "unstable"
    assert classify_stability(CertifiedInterval(0.9, 1.1, "x")) == "inconclusive"


def test_certified_interval_rejects_inverted_bounds():
    with pytest.raises(ValidationError):
        CertifiedInterval(2.0, 1.0, "x")


def test_default_parameters_respect_budget():
    ms = MatrixSet.of([np.eye(4), np.eye(4)])
    params = default_parameters(ms, Budget(operator_capacity=300, dense_capacity=300))
    assert params["k"] == 4
    assert params["l"] == 2
    assert params["bruteforce_k"] == 10


def test_best_bounds_nonnegative_pair(nonnegative_pair: MatrixSet):
    result = best_bounds(nonnegative_pair, ellipsoid=FAST_ELLIPSOID)
    assert [o.method for o in result.outcomes] == list(METHODS)
    assert all(o.ok for o in result.outcomes)

    iv = result.interval
    assert iv.lower <= iv.upper
    assert iv.lower == pytest.approx((1 + 5**0.5) / 2, rel=1e-6)
    for o in result.outcomes:
        if o.interval is not None:
            assert iv.upper <= o.interval.upper
            assert iv.lower >= o.interval.lower
    assert result.lower_from in METHODS
    assert result.upper_from in METHODS
    assert result.stability == "unstable"


def test_best_bounds_records_skips(signed_pair: MatrixSet):
    result = best_bounds(signed_pair, ellipsoid=FAST_ELLIPSOID, params={"l": 40})
    assert result.outcome("sum").reason == "hypothesis_unmet"
    assert result.outcome("kron").reason == "hypothesis_unmet"
    assert result.outcome("lift").reason == "capacity"
    assert result.outcome("ellipsoid").ok
    assert result.interval is not None
    assert result.interval.lower <= result.interval.upper


def test_best_bounds_single_method(nonnegative_pair: MatrixSet):
    result = best_bounds(nonnegative_pair, methods=["lift"], params={"l": 2})
    assert len(result.outcomes) == 1
    assert result.interval.upper == pytest.approx(lift_bounds(nonnegative_pair, 2).upper)
    assert result.upper_from == "lift"


def test_best_bounds_rejects_unknown_method(nonnegative_pair: MatrixSet):
    with pytest.raises(ValidationError):
        best_bounds(nonnegative_pair, methods=["magic"])


def test_kronecker_interval_on_random_nonnegative_pairs():
    rng = np.random.default_rng(50)
    for _ in range(20):
        ms = MatrixSet.of([rng.uniform(0, 1, (3, 3)) for _ in range(2)])
        iv = kronecker_bounds(ms, 8)
        oracle = brute_force_bounds(ms, 12)
        assert iv.upper / iv.lower == pytest.approx(2 ** (1 / 8), rel=1e-12)
        assert oracle.lower <= iv.upper * (1 + 1e-9)
        assert iv.lower <= oracle.upper * (1 + 1e-9)


def test_lift_interval_on_random_signed_pairs():
    for ms in _random_sets(51, 20):
        iv = lift_bounds(ms, 1)
        oracle = brute_force_bounds(ms, 10)
        assert iv.upper / iv.lower == pytest.approx(2**0.5, rel=1e-12)
        assert oracle.lower <= iv.upper * (1 + 1e-9)
        assert iv.lower <= oracle.upper * (1 + 1e-9)


def test_bounds_scale_with_the_set():
    c = 3.7
    nonnegative = MatrixSet.of([[[0.2, 0.9], [0.4, 0.1]], [[0.5, 0.3], [0.0, 0.7]]])
    signed = _random_sets(52, 1)[0]
    for build in (lambda s: sum_bounds(s), lambda s: kronecker_bounds(s, 4)):
        a, b = build(nonnegative), build(nonnegative.scaled(c))
        assert b.upper == pytest.approx(c * a.upper, rel=1e-10)
        assert b.lower == pytest.approx(c * a.lower, rel=1e-10)
    for build in (lambda s: lift_bounds(s, 1), lambda s: lift_bounds(s, 2), lambda s: recursive_lift_bounds(s, 2)):
        a, b = build(signed), build(signed.scaled(c))
        assert b.upper == pytest.approx(c * a.upper, rel=1e-10)
        assert b.lower == pytest.approx(c * a.lower, rel=1e-10)


def test_accuracy_increases_with_the_parameter():
    for m in (2, 3, 5):
        for p in range(1, 10):
            assert kron_accuracy(m, p + 1) > kron_accuracy(m, p)
            assert lift_accuracy(m, p + 1) > lift_accuracy(m, p)
        for d in range(1, 6):
            assert recursive_accuracy(m, d + 1) > recursive_accuracy(m, d)


def test_sum_and_kronecker_intervals_overlap():
    rng = np.random.default_rng(53)
    for _ in range(5):
        ms = MatrixSet.of([rng.uniform(0, 1, (3, 3)) for _ in range(2)])
        s = sum_bounds(ms)
        for k in range(1, 7):
            kb = kronecker_bounds(ms, k)
            assert s.lower <= kb.upper * (1 + 1e-10)
            assert kb.lower <= s.upper * (1 + 1e-10)


def test_average_lower_bound_never_exceeds_product_norms():
    rng = np.random.default_rng(54)
    for i in range(50):
        m, n = 2 + i % 2, 2 + (i // 2) % 2
        ms = MatrixSet.of([rng.uniform(-1, 1, (n, n)) for _ in range(m)])
        assert lower_bound_average(ms) <= brute_force_bounds(ms, 8).upper * (1 + 1e-12)


def test_weight_tolerance_comes_from_settings(nonnegative_pair):
    weights = [0.5, 0.5005]
    with pytest.raises(ValidationError):
        lower_bound_average(nonnegative_pair, weights)
    loose = Tolerances(weight_tol=1e-3)
    assert lower_bound_average(nonnegative_pair, weights, tolerances=loose) == pytest.approx(
        spectral_radius(0.5 * nonnegative_pair.matrices[0] + 0.5005 * nonnegative_pair.matrices[1])
    )
