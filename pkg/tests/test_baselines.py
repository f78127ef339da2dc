import numpy as np
import pytest

from dasgd.baselines import ErmConfig, erm_train, evaluate_policy, saa_quantile
from dasgd.core import Dataset, TrainState
from dasgd.costs import NewsvendorParams, cost_kinked

P = NewsvendorParams(1.0, 0.2, 0.1)


def quantile_spacing(ys, p):
    """Gap between the quantile order statistic and its neighbors."""
    ys = np.sort(np.asarray(ys, dtype=float))
    n = ys.size
    k = int(np.ceil(p.critical_ratio * n - 1e-12))  # 1-indexed
    gaps = []
    if k >= 2:
        gaps.append(ys[k - 1] - ys[k - 2])
    if k < n:
        gaps.append(ys[k] - ys[k - 1])
    return max(gaps)


def intercept_only(n, seed):
    rng = np.random.default_rng(seed)
    ys = rng.normal(1.0, 0.5, n)
    return Dataset(np.zeros((n, 0)), ys)


class TestSaaQuantile:
    def test_small_integer_example(self):
        assert saa_quantile([1, 2, 3, 4, 5], P) == 5.0

    def test_single_element(self):
        assert saa_quantile([3.7], P) == 3.7

    def test_symmetric_costs_give_median(self):
        p_sym = NewsvendorParams(1.0, 1.0, 0.1)
        assert saa_quantile([5, 1, 9, 2, 4], p_sym) == 4.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            saa_quantile([], P)

    def test_is_pinball_minimizer(self):
        # oracle: the returned value minimizes the empirical kinked loss,
        # and it is the smallest order statistic doing so
        rng = np.random.default_rng(1)
        for _ in range(50):
            ys = rng.normal(0, 1, int(rng.integers(2, 40)))
            q = saa_quantile(ys, P)
            loss = lambda z: float(np.mean(cost_kinked(z, ys, P)))
            best = min(loss(v) for v in ys)
            assert loss(q) == pytest.approx(best, abs=1e-12)
            smaller = [v for v in ys if v < q]
            if smaller:
                assert loss(max(smaller)) > loss(q) - 1e-12


class TestErmTrain:
    def test_single_sample_orders_its_demand(self):
        data = Dataset(np.zeros((1, 0)), np.array([2.5]))
        st = erm_train(data, P, ErmConfig(iterations=20000))
        assert st.intercept == pytest.approx(2.5, abs=5e-3)

    def test_intercept_only_matches_quantile(self):
        for n, seed in ((11, 0), (101, 1)):
            data = intercept_only(n, seed)
            st = erm_train(data, P, ErmConfig(iterations=60000))
            target = saa_quantile(data.y, P)
            assert abs(st.intercept - target) <= quantile_spacing(data.y, P)

    def test_symmetric_costs_hit_median(self):
        p_sym = NewsvendorParams(1.0, 1.0, 0.1)
        data = intercept_only(51, 5)
        st = erm_train(data, p_sym, ErmConfig(iterations=60000))
        assert abs(st.intercept - np.median(data.y)) <= quantile_spacing(data.y, p_sym)

    def test_l1_never_grows_coefficients(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(0, 1, (40, 3))
        y = X @ np.array([0.8, -0.5, 0.3]) + 1.0 + rng.normal(0, 0.2, 40)
        data = Dataset(X, y)
        norms = []
        for w in (0.0, 0.05, 0.1, 0.2, 0.5):
            st = erm_train(data, P, ErmConfig(l1_weight=w, iterations=40000))
            norms.append(np.abs(st.coeffs).sum())
        for a, b in zip(norms, norms[1:]):
            assert b <= a + 1e-3

    def test_rejects_bad_config(self):
        with pytest.raises(ValueError):
            ErmConfig(l1_weight=-1.0)
        with pytest.raises(ValueError):
            ErmConfig(iterations=0)


class TestEvaluatePolicy:
    def test_perfect_policy_costs_nothing(self):
        X = np.array([[0.5], [0.2]])
        y = np.array([1.5, 1.2])
        # policy z = x + 1 matches both labels exactly
        st = TrainState(np.array([1.0, 1.0]), 0.0)
        assert evaluate_policy(st, Dataset(X, y), P) == 0.0

    def test_constant_order_hand_computed(self):
        ys = np.array([0.0, 1.0, 3.0])
        data = Dataset(np.zeros((3, 0)), ys)
        st = TrainState(np.array([1.0]), 0.0)  # intercept-only, orders 1.0
        # costs: c_h*1, 0, c_b*2 -> mean = (0.2 + 0 + 2)/3
        assert evaluate_policy(st, data, P) == pytest.approx((0.2 + 0.0 + 2.0) / 3.0)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(0, 1, (20, 2))
        y = rng.normal(1, 0.3, 20)
        st = TrainState(np.array([0.5, -0.2, 1.0]), 0.0)
        perm = rng.permutation(20)
        a = evaluate_policy(st, Dataset(X, y), P)
        b = evaluate_policy(st, Dataset(X[perm], y[perm]), P)
        assert a == pytest.approx(b, abs=1e-14)
