import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from renewcoin.errors import BelowThreshold, ScheduleExhausted, WindowTooShort
from renewcoin.estimators import (
    EstimateReport,
    block_schedule,
    linear_estimate,
    run_statistics,
    simple_weighted_estimate,
    simple_weighted_report,
    singular_evidence,
    singularity_score,
    theta_from_runs,
)
from renewcoin.ratefn import rate_function
from renewcoin.renewal import builtin_law, identity_law
from renewcoin.rng import RngStream
from renewcoin.simulate import ObservationPath, observe_coin, sample_path


class GuardedObs:
    """Exposes only what an estimator may read; anything else fails."""

    alphabet = None

    def __init__(self, x):
        self._x = x

    @property
    def x(self):
        return self._x

    @property
    def N(self):
        return len(self._x)

    def values(self):
        return self._x

    def __getattr__(self, name):
        raise AssertionError(f"estimator touched {name}")


def coin(law, N, theta, seed):
    s = RngStream(seed)
    return observe_coin(sample_path(law, N, s.child(0)), [theta], s.child(1))[0]


# schedules

def test_schedule_constant_u():
    law = identity_law(10**6)
    s = block_schedule(law, 10, 10**6)
    # w(n) = n + 1: n_i = 2 m_i + 1 and m_{i+1} = max(n_i, n_i i^3 - 1)
    assert s.blocks == ((0, 1), (1, 3), (23, 47), (1268, 2537), (162368, 324737))
    assert s.epsilons == (1.0, 1 / 8, 1 / 27, 1 / 64, 1 / 125)
    assert s.check()


@pytest.mark.parametrize("name,H", [("delta1", 10**6), ("walk-line", 10**6),
                                    ("geometric-stay", 10**6)])
def test_schedule_inequalities(name, H, law_cache):
    s = block_schedule(law_cache(name, H), 20, H)
    w = s.w
    for i, (m, n) in enumerate(s.blocks):
        assert m < n and w[n] - w[m] >= w[m]
        if i + 1 < len(s):
            assert w[s.blocks[i + 1][0]] >= n * (i + 1) ** 3
            assert s.blocks[i + 1][0] >= n


def test_schedule_square_summable_exhausts(law_cache):
    # sum u^2 is about 1.92 < 2 w(0), so not even the first block closes
    with pytest.raises(ScheduleExhausted) as exc:
        block_schedule(law_cache("kaluza", 10**6), 50, 10**6)
    assert exc.value.blocks == ()
    # here sum u^2 is about 3: one block fits, then w saturates
    with pytest.raises(ScheduleExhausted) as exc:
        block_schedule(builtin_law("kaluza", 10**6, gamma=0.6, c=0.6), 50, 10**6)
    assert len(exc.value.blocks) == 1


def test_schedule_no_block():
    with pytest.raises(ScheduleExhausted):
        block_schedule(identity_law(10), 5, 0)


# linear estimators

def test_linear_all_heads_on_constant_u():
    law = identity_law(5000)
    obs = coin(law, 5000, 1.0, 0)
    assert obs.x.min() == 1
    r = linear_estimate(obs, law, block_schedule(law, 10, 5000))
    assert r.point == 1.0
    assert all(v == 1.0 for _, v in r.trajectory)
    assert simple_weighted_estimate(obs, law, 5000) == 1.0


def test_linear_trajectory_increasing(law_cache):
    law = law_cache("delta1", 10**5)
    r = linear_estimate(coin(law, 10**5, 0.3, 1), law, block_schedule(law, 10, 10**5))
    ns = [n for n, _ in r.trajectory]
    assert ns == sorted(set(ns)) and r.diagnostics["blocks_used"] == len(ns)


def test_linear_window_too_short(law_cache):
    law = law_cache("walk-line", 10**4)
    s = block_schedule(law, 5, 10**4)
    with pytest.raises(WindowTooShort):
        linear_estimate(coin(law, 20, 0.5, 0), law, s)


def test_linear_general_psi(law_cache):
    law = law_cache("delta1", 4096)
    s = block_schedule(law, 10, 4096)
    obs = ObservationPath(x=np.zeros(4096, dtype=np.int64), alphabet=("a", "b"))
    r = linear_estimate(obs, law, s, psi_fn={"a": 0.7, "b": -1.0}, alpha_mean=0.2)
    assert r.point == pytest.approx(0.7)
    with pytest.raises(ValueError):
        linear_estimate(obs, law, s)


def test_linear_zero_bias_band(law_cache):
    law = law_cache("walk-line", 10**5)
    s = block_schedule(law, 50, 10**5)
    h = np.array([linear_estimate(coin(law, 10**5, 0.0, k), law, s).point for k in range(40)])
    assert abs(h.mean()) <= 3 * h.std(ddof=1) / math.sqrt(len(h))


def test_simple_all_heads_formula(law_cache):
    law = law_cache("kaluza", 500)
    obs = ObservationPath(x=np.ones(500, dtype=np.int8))
    u = law.u[1:301]
    assert simple_weighted_estimate(obs, law, 300) == pytest.approx(u.sum() / (u @ u))
    with pytest.raises(WindowTooShort):
        simple_weighted_estimate(obs, law, 501)


@pytest.mark.parametrize("name,theta", [("walk-line", 0.5), ("kaluza", 0.8), ("geometric-stay", 0.3)])
def test_simple_unbiased(name, theta, law_cache):
    law = law_cache(name, 2000)
    t = np.array([simple_weighted_estimate(coin(law, 2000, theta, k), law, 2000) for k in range(300)])
    assert abs(t.mean() - theta) <= 3 * t.std(ddof=1) / math.sqrt(len(t))


def test_simple_variance_bounded(law_cache):
    law = law_cache("walk-line", 10**5)
    var = []
    for n in (10**3, 10**4, 10**5):
        t = [simple_weighted_estimate(coin(law, n, 0.5, 1000 + k), law, n) for k in range(150)]
        var.append(np.var(t, ddof=1))
    assert max(var) < 1.0 and max(var) / min(var) < 3.0


def test_simple_report(law_cache):
    law = law_cache("walk-line", 4096)
    r = simple_weighted_report(coin(law, 4096, 0.5, 3), law)
    assert r.trajectory[0][0] == 2 and r.trajectory[-1][0] == 4096
    assert EstimateReport.from_dict(r.to_dict()).to_dict() == r.to_dict()


def test_estimators_read_only_observations(law_cache):
    law = law_cache("walk-line", 5000)
    x = coin(law, 5000, 0.5, 2).x
    g = GuardedObs(x)
    linear_estimate(g, law, block_schedule(law, 10, 5000))
    simple_weighted_estimate(g, law, 5000)
    run_statistics(g)
    singularity_score(g)


# runs

def naive_runs(x, n_min):
    N = len(x)
    best, cur = 0, 0
    for v in x:
        cur = cur + 1 if v == 1 else 0
        best = max(best, cur)
    upper = max(N - best, n_min)
    R_hat = 0.0
    for n in range(n_min, upper + 1):
        r = 0
        while n + r < N and x[n + r] == 1:
            r += 1
        R_hat = max(R_hat, r / math.log2(n))
    return best, R_hat


@given(st.lists(st.sampled_from([1, 1, 1, -1]), min_size=16, max_size=300), st.integers(16, 40))
def test_runs_against_naive(xs, n_min):
    x = np.array(xs, dtype=np.int8)
    if len(x) < n_min:
        with pytest.raises(WindowTooShort):
            run_statistics(ObservationPath(x=x), n_min)
        return
    rs = run_statistics(ObservationPath(x=x), n_min)
    L, R = naive_runs(xs, n_min)
    assert rs.L_N == L
    assert rs.R_hat == pytest.approx(R, abs=1e-12)


def test_runs_all_heads():
    rs = run_statistics(ObservationPath(x=np.ones(1000, dtype=np.int8)))
    assert rs.L_N == 1000 and rs.R_hat == pytest.approx(936 / 6)


def test_runs_small_n_min():
    with pytest.raises(WindowTooShort):
        run_statistics(ObservationPath(x=np.ones(100, dtype=np.int8)), 8)


def test_theta_from_runs_round_trip():
    law = builtin_law("delayed-kaluza", 2**15, gamma=0.75, u1=0.9)
    rf = rate_function(law)
    for phi in (0.93, 0.96, 1.0):
        R = 0.25 / (1 - rf.psi_value(phi))
        est = theta_from_runs(R, 0.75, law)
        assert est.phi == pytest.approx(phi, abs=1e-4)
        assert est.theta == pytest.approx(2**phi - 1, abs=1e-4)


def test_theta_from_runs_clips_and_rejects():
    law = builtin_law("delayed-kaluza", 2**15, gamma=0.75, u1=0.9)
    with pytest.raises(BelowThreshold):
        theta_from_runs(1.0, 0.75, law)
    big = theta_from_runs(10.0, 0.75, law)
    assert big.clipped and big.theta == 1.0


def test_score_determinism_and_errors(law_cache):
    law = law_cache("kaluza", 4096)
    a = singularity_score(coin(law, 4096, 0.5, 9))
    assert a == singularity_score(coin(law, 4096, 0.5, 9))
    with pytest.raises(WindowTooShort):
        singularity_score(ObservationPath(x=np.ones(1000, dtype=np.int8)))
    assert singular_evidence(1.3) and not singular_evidence(1.2)


@given(st.integers(0, 2**32))
def test_score_monotone_under_coupling(seed):
    law = builtin_law("delayed-kaluza", 4096, gamma=0.75, u1=0.9)
    s = RngStream(seed)
    path = sample_path(law, 4096, s.child(0))
    obs = observe_coin(path, [0, 0.2, 0.5, 1], s.child(1))
    scores = [singularity_score(o) for o in obs]
    assert scores == sorted(scores)
