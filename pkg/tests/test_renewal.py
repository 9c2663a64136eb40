import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from renewcoin.errors import InvalidPmf, KaluzaViolation, NotARenewalSequence, UnknownLaw
from renewcoin.renewal import (
    BUILTIN_LAWS,
    RenewalLaw,
    TailModel,
    builtin_law,
    check_renewal_identity,
    compose_laws,
    delay_law,
    f_from_u,
    identity_law,
    kaluza_law,
    kaluza_power_law,
    law_from_f,
    law_stats,
    progression_gap,
    loglog_slope,
    u_from_f,
)

pmf_lists = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30).map(
    lambda v: (np.asarray(v) / max(1.0, 1.01 * sum(v))).tolist())


# u_from_f / f_from_u

def test_delta1_renews_every_step():
    assert np.array_equal(u_from_f([1.0], 10), np.ones(11))


def test_geometric_halves():
    f = 0.5 ** np.arange(1, 41)
    u = u_from_f(f, 40)
    assert u[0] == 1.0
    assert np.allclose(u[1:], 0.5, atol=1e-14)


def test_walk_truncation():
    u = u_from_f([0.0, 0.5, 0.0, 0.125], 4)
    assert u[2] == pytest.approx(0.5)
    assert u[4] == pytest.approx(0.375)


def test_u_from_f_rejects_bad_pmf():
    with pytest.raises(InvalidPmf):
        u_from_f([0.5, -0.1], 5)
    with pytest.raises(InvalidPmf):
        u_from_f([0.7, 0.4], 5)


def test_f_from_u_examples():
    assert np.allclose(f_from_u(np.ones(8)), [1, 0, 0, 0, 0, 0, 0])
    u = np.concatenate([[1.0], np.full(20, 0.5)])
    assert np.allclose(f_from_u(u), 0.5 ** np.arange(1, 21), atol=1e-15)


def test_f_from_u_reports_first_negative_index():
    with pytest.raises(NotARenewalSequence) as exc:
        f_from_u([1.0, 0.9, 0.1, 0.1])
    assert exc.value.index == 2
    assert exc.value.value == pytest.approx(0.1 - 0.81)


@given(pmf_lists, st.integers(1, 200))
def test_round_trip(f, H):
    u = u_from_f(f, H)
    g = f_from_u(u)
    ref = np.zeros(H)
    k = min(len(f), H)
    ref[:k] = f[:k]
    assert np.allclose(g, ref, atol=1e-10)


# Kaluza constructor

def test_kaluza_critical_constant_is_valid():
    law = kaluza_power_law(0.75, 2 ** -0.75, 10**5)
    assert law.f.min() >= 0.0
    assert law.tail.exponent == 0.75 and law.tail.constant == pytest.approx(2 ** -0.75)
    assert np.allclose(law.u[1:5], 2 ** -0.75 * np.arange(1, 5) ** -0.75)


def test_kaluza_violation():
    with pytest.raises(KaluzaViolation) as exc:
        kaluza_power_law(0.75, 0.7, 100)
    assert exc.value.index == 1


def test_geometric_u_boundary_case_is_defective():
    r = 0.6
    law = kaluza_law(r ** np.arange(30))
    assert law.f[1] == pytest.approx(r)
    assert np.allclose(law.f[2:], 0.0, atol=1e-15)
    assert law.residual == pytest.approx(1 - r)


@given(st.floats(0.05, 0.99), st.floats(0.01, 1.0))
def test_kaluza_soundness(gamma, frac):
    law = kaluza_power_law(gamma, frac * 2.0 ** -gamma, 2000)
    assert law.f.min() >= 0.0
    assert check_renewal_identity(law, range(1, 2001, 37)) < 1e-12


# delay

def test_delay_zero_is_identity(law_cache):
    law = law_cache("kaluza", 1000)
    assert delay_law(law, 0.0) is law


def test_delay_one_rejected(law_cache):
    with pytest.raises(InvalidPmf):
        delay_law(law_cache("kaluza", 100), 1.0)


def test_delay_near_one_tends_to_delta1(law_cache):
    d = delay_law(law_cache("kaluza", 200), 1 - 1e-9)
    assert d.f[1] == pytest.approx(1.0, abs=1e-8)


def test_delay_keeps_power_law_order(law_cache):
    base = law_cache("kaluza", 10**5)
    d = delay_law(base, 0.8)
    assert d.u1 == pytest.approx(0.8 + 0.2 * base.f[1])
    fit = loglog_slope(d.u, 1e3, 1e5)
    assert abs(fit.slope + 0.75) <= 0.05


@given(st.floats(0.0, 0.99))
def test_delay_identity_and_mass(p):
    base = kaluza_power_law(0.6, 0.5, 500)
    d = delay_law(base, p)
    assert d.mass == pytest.approx(p + (1 - p) * base.mass, abs=1e-12)
    assert check_renewal_identity(d) < 1e-12


# composition

def test_compose_with_delta1_is_identity_on_both_sides(law_cache):
    a = law_cache("kaluza", 500)
    one = identity_law(500)
    assert np.allclose(compose_laws(a, one, 500).f, a.f, atol=1e-15)
    assert np.allclose(compose_laws(one, a, 500).f, a.f, atol=1e-15)


@given(pmf_lists)
def test_compose_associates_with_delta1(f):
    H = 60
    law = law_from_f(f, H)
    one = identity_law(H)
    assert np.allclose(compose_laws(law, one, H).f, law.f, atol=1e-13)
    assert np.allclose(compose_laws(one, law, H).f, law.f, atol=1e-13)


def test_compose_matches_generating_function_at_a_point():
    a = law_from_f([0.2, 0.3, 0.1], 50)
    b = law_from_f([0.5, 0.25], 50)
    c = compose_laws(a, b, 50)
    s = 0.7
    Fb = 0.5 * s + 0.25 * s**2
    Fa = 0.2 * Fb + 0.3 * Fb**2 + 0.1 * Fb**3
    assert np.polynomial.polynomial.polyval(s, c.f) == pytest.approx(Fa, rel=1e-12)
    assert c.meta["discarded_mass"] < 1e-12


def test_walk_composed_quarter_growth(law_cache):
    law = law_cache("walk-line-composed", 10**5)
    fit = loglog_slope(np.cumsum(law.u), 1e2, 1e5)
    assert 0.20 <= fit.slope <= 0.30
    assert law.tail.exponent == pytest.approx(0.75)


def test_loglog_doubling_increments(law_cache):
    law = law_cache("loglog", 2**16)
    U = np.cumsum(law.u)
    inc = np.diff([U[2 ** (2**k)] for k in range(1, 5)])
    assert inc.min() > 0 and inc.max() <= 4 * inc.min()
    # u_n <= C / n
    n = np.arange(1, law.horizon + 1)
    assert (law.u[1:] * n).max() < 1.0


# statistics

def test_stats_delta1_divergent():
    st_ = law_stats(identity_law(100))
    assert st_.sum_sq_divergent is True and st_.theta_s == 0.0


def test_stats_walk_line_divergent(law_cache):
    st_ = law_stats(law_cache("walk-line", 10**4))
    assert st_.sum_sq_divergent is True and st_.theta_s == 0.0
    assert np.all(np.diff(st_.U) >= 0) and np.all(np.diff(st_.w) >= 0)


def test_stats_kaluza_square_sum(law_cache):
    c = 2 ** -0.75
    st_ = law_stats(law_cache("kaluza", 10**5))
    assert st_.sum_sq_divergent is False
    assert st_.sum_sq == pytest.approx(1 + c * c * special.zeta(1.5), abs=1e-4)
    # theta_s counts n >= 1 only, and that sum is below 1 here
    assert st_.sum_sq_from1 == pytest.approx(c * c * special.zeta(1.5), abs=1e-4)
    assert st_.theta_s == 1.0


def test_stats_theta_s_below_one():
    c = 0.6
    st_ = law_stats(kaluza_power_law(0.6, c, 10**4))
    expect = (c * c * special.zeta(1.2)) ** -0.5
    assert st_.theta_s == pytest.approx(expect, rel=1e-5)
    assert st_.theta_s < 1.0


def test_stats_without_tail_is_undetermined():
    law = law_from_f([0.3, 0.3], 20, tail=TailModel())
    assert law_stats(law).sum_sq_divergent is None or law.residual > 0


# builtin catalogue

def test_builtin_walk_line_values(law_cache):
    law = law_cache("walk-line", 1000)
    assert law.u[2] == 0.5 and law.u[4] == 0.375
    n = 250
    assert law.u[2 * n] == pytest.approx(special.comb(2 * n, n, exact=True) / 4**n, rel=1e-13)


def test_builtin_geometric_stay(law_cache):
    law = law_cache("geometric-stay", 100)
    assert np.allclose(law.u[1:], 0.5, atol=1e-14)


def test_builtin_loglog_is_composition(law_cache):
    base = kaluza_power_law(1.0, 0.5, 256)
    ref = compose_laws(base, base, 256)
    assert np.allclose(law_cache("loglog", 256).f, ref.f)


def test_unknown_law():
    with pytest.raises(UnknownLaw):
        builtin_law("planar-walk", 10)


@pytest.mark.parametrize("name", BUILTIN_LAWS)
def test_builtins_satisfy_identity(name, law_cache):
    law = law_cache(name, 4096)
    assert check_renewal_identity(law) < 1e-12
    assert law.u[0] == 1.0 and law.u.min() >= 0 and law.u.max() <= 1


# partial sums of u along an arithmetic progression peak at offset 0

@given(st.sampled_from(["walk-line", "kaluza", "loglog", "delayed-kaluza", "geometric-stay"]),
       st.integers(0, 300), st.integers(1, 60), st.integers(0, 60))
def test_progression_inequality(name, r, k, m):
    from tests.conftest import cached_law
    u = cached_law(name, 4096).u
    if r + m * k <= 4096:
        assert progression_gap(u, r, k, m) >= -1e-12


# serialization

def test_law_dict_round_trip(law_cache):
    law = law_cache("delayed-kaluza", 500)
    back = RenewalLaw.from_dict(law.to_dict())
    assert np.array_equal(back.f, law.f) and np.array_equal(back.u, law.u)
    assert back.tail == law.tail and back.label == law.label


def test_law_arrays_are_read_only(law_cache):
    law = law_cache("kaluza", 50)
    with pytest.raises(ValueError):
        law.u[1] = 0.0


def test_invalid_law_rejected():
    with pytest.raises(NotARenewalSequence):
        RenewalLaw(f=[0.0, 0.5], u=[0.9, 0.5])
    with pytest.raises(InvalidPmf):
        RenewalLaw(f=[0.0, 1.5], u=[1.0, 1.0])


def test_slope_fit_on_exact_power():
    y = np.concatenate([[1.0], 3.0 * np.arange(1, 10**4 + 1) ** -0.4])
    fit = loglog_slope(y, 10, 10**4)
    assert fit.slope == pytest.approx(-0.4, abs=1e-12)
    assert math.exp(fit.intercept) == pytest.approx(3.0)
