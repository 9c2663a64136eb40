"""Renewal laws: construction, conversion between f and u, transforms, statistics.

Arrays are stored with index alignment, so ``law.f[n]`` is P[T = n] (with
``f[0] = 0``) and ``law.u[n]`` is P[renewal at n].  Public conversion
functions take and return the conventional slices f_1..f_H.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy import special, stats

from . import series
from .errors import (
    HorizonTooShort,
    InvalidPmf,
    KaluzaViolation,
    NotARenewalSequence,
    UnknownLaw,
)

PMF_TOL = 1e-12
F_NEG_TOL = 1e-10
KALUZA_SLACK = 1e-12

TAIL_KINDS = ("none", "power-law", "geometric", "defective")


@dataclass(frozen=True)
class TailModel:
    """What happens beyond the stored horizon.

    kind
        ``power-law``: u_n ~ constant * n**-exponent on multiples of
        `period`; for exponent < 1 the inter-arrival tail is regularly
        varying with index exponent - 1.
        ``geometric``: f_n proportional to ratio**n beyond the horizon.
        ``defective``: f_n = 0 beyond the horizon; the residual mass
        1 - sum(f) is the probability of never renewing again.
        ``none``: unknown.
    """

    kind: str = "none"
    exponent: float = None
    constant: float = None
    period: int = 1
    ratio: float = None

    def __post_init__(self):
        if self.kind not in TAIL_KINDS:
            raise ValueError(f"unknown tail kind {self.kind!r}")

    def to_dict(self):
        out = {"kind": self.kind}
        for key in ("exponent", "constant", "ratio"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        if self.period != 1:
            out["period"] = self.period
        return out

    @classmethod
    def from_dict(cls, d):
        d = d or {}
        return cls(
            kind=d.get("kind", "none"),
            exponent=d.get("exponent"),
            constant=d.get("constant"),
            period=int(d.get("period", 1)),
            ratio=d.get("ratio"),
        )


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RenewalLaw:
    """Inter-arrival pmf and renewal sequence up to a common horizon."""

    f: np.ndarray
    u: np.ndarray
    tail: TailModel = field(default_factory=TailModel)
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        f = _frozen(self.f)
        u = _frozen(self.u)
        if f.shape != u.shape or f.ndim != 1 or len(f) < 2:
            raise InvalidPmf("f and u must be 1-d arrays of equal length H+1 >= 2")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "u", u)
        _check_pmf(f[1:])
        if f[0] != 0.0:
            raise InvalidPmf("f_0 must be 0")
        if abs(u[0] - 1.0) > PMF_TOL:
            raise NotARenewalSequence(0, u[0] - 1.0)
        if u.min() < -PMF_TOL or u.max() > 1.0 + PMF_TOL:
            raise NotARenewalSequence(int(np.argmax((u < 0) | (u > 1))), float(u.min()))

    @property
    def horizon(self):
        return len(self.f) - 1

    @property
    def mass(self):
        """Stored inter-arrival mass sum_{n<=H} f_n."""
        return float(self.f.sum())

    @property
    def residual(self):
        return max(0.0, 1.0 - self.mass)

    @property
    def u1(self):
        return float(self.u[1])

    @property
    def u_max(self):
        """max{u_i : i >= 1} over the stored horizon."""
        return float(self.u[1:].max())

    def truncated(self, H):
        """The same law restricted to horizon H (tail model kept)."""
        if H >= self.horizon:
            return self
        return replace(self, f=self.f[: H + 1], u=self.u[: H + 1])

    def to_dict(self, arrays=True):
        d = {"label": self.label, "horizon": self.horizon, "tail": self.tail.to_dict()}
        if arrays:
            d["f"] = self.f[1:].tolist()
            d["u"] = self.u.tolist()
        if self.meta:
            d["meta"] = dict(self.meta)
        return d

    @classmethod
    def from_dict(cls, d):
        f = np.concatenate([[0.0], np.asarray(d["f"], dtype=float)])
        u = np.asarray(d["u"], dtype=float)
        if len(f) != d.get("horizon", len(f) - 1) + 1:
            raise InvalidPmf("horizon does not match array length")
        return cls(f=f, u=u, tail=TailModel.from_dict(d.get("tail")),
                   label=d.get("label", ""), meta=dict(d.get("meta", {})))

    def __repr__(self):
        return (f"RenewalLaw(label={self.label!r}, horizon={self.horizon}, "
                f"mass={self.mass:.6f}, tail={self.tail.kind})")


def _check_pmf(f):
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise InvalidPmf("pmf contains non-finite entries")
    if len(f) and f.min() < 0:
        i = int(np.argmin(f))
        raise InvalidPmf(f"negative mass f_{i + 1} = {f[i]:.3e}")
    if f.sum() > 1.0 + PMF_TOL:
        raise InvalidPmf(f"total mass {f.sum():.15f} exceeds 1")


def _pad_f(f, H):
    """Index-aligned f of length H+1 from f_1.. values."""
    f = np.asarray(f, dtype=float)
    out = np.zeros(H + 1)
    k = min(len(f), H)
    out[1 : k + 1] = f[:k]
    return out


def _lattice_u(f_al, u):
    """Zero u off the lattice spanned by the support of f (FFT round-off)."""
    nz = np.flatnonzero(f_al)
    d = int(np.gcd.reduce(nz)) if len(nz) else 1
    if d > 1:
        u[np.arange(len(u)) % d != 0] = 0.0
    return u


def u_from_f(f, H):
    """Renewal sequence u_0..u_H for the inter-arrival pmf f_1, f_2, ...

    >>> u_from_f([0.5, 0.25, 0.125], 3).tolist()
    [1.0, 0.5, 0.5, 0.5]
    """
    _check_pmf(f)
    f_al = _pad_f(f, H)
    return _lattice_u(f_al, series.renewal_u_from_f(f_al, H))


def f_from_u(u):
    """Inter-arrival pmf f_1..f_H with the given renewal sequence u_0..u_H.

    Entries down to -1e-10 are treated as rounding and clamped to 0;
    anything more negative means u is not a renewal sequence.
    """
    u = np.asarray(u, dtype=float)
    if len(u) < 2 or abs(u[0] - 1.0) > PMF_TOL:
        raise NotARenewalSequence(0, float(u[0]) - 1.0 if len(u) else float("nan"))
    if u.min() < 0 or u.max() > 1.0 + PMF_TOL:
        bad = int(np.flatnonzero((u < 0) | (u > 1.0 + PMF_TOL))[0])
        raise NotARenewalSequence(bad, float(u[bad]))
    f = series.renewal_f_from_u(u)[1:]
    neg = np.flatnonzero(f < -F_NEG_TOL)
    if len(neg):
        i = int(neg[0])
        raise NotARenewalSequence(i + 1, float(f[i]))
    return np.clip(f, 0.0, None)


def law_from_f(f, H, tail=None, label="", meta=None):
    f_al = _pad_f(f, H)
    _check_pmf(f_al[1:])
    u = _lattice_u(f_al, series.renewal_u_from_f(f_al, H))
    return RenewalLaw(f=f_al, u=np.clip(u, 0.0, 1.0), tail=tail or TailModel(),
                      label=label, meta=meta or {})


def law_from_u(u, tail=None, label="", meta=None):
    u = np.asarray(u, dtype=float)
    f = f_from_u(u)
    return RenewalLaw(f=np.concatenate([[0.0], f]), u=u, tail=tail or TailModel(),
                      label=label, meta=meta or {})


def check_kaluza(u):
    """Raise KaluzaViolation unless u_{k-1} u_{k+1} >= u_k^2 for all k."""
    u = np.asarray(u, dtype=float)
    lhs = u[:-2] * u[2:]
    rhs = u[1:-1] ** 2
    bad = np.flatnonzero(lhs < rhs * (1.0 - KALUZA_SLACK))
    if len(bad):
        k = int(bad[0]) + 1
        raise KaluzaViolation(k, float(lhs[k - 1]), float(rhs[k - 1]))


def kaluza_law(u, tail=None, label="kaluza"):
    """Renewal law of a log-convex sequence with u_0 = 1."""
    u = np.asarray(u, dtype=float)
    if abs(u[0] - 1.0) > PMF_TOL:
        raise NotARenewalSequence(0, float(u[0]) - 1.0)
    check_kaluza(u)
    return law_from_u(u, tail=tail, label=label)


def kaluza_power_law(gamma, c, H):
    """Law with u_n = c * n**-gamma exactly for 1 <= n <= H.

    Log-convexity holds automatically for k >= 2; the k = 1 condition
    u_0 u_2 >= u_1^2 forces c <= 2**-gamma.
    """
    if not gamma > 0:
        raise InvalidPmf("gamma must be positive")
    if not 0 < c <= 1:
        raise InvalidPmf("c must lie in (0, 1]")
    if c > 2.0 ** -gamma * (1.0 + KALUZA_SLACK):
        raise KaluzaViolation(1, c * 2.0 ** -gamma, c * c)
    n = np.arange(1, H + 1, dtype=float)
    u = np.concatenate([[1.0], c * n ** -gamma])
    tail = TailModel("power-law", exponent=float(gamma), constant=float(c))
    return kaluza_law(u, tail=tail, label=f"kaluza(gamma={gamma:g},c={c:.6g})")


def geometric_stay_law(r, H):
    """Geometric inter-arrivals f_n = (1-r) r**(n-1); u_n = 1 - r for n >= 1."""
    if not 0 <= r < 1:
        raise InvalidPmf("r must lie in [0, 1)")
    n = np.arange(1, H + 1, dtype=float)
    f = (1.0 - r) * r ** (n - 1)
    tail = TailModel("geometric", ratio=float(r)) if r > 0 else TailModel("defective")
    return law_from_f(f, H, tail=tail, label=f"geometric-stay(r={r:g})")


def walk_line_law(H):
    """Return times of simple random walk on the integers.

    u_{2n} = binom(2n, n) 4**-n and f_{2n} = u_{2n} / (2n - 1), both exact.
    """
    u = np.zeros(H + 1)
    f = np.zeros(H + 1)
    k = np.arange(0, H // 2 + 1)
    # u_{2k} / u_{2k-2} = (2k - 1) / (2k): a product of exact ratios.
    u[::2] = np.cumprod(np.concatenate([[1.0], (2 * k[1:] - 1) / (2.0 * k[1:])]))
    f[2::2] = u[2::2] / (2 * k[1:] - 1)
    tail = TailModel("power-law", exponent=0.5, constant=math.sqrt(2 / math.pi), period=2)
    return RenewalLaw(f=f, u=u, tail=tail, label="walk-line")


def delay_law(law, p):
    """Hold at the origin with probability p before each excursion.

    f'_1 = p + (1-p) f_1 and f'_n = (1-p) f_n for n >= 2.
    """
    if not 0 <= p < 1:
        raise InvalidPmf("delay probability must lie in [0, 1)")
    if p == 0:
        return law
    f = (1.0 - p) * law.f
    f[1] += p
    tail = law.tail
    if tail.kind == "power-law":
        tail = replace(tail, constant=None)
    meta = dict(law.meta, delay=p)
    return law_from_f(f[1:], law.horizon, tail=tail,
                      label=f"delay({law.label},p={p:.6g})", meta=meta)


def delay_to_u1(law, u1):
    """Delay `law` so that the delayed law has u'_1 = f'_1 = u1."""
    f1 = law.f[1]
    if not f1 <= u1 < 1:
        raise InvalidPmf(f"target u1={u1} must lie in [f_1={f1:.6g}, 1)")
    return delay_law(law, (u1 - f1) / (1.0 - f1))


def compose_laws(law_a, law_b, H):
    """Law with inter-arrival generating function F_A(F_B(s)), to degree H.

    This is the first-return law of the product chain that advances the
    first chain one step at each return of the second.  The mass lost to
    truncation is recorded in ``meta['discarded_mass']``; grow H until it
    is negligible.
    """
    fa = law_a.f
    fb = np.zeros(H + 1)
    k = min(H, law_b.horizon)
    fb[: k + 1] = law_b.f[: k + 1]
    f3 = np.clip(series.compose(fa, fb, H), 0.0, None)
    f3[0] = 0.0
    # F_B(s)^j lives on the lattice of B's support; clear FFT round-off off it.
    d = int(np.gcd.reduce(np.flatnonzero(fb))) if fb.any() else 1
    if d > 1:
        f3[np.arange(H + 1) % d != 0] = 0.0
    total = float(np.polynomial.polynomial.polyval(law_b.mass, fa))
    discarded = max(0.0, total - float(f3.sum()))
    if f3.sum() > 1.0:
        f3 /= f3.sum()
    tail = TailModel()
    ta, tb = law_a.tail, law_b.tail
    if (ta.kind == tb.kind == "power-law" and ta.exponent < 1 and tb.exponent < 1):
        g = 1.0 - (1.0 - ta.exponent) * (1.0 - tb.exponent)
        tail = TailModel("power-law", exponent=g, period=math.lcm(ta.period, tb.period))
    meta = {"discarded_mass": discarded}
    return law_from_f(f3[1:], H, tail=tail, label=f"({law_a.label})o({law_b.label})", meta=meta)


def identity_law(H):
    """The delta_1 law: a renewal at every step, F(s) = s."""
    return law_from_f([1.0], H, tail=TailModel(), label="delta1")


def check_renewal_identity(law, indices=None):
    """Max relative residual |u_n - sum_k f_k u_{n-k}| / u_n over `indices`.

    Computed with direct dot products, independently of the FFT solver.
    """
    H = law.horizon
    idx = range(1, H + 1) if indices is None else indices
    worst = 0.0
    f, u = law.f, law.u
    for n in idx:
        s = float(np.dot(f[1 : n + 1], u[n - 1 :: -1]))
        scale = max(abs(u[n]), s, 1e-300)
        worst = max(worst, abs(u[n] - s) / scale)
    return worst


def progression_gap(u, r, k, m):
    """sum_j u_{jk} - sum_j u_{r+jk} over j = 0..m; nonnegative for renewal u."""
    u = np.asarray(u)
    j = np.arange(m + 1)
    return float(u[j * k].sum() - u[r + j * k].sum())


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    fit_range: tuple
    intercept: float = 0.0


def loglog_slope(y, lo, hi, points=60, n0=0):
    """OLS slope of log y_n against log n at geometrically spaced n in [lo, hi].

    Nonpositive entries are skipped (periodic laws vanish off the lattice).
    `n0` is the index of y[0].
    """
    lo, hi = max(1, int(lo)), int(hi)
    ns = np.unique(np.geomspace(lo, hi, points).astype(int))
    vals = np.asarray(y)[ns - n0]
    ok = vals > 0
    if ok.sum() < 3:
        # Periodic sequences: slide onto the support.
        ns = np.unique(np.concatenate([ns, ns + 1]))
        ns = ns[ns <= hi]
        vals = np.asarray(y)[ns - n0]
        ok = vals > 0
    res = stats.linregress(np.log(ns[ok]), np.log(vals[ok]))
    return SlopeFit(float(res.slope), float(res.stderr), (lo, hi), float(res.intercept))


@dataclass(frozen=True, eq=False)
class LawStats:
    U: np.ndarray
    w: np.ndarray
    sum_sq_divergent: bool
    note: str
    sum_sq: float
    sum_sq_from1: float
    theta_s: float
    tail_slope_fit: SlopeFit


def _sum_sq_tail(law):
    """(divergent?, tail bound or None, note) for sum_{n>H} u_n^2."""
    t, H = law.tail, law.horizon
    if t.kind == "power-law":
        g = t.exponent
        if 2 * g <= 1:
            return True, None, f"power-law tail exponent {g:g} <= 1/2"
        c = t.constant
        note = ""
        if c is None:
            tail_u = law.u[max(1, H - 4 * t.period) :]
            c = float(tail_u.max()) * H ** g
            note = " (constant estimated from stored tail)"
        bound = c * c * H ** (1 - 2 * g) / ((2 * g - 1) * t.period)
        return False, bound, f"integral tail bound{note}"
    if t.kind == "geometric" or law.residual <= PMF_TOL:
        return True, None, "proper law with geometric or finite tail: u_n -> 1/E[T] > 0"
    if t.kind == "defective":
        total_u = 1.0 / law.residual
        return False, max(0.0, total_u - float(law.u.sum())), "transient: bounded by remaining sum of u"
    return None, None, "undetermined beyond horizon"


def law_stats(law):
    """Partial sums, square-summability verdict and theta_s of a law."""
    u = law.u
    U = np.cumsum(u)
    w = np.cumsum(u * u)
    divergent, bound, note = _sum_sq_tail(law)
    s_all = float(w[-1]) + (bound or 0.0)
    s_1 = s_all - 1.0
    if divergent:
        theta_s = 0.0
    else:
        # theta_s = (sum_{n>=1} u_n^2)^(-1/2) ^ 1; with an undetermined
        # verdict this uses the stored sum and is an upper bound.
        theta_s = 1.0 if s_1 <= 0 else min(1.0, s_1 ** -0.5)
    H = law.horizon
    fit = loglog_slope(u, max(1, H // 100), H)
    return LawStats(U=U, w=w, sum_sq_divergent=divergent, note=note, sum_sq=s_all,
                    sum_sq_from1=s_1, theta_s=theta_s, tail_slope_fit=fit)


BUILTIN_LAWS = ("walk-line", "geometric-stay", "kaluza", "walk-line-composed",
                "loglog", "delayed-kaluza", "delta1")


def builtin_law(name, H, **params):
    """Named law to horizon H.

    walk-line                     simple random walk on Z
    geometric-stay(r=0.5)         f_n = (1-r) r^(n-1)
    kaluza(gamma=0.75, c=2^-gamma)  u_n = c n^-gamma
    walk-line-composed            walk-line composed with itself (U_n ~ n^1/4)
    loglog                        kaluza(1, 1/2) composed with itself (U_n ~ log log n)
    delayed-kaluza(gamma, c, u1)  kaluza law delayed until u_1 = u1
    delta1                        renewal at every step
    """
    if name == "walk-line":
        return walk_line_law(H)
    if name == "geometric-stay":
        return geometric_stay_law(params.get("r", 0.5), H)
    if name == "kaluza":
        g = params.get("gamma", 0.75)
        return kaluza_power_law(g, params.get("c", 2.0 ** -g), H)
    if name == "walk-line-composed":
        w = walk_line_law(H)
        law = compose_laws(w, w, H)
        return replace(law, label="walk-line-composed")
    if name == "loglog":
        base = kaluza_power_law(1.0, 0.5, H)
        law = compose_laws(base, base, H)
        return replace(law, label="loglog", tail=TailModel())
    if name == "delayed-kaluza":
        g = params.get("gamma", 0.75)
        base = kaluza_power_law(g, params.get("c", 2.0 ** -g), H)
        law = delay_to_u1(base, params.get("u1", 0.9))
        return replace(law, label=f"delayed-kaluza(gamma={g:g},u1={law.u1:.6g})")
    if name == "delta1":
        return identity_law(H)
    raise UnknownLaw(f"unknown law {name!r}; choose from {', '.join(BUILTIN_LAWS)}")


def require_horizon(law, H, what="operation"):
    if law.horizon < H:
        raise HorizonTooShort(f"{what} needs horizon >= {H}, law has {law.horizon}")
