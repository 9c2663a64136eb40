"""Renewal paths, coupled coin observations and joint-renewal statistics."""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import stats

from .errors import (
    HorizonTooShort,
    InvalidBias,
    NoTrials,
    NotMutuallyAC,
    WindowMismatch,
)
from .renewal import PMF_TOL

MAX_WINDOW = 10**9


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Renewal indicators Delta_0..Delta_N of one path.

    `censored` is True when the draw that ended the path came from the mass
    beyond the stored horizon (tail or defect) rather than from a stored
    inter-arrival that overshot the window.
    """

    delta: np.ndarray
    renewal_times: np.ndarray
    censored: bool

    @property
    def N(self):
        return len(self.delta) - 1


@dataclass(frozen=True, eq=False)
class ObservationPath:
    """Visible values X_1..X_N; ``x[i]`` is X_{i+1}.

    Coin case: x in {-1, +1} and `alphabet` is None.  General case: x holds
    integer codes into `alphabet`.
    """

    x: np.ndarray
    theta: float = None
    uniforms: np.ndarray = None
    alphabet: tuple = None
    meta: dict = field(default_factory=dict)

    @property
    def N(self):
        return len(self.x)

    def values(self):
        if self.alphabet is None:
            return self.x
        return np.asarray(self.alphabet)[self.x]

    def flipped(self):
        """Sign-flipped coin observations: the law of bias -theta."""
        if self.alphabet is not None:
            raise ValueError("sign flip applies to coin observations only")
        th = None if self.theta is None else -self.theta
        return ObservationPath(-self.x, theta=th, uniforms=None, meta=dict(self.meta))


def _tail_sampler(law):
    """Sampler of T given T > H, or None when the residual is a defect."""
    t, H = law.tail, law.horizon
    if t.kind == "power-law" and t.exponent is not None and t.exponent < 1:
        alpha = 1.0 - t.exponent
        p = t.period

        def draw(w):
            T = np.ceil(H * w ** (-1.0 / alpha))
            T = np.ceil(T / p) * p
            return np.maximum(T, H + 1)

        return draw
    if t.kind == "geometric" and t.ratio:
        r = t.ratio

        def draw(w):
            return H + np.ceil(np.log(w) / math.log(r)).clip(min=1)

        return draw
    return None


def _check_window(law, N):
    if N < 1 or N > MAX_WINDOW:
        raise ValueError(f"window N must lie in [1, {MAX_WINDOW}]")
    if N > law.horizon and law.residual > PMF_TOL:
        ok = law.tail.kind == "defective" or _tail_sampler(law) is not None
        if not ok:
            raise HorizonTooShort(
                f"window {N} exceeds horizon {law.horizon} with residual mass "
                f"{law.residual:.3g} and no usable tail model"
            )


def _draw_renewals(law, N, g, cdf=None):
    """Renewal times in [0, N] and the censoring flag, using generator g."""
    H = law.horizon
    if cdf is None:
        cdf = np.cumsum(law.f[1:])
    stored = cdf[-1]
    beyond = _tail_sampler(law) if law.residual > PMF_TOL else None
    chunks = [np.zeros(1, dtype=np.int64)]
    t = 0
    batch = 256
    while True:
        v = g.random(batch)
        w = g.random(batch)
        T = np.searchsorted(cdf, v, side="right").astype(np.float64) + 1.0
        resid = v >= stored
        if resid.any():
            T[resid] = np.inf
            if beyond is not None:
                T[resid] = beyond(1.0 - w[resid])
        times = t + np.cumsum(T)
        over = np.flatnonzero(times > N)
        if len(over):
            k = int(over[0])
            chunks.append(times[:k].astype(np.int64))
            return np.concatenate(chunks), bool(T[k] > H)
        chunks.append(times.astype(np.int64))
        t = int(times[-1])
        batch = min(batch * 2, 1 << 20)


def sample_path(law, N, rng):
    """Simulate Delta_0..Delta_N with Delta_0 = 1 by inverse-CDF sampling of f.

    Exact within the window whenever the horizon covers it.  Beyond the
    horizon the tail model extends the law (Pareto for power-law tails,
    geometric for geometric tails); a defective law never renews again.
    """
    _check_window(law, N)
    times, censored = _draw_renewals(law, N, rng.generator())
    delta = np.zeros(N + 1, dtype=np.uint8)
    delta[times] = 1
    return SamplePath(delta=delta, renewal_times=times, censored=censored)


def observe_coin(path, thetas, rng, keep_uniforms=False):
    """Coupled coin observations, one per bias in `thetas`.

    X^theta_n = +1 iff V_n <= (1 + theta Delta_n)/2 with shared uniforms V,
    so X^theta is pointwise nondecreasing in theta.
    """
    thetas = [float(t) for t in np.atleast_1d(thetas)]
    for th in thetas:
        if not 0.0 <= th <= 1.0:
            raise InvalidBias(f"theta={th} outside [0, 1]; simulate |theta| and flip signs")
    v = rng.generator().random(path.N)
    d = path.delta[1:].astype(bool)
    out = []
    for th in thetas:
        heads = v <= 0.5
        heads[d] = v[d] <= 0.5 * (1.0 + th)
        x = np.where(heads, 1, -1).astype(np.int8)
        out.append(ObservationPath(x=x, theta=th, uniforms=v if keep_uniforms else None))
    return out


@dataclass(frozen=True)
class DiscreteDist:
    """Finite distribution: `support` values with probabilities `probs`."""

    support: tuple
    probs: tuple

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if len(self.support) != len(p) or len(p) == 0:
            raise ValueError("support and probs must be nonempty and of equal length")
        if p.min() < 0 or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("probs must be nonnegative and sum to 1")
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "probs", tuple(float(x) for x in p))

    def prob(self, value):
        try:
            return self.probs[self.support.index(value)]
        except ValueError:
            return 0.0

    def charged(self):
        return {s for s, p in zip(self.support, self.probs) if p > 0}


def r_statistic(alpha, eta):
    """r = integral (d eta / d alpha)^2 d alpha = sum eta(x)^2 / alpha(x)."""
    _check_ac(alpha, eta)
    return float(sum(eta.prob(s) ** 2 / alpha.prob(s) for s in alpha.charged()))


def _check_ac(alpha, eta):
    if alpha.charged() != eta.charged():
        raise NotMutuallyAC(f"supports differ: {sorted(map(str, alpha.charged() ^ eta.charged()))}")


def observe_general(path, alpha, eta, rng):
    """X_n ~ eta at renewal times, ~ alpha elsewhere, independently given Delta."""
    _check_ac(alpha, eta)
    alphabet = alpha.support
    pa = np.asarray(alpha.probs)
    pe = np.asarray([eta.prob(s) for s in alphabet])
    v = rng.generator().random(path.N)
    d = path.delta[1:].astype(bool)
    codes = np.searchsorted(np.cumsum(pa)[:-1], v, side="right")
    codes[d] = np.searchsorted(np.cumsum(pe)[:-1], v[d], side="right")
    return ObservationPath(x=codes.astype(np.int64), alphabet=alphabet)


def joint_renewals(path_a, path_b):
    """J = number of n <= N with a renewal on both paths (n = 0 included)."""
    if path_a.N != path_b.N:
        raise WindowMismatch(f"windows differ: {path_a.N} vs {path_b.N}")
    return int(np.count_nonzero(path_a.delta & path_b.delta))


@dataclass(frozen=True)
class QuenchedEstimate:
    n: int
    q: float
    ci_low: float
    ci_high: float
    trials: int
    window: int


def quenched_q(path, law, n, trials, rng, confidence=0.95):
    """Monte Carlo q_n = P[J >= n | Delta] over the window of `path`.

    Fresh independent paths Delta' are drawn for each trial; the interval
    is the Wilson score interval.
    """
    if trials <= 0:
        raise NoTrials("trials must be positive")
    N = path.N
    _check_window(law, N)
    g = rng.generator()
    cdf = np.cumsum(law.f[1:])
    d = path.delta.astype(bool)
    hits = 0
    for _ in range(trials):
        times, _ = _draw_renewals(law, N, g, cdf)
        if np.count_nonzero(d[times]) >= n:
            hits += 1
    ci = stats.binomtest(hits, trials).proportion_ci(confidence, method="wilson")
    return QuenchedEstimate(n=n, q=hits / trials, ci_low=float(ci.low),
                            ci_high=float(ci.high), trials=trials, window=N)
