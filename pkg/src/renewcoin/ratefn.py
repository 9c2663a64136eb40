"""Lower-tail large deviations of renewal counts and the run-production rate.

Lambda*(a) = lim_m -log2 P[T_1 + ... + T_m <= m a] / m  (bits per renewal)

is computed two ways: exactly for finite m by dynamic programming (each
finite-m value is an upper bound, by superadditivity), and as the Cramer
dual sup_{lam >= 0} [-lam a - ln E exp(-lam T)] / ln 2.

psi(phi) = sup_{0 < xi <= 1} xi (phi - Lambda*(1/xi)),  phi = log2(1 + theta).
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateZeta, OutOfRange

LN2 = math.log(2.0)
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
LAMBDA_MAX = 60.0
XI_GRID = 512
PHI_MAX = 1.0
RATE_HORIZON = 2**15  # laws are truncated to this before psi tables are built


def golden_max(fn, lo, hi, tol):
    """Maximize a unimodal function on [lo, hi] by golden-section search.

    Returns (argmax, max).  Ties resolve toward `lo`.
    """
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    cands = [(fn(a), -a, a), (fc, -c, c), (fd, -d, d), (fn(b), -b, b)]
    best = max(cands)
    return best[2], best[0]


@dataclass(frozen=True)
class DpBounds:
    a: float
    bounds: np.ndarray
    best: float
    extrapolated: float

    @property
    def depth(self):
        return len(self.bounds)


def lambda_star_dp(law, a, m_max):
    """Exact b_m = -log2 P[S_m <= floor(m a)] / m for m = 1..m_max.

    The pmf of S_m restricted to [0, floor(m_max a)] is propagated by
    convolution with f and renormalized each step (log scale tracked
    separately) so that tiny probabilities do not underflow.  Inter-arrival
    mass beyond the stored horizon is treated as absent, which can only
    lower P and so keeps every b_m an upper bound.
    """
    if a < 1:
        return DpBounds(a, np.full(m_max, np.inf), np.inf, np.inf)
    K = int(math.floor(m_max * a + 1e-12))
    f = np.zeros(K + 1)
    k = min(K, law.horizon)
    f[: k + 1] = law.f[: k + 1]
    bounds = np.empty(m_max)
    dist = f.copy()
    log_scale = 0.0
    for m in range(1, m_max + 1):
        lim = int(math.floor(m * a + 1e-12))
        p = dist[: lim + 1].sum()
        bounds[m - 1] = np.inf if p <= 0 else -(math.log(p) + log_scale) / (m * LN2)
        if m == m_max:
            break
        # Direct convolution: FFT round-off would swamp the tiny lower tail.
        dist = np.convolve(dist, f)[: K + 1]
        s = dist.sum()
        if s <= 0:
            bounds[m:] = np.inf
            break
        dist /= s
        log_scale += math.log(s)
    best = float(np.min(bounds))
    return DpBounds(a, bounds, best, _extrapolate(bounds))


def _extrapolate(bounds):
    """Fit b_m = L + A log(m)/m + B/m on the upper half of m; return L."""
    m = np.arange(1, len(bounds) + 1, dtype=float)
    sel = (m >= len(bounds) / 2) & np.isfinite(bounds)
    if sel.sum() < 4:
        return float(np.min(bounds))
    X = np.column_stack([np.ones(sel.sum()), np.log(m[sel]) / m[sel], 1.0 / m[sel]])
    coef, *_ = np.linalg.lstsq(X, bounds[sel], rcond=None)
    return float(max(coef[0], 0.0))


@dataclass(frozen=True)
class DualSolution:
    a: float
    value: float
    lam: float
    slack: float
    defective: bool


class _LogMgf:
    """ln E exp(-lam T) and tilted moments for the stored law.

    Residual mass of a proper (or unknown) law is placed at H+1, the
    smallest value the unseen tail can take; this makes the dual value a
    lower bound on the untruncated one.  `slack` in DualSolution reports
    the gap to the opposite choice (residual dropped).  A declared-defective
    law keeps its residual as an atom at infinity.
    """

    def __init__(self, law):
        H = law.horizon
        n = np.flatnonzero(law.f > 0).astype(float)
        logf = np.log(law.f[n.astype(int)])
        res = law.residual
        self.defective = law.tail.kind == "defective" and res > 0
        self.has_res = res > 1e-15 and not self.defective
        if self.has_res:
            n = np.append(n, H + 1.0)
            logf = np.append(logf, math.log(res))
        self.n = n
        self.logf = logf

    def moments(self, lam, with_residual=True):
        """(ln M, tilted mean, tilted variance) at lam."""
        n, logf = self.n, self.logf
        if self.has_res and not with_residual:
            n, logf = n[:-1], logf[:-1]
        t = logf - lam * n
        top = t.max()
        w = np.exp(t - top)
        s0 = w.sum()
        m1 = float(np.dot(w, n) / s0)
        m2 = float(np.dot(w, n * n) / s0)
        return top + math.log(s0), m1, max(m2 - m1 * m1, 0.0)

    def __call__(self, lam, with_residual=True):
        return self.moments(lam, with_residual)[0]


def _dual(mgf, a, tol=1e-8, lam0=None, slack=True):
    """Maximize the concave h(lam) = -lam a - ln M(lam) over [0, LAMBDA_MAX].

    h'(lam) = m1(lam) - a with m1 the (decreasing) tilted mean, so the
    optimum is the root of m1 = a: safeguarded Newton inside a shrinking
    bracket, stopped once the step or the bracket is below `tol`.
    """
    lo, hi = 0.0, LAMBDA_MAX
    _, m_lo, _ = mgf.moments(lo)
    if m_lo <= a:
        lam = 0.0
    else:
        _, m_hi, _ = mgf.moments(hi)
        if m_hi >= a:
            lam = hi
        else:
            lam = lam0 if lam0 is not None and lo < lam0 < hi else 1.0
            for _ in range(200):
                _, m1, var = mgf.moments(lam)
                if m1 > a:
                    lo = lam
                else:
                    hi = lam
                step = (m1 - a) / var if var > 0 else math.inf
                nxt = lam + step
                if not lo < nxt < hi:
                    nxt = 0.5 * (lo + hi) if lo > 0 or hi < 1 else math.sqrt(max(lo, 1e-300) * hi)
                if abs(nxt - lam) <= tol or hi - lo <= tol:
                    lam = nxt
                    break
                lam = nxt
    val = -lam * a - mgf(lam)
    if not slack:
        return lam, val / LN2, 0.0
    alt = -lam * a - mgf(lam, with_residual=False)
    return lam, val / LN2, max(0.0, alt - val) / LN2


def dual_solution(law, a, mgf=None):
    """Cramer dual for Lambda*(a) with its optimizer and truncation slack."""
    if a < 1:
        return DualSolution(a, math.inf, math.inf, 0.0, False)
    mgf = mgf or _LogMgf(law)
    lam, val, slack = _dual(mgf, a)
    return DualSolution(a, (val if val > 0 else 0.0), lam, slack, mgf.defective)


def lambda_star_dual(law, a):
    """Lambda*(a) in bits via the lower-tail Cramer dual."""
    return dual_solution(law, a).value


class RateFunction:
    """Cached Lambda* and psi for one law.

    Lambda* values are memoized by argument so that the xi grid is shared
    across all phi.
    """

    def __init__(self, law, K=XI_GRID):
        self.law = law
        self.K = K
        self._mgf = _LogMgf(law)
        self._cache = {}
        self._grid = None
        self._lam = None
        # xi below 1/K is allowed while 1/xi stays well inside the horizon.
        self.xi_floor = 4.0 / law.horizon

    def lambda_star(self, a):
        key = float(a)
        v = self._cache.get(key)
        if v is None:
            if key < 1:
                v = math.inf
            else:
                # Warm start from the last optimizer: successive calls are close in a.
                lam, v, _ = _dual(self._mgf, key, lam0=self._lam, slack=False)
                if 0 < lam < LAMBDA_MAX:
                    self._lam = lam
                v = v if v > 0 else 0.0
            self._cache[key] = v
        return v

    def psi_hat(self, phi, xi):
        return xi * (phi - self.lambda_star(1.0 / xi))

    def _xi_grid(self):
        if self._grid is None:
            xi = np.arange(1, self.K + 1) / self.K
            lam = np.array([self.lambda_star(1.0 / x) for x in xi])
            self._grid = (xi, lam)
        return self._grid

    def psi(self, phi):
        """(psi(phi), xi0(phi)); xi0 is the smallest maximizer found."""
        if phi <= 0:
            return 0.0, 0.0
        xi, lam = self._xi_grid()
        vals = xi * (phi - lam)
        j = int(np.argmax(vals))
        if j == 0:
            # Optimum at or below the grid: continue geometrically downward.
            x, best = xi[0], vals[0]
            while x / 2 >= self.xi_floor:
                v = self.psi_hat(phi, x / 2)
                if v <= best:
                    break
                x, best = x / 2, v
            lo, hi = max(x / 2, self.xi_floor), min(2 * x, 1.0)
        else:
            lo, hi = xi[j - 1], xi[min(j + 1, len(xi) - 1)]
        x0, v0 = golden_max(lambda t: self.psi_hat(phi, t), lo, hi, 1e-8)
        if vals[j] > v0:
            x0, v0 = xi[j], vals[j]
        if v0 <= 0:
            return 0.0, 0.0
        return float(v0), float(x0)

    def psi_value(self, phi):
        return self.psi(phi)[0]

    def psi_inverse(self, y, tol=1e-6):
        """phi in (0, 1] with psi(phi) = y, by bisection."""
        top = self.psi_value(PHI_MAX)
        if not 0.0 < y <= top:
            raise OutOfRange(y, 0.0, top)
        lo, hi = 0.0, PHI_MAX
        while hi - lo > tol * 0.25:
            mid = 0.5 * (lo + hi)
            if self.psi_value(mid) < y:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


_RATE_CACHE = {}


def rate_function(law):
    """Shared RateFunction for `law` (keyed by identity).

    Laws longer than RATE_HORIZON are truncated first, with the cut-off
    mass moved to RATE_HORIZON + 1; Lambda*(a) for a well below the
    horizon is insensitive to this and each dual evaluation stays cheap.
    """
    key = id(law)
    hit = _RATE_CACHE.get(key)
    if hit is None or hit[0] is not law:
        if len(_RATE_CACHE) > 16:
            _RATE_CACHE.clear()
        hit = (law, RateFunction(law.truncated(RATE_HORIZON)))
        _RATE_CACHE[key] = hit
    return hit[1]


def psi_eval(law, phi):
    """{'psi': psi(phi), 'xi0': xi0(phi)}."""
    psi, xi0 = rate_function(law).psi(phi)
    return {"psi": psi, "xi0": xi0}


def psi_inverse(law, y):
    return rate_function(law).psi_inverse(y)


@dataclass(frozen=True)
class ReconstructionConstants:
    zeta: float
    theta_threshold: float
    cntex_bound: float
    psi: float


def reconstruction_constants(law, gamma, phi):
    """zeta = max(1, (1-gamma)/(1-psi(phi))), reconstruction and block thresholds.

    theta_threshold = 2**psi^{-1}(gamma) - 1 is the smallest bias the
    longest-run statistic identifies; cntex_bound = 2**gamma / max u_i - 1
    is the cruder singularity threshold from long all-renewal blocks.
    """
    psi = psi_eval(law, phi)["psi"]
    if psi >= 1.0:
        raise DegenerateZeta(f"psi({phi}) = {psi} >= 1")
    zeta = max(1.0, (1.0 - gamma) / (1.0 - psi))
    thr = 2.0 ** psi_inverse(law, gamma) - 1.0
    cntex = 2.0 ** gamma / law.u_max - 1.0
    return ReconstructionConstants(zeta=zeta, theta_threshold=thr, cntex_bound=cntex, psi=psi)


@dataclass(frozen=True, eq=False)
class RateTables:
    a_grid: np.ndarray
    lambda_star: np.ndarray
    lambda_star_dp: np.ndarray
    dp_depth: int
    phi_grid: np.ndarray
    psi: np.ndarray
    xi0: np.ndarray
    method: str = "merged"


def rate_tables(law, a_grid=(), phi_grid=(), dp_depth=0):
    """Gridded Lambda* (dual, plus DP running minimum if dp_depth > 0) and psi."""
    rf = rate_function(law)
    a_grid = np.asarray(a_grid, dtype=float)
    dual = np.array([rf.lambda_star(a) for a in a_grid])
    if dp_depth:
        dp = np.array([lambda_star_dp(law, a, dp_depth).best for a in a_grid])
    else:
        dp = np.full(len(a_grid), np.nan)
    phi_grid = np.asarray(phi_grid, dtype=float)
    ps = [rf.psi(p) for p in phi_grid]
    return RateTables(a_grid=a_grid, lambda_star=dual, lambda_star_dp=dp, dp_depth=dp_depth,
                      phi_grid=phi_grid, psi=np.array([p[0] for p in ps]),
                      xi0=np.array([p[1] for p in ps]),
                      method="merged" if dp_depth else "dual")
