"""Bias reconstruction from the visible sequence X alone.

Two families: linear estimators that weight X_j by u_j (consistent when
sum u_n^2 diverges), and the longest-run statistic whose growth rate
identifies the bias above a threshold when u_n decays like n^-gamma.
Nothing here takes a SamplePath; estimators see ObservationPath only.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import BelowThreshold, OutOfRange, ScheduleExhausted, WindowTooShort
from .ratefn import PHI_MAX, rate_function
from .renewal import law_stats

SCORE_EPS = 0.25
N_MIN = 64


@dataclass(frozen=True, eq=False)
class BlockSchedule:
    """Blocks (m_i, n_i]; L_i averages u_j X_j over j in m_i+1..n_i."""

    blocks: tuple
    epsilons: tuple
    law_label: str = ""
    w: np.ndarray = None

    def __len__(self):
        return len(self.blocks)

    def check(self):
        """Assert w(m_i, n_i) >= w(m_i) and w(m_{i+1}) >= n_i / eps_i."""
        w = self.w
        for i, (m, n) in enumerate(self.blocks):
            if not m < n or w[n] - w[m] < w[m]:
                return False
            if i + 1 < len(self.blocks):
                if w[self.blocks[i + 1][0]] < n / self.epsilons[i]:
                    return False
        return True

    def to_dict(self):
        return {"law_label": self.law_label, "blocks": [list(b) for b in self.blocks],
                "epsilons": list(self.epsilons)}


def block_schedule(law, count, N_cap, start=0):
    """Blocks from w(n) = sum_{k<=n} u_k^2 with eps_i = i^-3.

    m_1 = `start`; n_i is the first t with w(m_i, t) >= w(m_i); m_{i+1} is
    the first m >= n_i with w(m) >= n_i i^3.  Stops after `count` blocks or when
    the next block would end beyond min(N_cap, horizon).  Raises
    ScheduleExhausted when no block fits, or when the walk stopped early
    because w saturates (square-summable u).
    """
    cap = min(int(N_cap), law.horizon)
    w = np.cumsum(law.u[: cap + 1] ** 2)
    blocks, eps = [], []
    m = int(start)
    stop = None
    while len(blocks) < count:
        if m >= cap:
            stop = "next block start beyond the cap"
            break
        n = int(np.searchsorted(w, 2.0 * w[m], side="left"))
        if n > cap:
            stop = f"w({m}, {cap}) < w({m})"
            break
        n = max(n, m + 1)
        i = len(blocks) + 1
        blocks.append((m, n))
        eps.append(float(i) ** -3)
        # blocks stay disjoint even when w(n_i) already exceeds n_i i^3
        m = max(n, int(np.searchsorted(w, n * float(i) ** 3, side="left")))
    sched = BlockSchedule(tuple(blocks), tuple(eps), law.label, w)
    if not blocks:
        raise ScheduleExhausted(f"no block fits within N_cap={N_cap}: {stop}", blocks=())
    if stop is not None and law_stats(law).sum_sq_divergent is False:
        raise ScheduleExhausted(
            f"w saturates after {len(blocks)} blocks (sum u^2 < inf): {stop}",
            blocks=sched.blocks)
    return sched


@dataclass(eq=False)
class EstimateReport:
    """Point estimate with its running trajectory and diagnostics."""

    estimator: str
    point: float
    trajectory: list
    seeds: dict = field(default_factory=dict)
    law: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {"estimator": self.estimator, "point": self.point,
                "trajectory": [[int(n), float(v)] for n, v in self.trajectory],
                "seeds": dict(self.seeds), "law": dict(self.law),
                "diagnostics": dict(self.diagnostics)}

    @classmethod
    def from_dict(cls, d):
        return cls(estimator=d["estimator"], point=d["point"],
                   trajectory=[(int(n), float(v)) for n, v in d.get("trajectory", [])],
                   seeds=d.get("seeds", {}), law=d.get("law", {}),
                   diagnostics=d.get("diagnostics", {}))


def _psi_values(obs, psi_fn):
    if psi_fn is None:
        if obs.alphabet is not None:
            raise ValueError("general alphabets need an explicit psi_fn")
        return obs.x.astype(float)
    vals = obs.values()
    if callable(psi_fn):
        return np.array([psi_fn(v) for v in vals], dtype=float)
    table = {k: float(v) for k, v in dict(psi_fn).items()}
    return np.array([table[v] for v in vals.tolist()], dtype=float)


def linear_estimate(obs, law, schedule, psi_fn=None, alpha_mean=0.0):
    """Block estimator H_k = G_k(psi - alpha(psi)) + alpha(psi).

    L_i = sum_{j=m_i+1}^{n_i} u_j (psi(X_j) - alpha(psi)) / w(m_i, n_i) and
    G_k is the mean of L_1..L_k; the point estimate uses every block that
    ends inside the window.  In the coin case psi is the identity and
    alpha(psi) = 0, so the estimate targets theta.
    """
    blocks = [b for b in schedule.blocks if b[1] <= obs.N]
    if not blocks:
        first = schedule.blocks[0][1] if len(schedule) else None
        raise WindowTooShort(f"window {obs.N} shorter than the first block end {first}")
    y = _psi_values(obs, psi_fn) - alpha_mean
    u = law.u
    L = []
    for m, n in blocks:
        uj = u[m + 1 : n + 1]
        L.append(float(np.dot(uj, y[m:n]) / np.dot(uj, uj)))
    G = np.cumsum(L) / np.arange(1, len(L) + 1)
    Hk = G + alpha_mean
    traj = [(n, float(h)) for (_, n), h in zip(blocks, Hk)]
    return EstimateReport(
        estimator="linear", point=float(Hk[-1]), trajectory=traj,
        law={"label": law.label},
        diagnostics={"blocks_used": len(blocks), "blocks_scheduled": len(schedule),
                     "L": L, "alpha_mean": alpha_mean,
                     "simple_weighted": simple_weighted_estimate(obs, law, obs.N)
                     if psi_fn is None else None})


def simple_weighted_estimate(obs, law, n):
    """T_n = sum_{i<=n} u_i X_i / sum_{i<=n} u_i^2 (coin case)."""
    if not 1 <= n <= obs.N:
        raise WindowTooShort(f"n={n} outside the window 1..{obs.N}")
    u = law.u[1 : n + 1]
    return float(np.dot(u, obs.x[:n]) / np.dot(u, u))


def simple_weighted_report(obs, law, points=40):
    """T_n at geometrically spaced n up to the window, as a report."""
    N = min(obs.N, law.horizon)
    u = law.u[1 : N + 1]
    num = np.cumsum(u * obs.x[:N])
    den = np.cumsum(u * u)
    first = int(np.flatnonzero(den > 0)[0]) + 1
    ns = np.unique(np.geomspace(first, N, points).astype(int))
    traj = [(int(k), float(num[k - 1] / den[k - 1])) for k in ns]
    return EstimateReport(estimator="simple", point=traj[-1][1], trajectory=traj,
                          law={"label": law.label}, diagnostics={"n": N})


@dataclass(frozen=True)
class RunStatistics:
    L_N: int
    R_hat: float
    n_at_max: int
    n_min: int
    N: int


def _head_runs(x):
    """Start (1-based index of first head) and length of each maximal +1 run."""
    h = np.concatenate([[0], (x == 1).astype(np.int8), [0]])
    d = np.diff(h)
    starts = np.flatnonzero(d == 1) + 1
    ends = np.flatnonzero(d == -1)
    return starts, ends - starts + 1


def run_statistics(obs, n_min=N_MIN):
    """Longest head run L_N and R_hat = max_{n_min <= n <= N - L_N} R_n / log2 n.

    R_n is the length of the head run starting at X_{n+1}.  Within a
    maximal run R_n / log2 n decreases in n, so only the first admissible
    n of each run can attain the maximum.  When the window is all heads
    the range is empty and n = n_min is used (degenerate, R_hat large).
    """
    if obs.alphabet is not None:
        raise ValueError("run statistics are defined for coin observations")
    N = obs.N
    if n_min < 16 or N < n_min:
        raise WindowTooShort(f"need N >= n_min >= 16, got N={N}, n_min={n_min}")
    starts, lengths = _head_runs(obs.x)
    L_N = int(lengths.max()) if len(lengths) else 0
    upper = max(N - L_N, n_min)
    ends = starts + lengths - 1
    n = np.maximum(starts - 1, n_min)
    ok = (n <= ends - 1) & (n <= upper)
    if not ok.any():
        return RunStatistics(L_N, 0.0, n_min, n_min, N)
    n, ends = n[ok], ends[ok]
    r = (ends - n) / np.log2(n)
    k = int(np.argmax(r))
    return RunStatistics(L_N=L_N, R_hat=float(r[k]), n_at_max=int(n[k]), n_min=n_min, N=N)


@dataclass(frozen=True)
class RunsInversion:
    """theta_hat = 2**phi - 1 with psi(phi) = 1 - (1 - gamma)/R_hat."""

    theta: float
    phi: float
    target: float
    clipped: bool

    def __float__(self):
        return self.theta


def theta_from_runs(R_hat, gamma=None, law=None, margin=0.1):
    """Invert R_hat = (1 - gamma)/(1 - psi(phi)) for theta.

    Targets above psi(1) are projected onto theta = 1 with `clipped` set;
    finite windows overshoot the limsup, and theta cannot exceed 1.
    """
    if gamma is None:
        gamma = law.tail.exponent
    if not 0.5 < gamma < 1:
        raise ValueError(f"gamma={gamma} outside (1/2, 1)")
    if not R_hat > 1.0 + margin:
        raise BelowThreshold(f"R_hat={R_hat:.4g} <= 1 + {margin:g}: no signal above the fair-coin baseline")
    y = 1.0 - (1.0 - gamma) / R_hat
    rf = rate_function(law)
    try:
        phi = rf.psi_inverse(y)
        clipped = False
    except OutOfRange as exc:
        if y <= exc.interval[1]:
            raise
        phi, clipped = PHI_MAX, True
    return RunsInversion(theta=2.0 ** phi - 1.0, phi=phi, target=y, clipped=clipped)


def singularity_score(obs):
    """L_N / log2 N; near 1 for a fair coin, above 1 under detectable bias."""
    if obs.N < 1024:
        raise WindowTooShort(f"singularity score needs N >= 1024, got {obs.N}")
    starts, lengths = _head_runs(obs.x)
    L_N = int(lengths.max()) if len(lengths) else 0
    return L_N / math.log2(obs.N)


def singular_evidence(score, eps=SCORE_EPS):
    return score > 1.0 + eps
