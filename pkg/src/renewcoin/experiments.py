"""Seeded theta sweeps and deterministic asymptotics reports."""

from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import asdict, dataclass, field
import math
from pathlib import Path

import numpy as np
from scipy import stats

from . import io
from .errors import BelowThreshold, ConfigError, HorizonTooShort, IoError
from .estimators import (
    N_MIN,
    block_schedule,
    linear_estimate,
    run_statistics,
    simple_weighted_estimate,
    singularity_score,
    theta_from_runs,
)
from .renewal import builtin_law, loglog_slope
from .rng import RngStream, experiment_id
from .simulate import observe_coin, sample_path

ESTIMATORS = ("score", "runs", "simple", "linear")
REPORT_MIN_HORIZON = 10_000


@dataclass
class ExperimentConfig:
    """Everything a sweep needs; `law` is {"name", "horizon", "params"} or {"file"}."""

    law: dict
    thetas: list
    N: int
    replicates: int = 1
    estimators: list = field(default_factory=lambda: ["score"])
    seed: int = 0
    output: str = "sweep-out"
    name: str = "sweep"
    gamma: float = None
    n_min: int = N_MIN
    blocks: int = 50

    def __post_init__(self):
        self.thetas = [float(t) for t in (self.thetas or [])]
        if not self.thetas:
            raise ConfigError("theta grid is empty")
        if any(not 0.0 <= t <= 1.0 for t in self.thetas):
            raise ConfigError("theta grid must lie in [0, 1]")
        if int(self.replicates) < 1:
            raise ConfigError("replicates must be >= 1")
        if int(self.N) < 1:
            raise ConfigError("N must be >= 1")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad or not self.estimators:
            raise ConfigError(f"unknown estimators {sorted(bad)}; choose from {ESTIMATORS}")
        if not isinstance(self.law, dict) or not ("name" in self.law or "file" in self.law):
            raise ConfigError("law must give a builtin 'name' or a 'file'")
        self.N, self.replicates, self.seed = int(self.N), int(self.replicates), int(self.seed)

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config fields {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(io.read_json(path))

    def to_dict(self):
        return asdict(self)


def build_law(entry, base_dir="."):
    if "file" in entry:
        return io.load_law(Path(base_dir) / entry["file"])
    H = int(entry.get("horizon", 0))
    if H < 1:
        raise ConfigError("builtin law needs a positive 'horizon'")
    return builtin_law(entry["name"], H, **entry.get("params", {}))


def _replicate(cfg, law, schedule, r):
    """Rows (theta index, estimator, value) for one replicate; thetas coupled."""
    stream = RngStream(cfg.seed, (experiment_id(cfg.name), r))
    path = sample_path(law, cfg.N, stream.child(0))
    rows = []
    for j, obs in enumerate(observe_coin(path, cfg.thetas, stream.child(1))):
        for est in cfg.estimators:
            if est == "score":
                rows.append((j, "score", singularity_score(obs)))
            elif est == "runs":
                rs = run_statistics(obs, cfg.n_min)
                rows.append((j, "R_hat", rs.R_hat))
                try:
                    th = theta_from_runs(rs.R_hat, cfg.gamma, law).theta
                except BelowThreshold:
                    th = math.nan
                rows.append((j, "theta_runs", th))
            elif est == "simple":
                rows.append((j, "simple", simple_weighted_estimate(obs, law, min(cfg.N, law.horizon))))
            elif est == "linear":
                rows.append((j, "linear", linear_estimate(obs, law, schedule).point))
    return r, rows


def _summary(cfg, table):
    out = []
    for j, th in enumerate(cfg.thetas):
        for est in sorted({e for (jj, _, e) in table if jj == j}):
            v = np.array([table[(j, r, est)] for r in range(cfg.replicates)], dtype=float)
            v = v[np.isfinite(v)]
            n = len(v)
            mean = float(v.mean()) if n else math.nan
            sd = float(v.std(ddof=1)) if n > 1 else math.nan
            half = stats.norm.ppf(0.975) * sd / math.sqrt(n) if n > 1 else math.nan
            out.append({"theta": th, "estimator": est, "mean": mean, "sd": sd, "n": n,
                        "replicates": cfg.replicates, "ci_low": mean - half, "ci_high": mean + half})
    return out


def run_sweep(cfg, threads=1, base_dir="."):
    """Simulate every (theta, replicate) cell and write the report files.

    Writes results.csv, summary.json and law.json under cfg.output.  Each
    replicate draws its path and uniforms from its own stream, so the
    files are byte-identical for any thread count.
    """
    law = build_law(cfg.law, base_dir)
    if cfg.gamma is None and "runs" in cfg.estimators:
        cfg.gamma = law.tail.exponent
    schedule = block_schedule(law, cfg.blocks, cfg.N) if "linear" in cfg.estimators else None
    out = Path(cfg.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out}: {exc}") from exc

    work = range(cfg.replicates)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            done = list(pool.map(lambda r: _replicate(cfg, law, schedule, r), work))
    else:
        done = [_replicate(cfg, law, schedule, r) for r in work]

    table = {}
    for r, rows in done:
        for j, est, v in rows:
            table[(j, r, est)] = float(v)
    keys = sorted(table)
    try:
        with open(out / "results.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["theta", "replicate", "estimator", "value", "seed"])
            for j, r, est in keys:
                w.writerow([repr(cfg.thetas[j]), r, est, repr(table[(j, r, est)]), cfg.seed])
    except OSError as exc:
        raise IoError(str(exc)) from exc
    summary = {"config": cfg.to_dict(), "law": law.label, "summary": _summary(cfg, table)}
    io.write_json(out / "summary.json", summary)
    io.save_law(law, out / "law.json")
    return summary


def asymptotics_report(law, tol=0.05, fit_range=None):
    """Log-log fits of u_n and U_n, compared with the law's tail metadata.

    Power-law tails predict slopes -gamma for u and 1 - gamma for U.  Laws
    labelled ``loglog`` get the doubling check instead: increments of U at
    n = 2^(2^k) positive and within a factor 4 of each other, and U_n
    regressed on the transform W(n) = sum_k u_k (1 - 1/n)^k with slope in
    [0.8, 1.2] (U_n ~ W(n) for slowly varying growth).
    """
    H = law.horizon
    if H < REPORT_MIN_HORIZON:
        raise HorizonTooShort(f"asymptotics report needs horizon >= {REPORT_MIN_HORIZON}, got {H}")
    lo, hi = fit_range or (max(100, H // 1000), H)
    U = np.cumsum(law.u)
    u_fit = loglog_slope(law.u, lo, hi)
    U_fit = loglog_slope(U, lo, hi)
    report = {"label": law.label, "horizon": H, "fit_range": [lo, hi], "tol": tol,
              "u_slope": u_fit.slope, "u_stderr": u_fit.stderr,
              "U_slope": U_fit.slope, "U_stderr": U_fit.stderr, "checks": []}
    t = law.tail
    if t.kind == "power-law" and t.exponent is not None:
        g = t.exponent
        for name, fit, exp in (("u", u_fit, -g), ("U", U_fit, 1.0 - g)):
            report["checks"].append({"quantity": f"{name}-slope", "value": fit.slope,
                                     "expected": exp, "ok": abs(fit.slope - exp) <= tol})
    if law.label.startswith("loglog"):
        report["checks"].extend(_doubling_checks(law, U))
    report["ok"] = all(c["ok"] for c in report["checks"]) if report["checks"] else None
    return report


def _doubling_checks(law, U):
    H = law.horizon
    pts = [2 ** (2 ** k) for k in range(1, 6) if 2 ** (2 ** k) <= H]
    inc = np.diff([U[p] for p in pts])
    ok = len(inc) >= 2 and inc.min() > 0 and inc.max() <= 4 * inc.min()
    ns = np.unique(np.geomspace(16, max(H // 32, 32), 40).astype(int))
    k = np.arange(H + 1)
    W = np.array([np.dot(law.u, (1.0 - 1.0 / n) ** k) for n in ns])
    fit = stats.linregress(W, U[ns])
    return [
        {"quantity": "U-doubling-increments", "value": inc.tolist(), "points": pts, "ok": bool(ok)},
        {"quantity": "U-vs-W-slope", "value": float(fit.slope), "expected": 1.0,
         "ok": bool(abs(fit.slope - 1.0) <= 0.2)},
    ]
