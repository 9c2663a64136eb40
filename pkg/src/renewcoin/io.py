"""File formats: laws, observations, rate tables and estimate reports.

Laws are JSON; above SIDECAR_MIN horizon the arrays move to a sidecar of
little-endian float64 (f_0..f_H followed by u_0..u_H).  Coin observations
are a JSON header line followed by packed bits (1 = heads); CSV is the
inspectable alternative.
"""

import csv
import functools
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError, IoError
from .renewal import RenewalLaw, TailModel
from .simulate import ObservationPath

SIDECAR_MIN = 100_000


def _wrap(fn):
    @functools.wraps(fn)
    def inner(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except OSError as exc:
            raise IoError(str(exc)) from exc
    return inner


@_wrap
def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


@_wrap
def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


@_wrap
def save_law(law, path, sidecar=None):
    """Write `law` as JSON, with a binary sidecar for long horizons."""
    path = Path(path)
    if sidecar is None:
        sidecar = law.horizon >= SIDECAR_MIN
    d = law.to_dict(arrays=not sidecar)
    if sidecar:
        side = path.with_suffix(".f64")
        np.concatenate([law.f, law.u]).astype("<f8").tofile(side)
        d["sidecar"] = {"file": side.name, "dtype": "<f8", "layout": "f_0..f_H,u_0..u_H"}
    write_json(path, d)
    return path


@_wrap
def load_law(path):
    path = Path(path)
    d = read_json(path)
    side = d.get("sidecar")
    if side:
        raw = np.fromfile(path.parent / side["file"], dtype="<f8")
        H = int(d["horizon"])
        if len(raw) != 2 * (H + 1):
            raise IoError(f"sidecar length {len(raw)} does not match horizon {H}")
        return RenewalLaw(f=raw[: H + 1], u=raw[H + 1 :], tail=TailModel.from_dict(d.get("tail")),
                          label=d.get("label", ""), meta=dict(d.get("meta", {})))
    try:
        return RenewalLaw.from_dict(d)
    except KeyError as exc:
        raise ConfigError(f"{path}: law JSON lacks field {exc}") from exc


def observation_header(obs, law_label="", seed=None, stream_id=()):
    return {"law-label": law_label, "N": obs.N, "seed": seed,
            "stream-id": list(stream_id), "theta": obs.theta}


@_wrap
def save_observation_bin(obs, path, header):
    if obs.alphabet is not None:
        raise ConfigError("binary observation files hold coin observations only; use CSV")
    bits = np.packbits(obs.x == 1)
    with open(path, "wb") as fh:
        fh.write((json.dumps(dict(header, N=obs.N), sort_keys=True) + "\n").encode())
        fh.write(bits.tobytes())


@_wrap
def load_observation_bin(path):
    with open(path, "rb") as fh:
        head = json.loads(fh.readline().decode())
        bits = np.frombuffer(fh.read(), dtype=np.uint8)
    N = int(head["N"])
    heads = np.unpackbits(bits)[:N].astype(bool)
    if len(heads) != N:
        raise IoError(f"{path}: truncated bit payload")
    x = np.where(heads, 1, -1).astype(np.int8)
    return ObservationPath(x=x, theta=head.get("theta"), meta=head), head


@_wrap
def save_observation_csv(obs, path, delta=None):
    """Columns n, x and optionally delta (debugging only)."""
    vals = obs.values()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "x"] + (["delta"] if delta is not None else []))
        for i in range(obs.N):
            row = [i + 1, vals[i]]
            if delta is not None:
                row.append(int(delta[i + 1]))
            w.writerow(row)


@_wrap
def load_observation_csv(path):
    """Read columns n and x; any delta column is ignored."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and "x" not in rows[0]:
        raise ConfigError(f"{path}: missing column x")
    raw = [r["x"] for r in rows]
    if set(raw) <= {"1", "-1"}:
        return ObservationPath(x=np.array([int(v) for v in raw], dtype=np.int8))
    alphabet = tuple(sorted(set(raw)))
    index = {a: i for i, a in enumerate(alphabet)}
    return ObservationPath(x=np.array([index[v] for v in raw], dtype=np.int64), alphabet=alphabet)


def load_observation(path):
    path = Path(path)
    if path.suffix == ".csv":
        return load_observation_csv(path), {}
    return load_observation_bin(path)


@_wrap
def write_rate_tables(tables, prefix):
    """Write <prefix>_lambda.csv and <prefix>_psi.csv."""
    prefix = str(prefix)
    with open(prefix + "_lambda.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "lambda_star_dual", "lambda_star_dp_min", "dp_depth"])
        for a, d, p in zip(tables.a_grid, tables.lambda_star, tables.lambda_star_dp):
            w.writerow([repr(float(a)), repr(float(d)), repr(float(p)), tables.dp_depth])
    with open(prefix + "_psi.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phi", "psi", "xi0"])
        for row in zip(tables.phi_grid, tables.psi, tables.xi0):
            w.writerow([repr(float(v)) for v in row])
    return prefix + "_lambda.csv", prefix + "_psi.csv"


@_wrap
def write_report(report, path, trajectory_csv=None):
    write_json(path, report.to_dict())
    if trajectory_csv:
        with open(trajectory_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "estimate"])
            for n, v in report.trajectory:
                w.writerow([n, repr(float(v))])
