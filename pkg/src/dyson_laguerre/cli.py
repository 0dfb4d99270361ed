"""Flat-file configuration, experiment dispatch, and report emission.

Configs are one `key = value` pair per line; blank lines and lines starting
with # are skipped.  Documented keys, all optional unless an experiment
needs them:

    mode        experiment name: simulate | distance | cutoff-profile |
                check-cd | couple | ou-formulas
    n           particle count; comma list allowed for profile ladders
    m           matrix column count; selects the matrix route where it applies
    alpha       shape parameter (Euler route)
    beta        repulsion strength (Euler route; default 1)
    x0_preset   zero | equilibrium-draw | linear-ramp | single-outlier
    times       comma list of grid times (profile: multipliers of c_n)
    replicas    Monte Carlo replicas (also: trials for check-cd)
    distances   comma list of kinds among TV, KL, L2, W
    seed        64-bit integer (default 0)
    out_dir     output directory (default .)
    format      csv | json (default csv)

Outputs are written atomically (temp file in the destination directory,
then rename); on failure any files already written by the run are removed
and no manifest is produced.  Exit codes: 0 success, 2 config error,
3 numeric failure, 4 I/O error.
"""

from dataclasses import dataclass, field
import argparse
import csv
import datetime
import hashlib
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import (
    CollisionError,
    DysonLaguerreError,
    NumericError,
    ParseError,
    SerializationError,
    StepRejected,
    ValidationError,
)
from .model import ModelParams, observable_phi
from .simulate import MatrixParams, RngStream, matrix_dl_path, dl_paths_batch
from .cutoff import CutoffProfile, ProfileRow, run_cutoff_profile
from .transport import OUParams, ou_closed_form_distances

CONFIG_KEYS = (
    "mode",
    "n",
    "m",
    "alpha",
    "beta",
    "x0_preset",
    "times",
    "replicas",
    "distances",
    "seed",
    "out_dir",
    "format",
)

_MODES = ("simulate", "distance", "cutoff-profile", "check-cd", "couple", "ou-formulas")

_DEFAULTS = {
    "mode": None,
    "n": None,
    "m": None,
    "alpha": None,
    "beta": None,
    "x0_preset": "zero",
    "times": None,
    "replicas": None,
    "distances": None,
    "seed": 0,
    "out_dir": ".",
    "format": "csv",
}


def _parse_scalar(key, raw, line_no, col):
    try:
        if key in ("seed", "replicas", "m"):
            return int(raw)
        if key in ("alpha", "beta"):
            return float(raw)
    except ValueError:
        raise ParseError(f"key {key!r} needs a number, got {raw!r}", line=line_no, column=col)
    return raw


def parse_config(text):
    """Parse a flat key = value document into a validated config dict.

    Unknown and duplicate keys are rejected with the offending line;
    numeric values are checked, comma lists split, and when (n, alpha,
    beta) pin down a model the admissibility inequality is checked here so
    that bad regimes fail before any experiment starts.
    """
    config = dict(_DEFAULTS)
    seen = set()
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError("expected key = value", line=line_no, column=1)
        key, _, raw = line.partition("=")
        key = key.strip()
        col = raw_line.index("=") + 2
        raw = raw.strip()
        if key not in CONFIG_KEYS:
            raise ParseError(f"unknown key {key!r}", line=line_no, column=1)
        if key in seen:
            raise ParseError(f"duplicate key {key!r}", line=line_no, column=1)
        seen.add(key)
        if raw == "":
            raise ParseError(f"key {key!r} has no value", line=line_no, column=col)
        if key == "n":
            try:
                vals = [int(v.strip()) for v in raw.split(",")]
            except ValueError:
                raise ParseError(f"key 'n' needs integers, got {raw!r}", line=line_no, column=col)
            config["n"] = vals[0] if len(vals) == 1 else vals
        elif key == "times":
            try:
                config["times"] = [float(v.strip()) for v in raw.split(",")]
            except ValueError:
                raise ParseError(f"key 'times' needs numbers, got {raw!r}", line=line_no, column=col)
        elif key == "distances":
            config["distances"] = [v.strip() for v in raw.split(",") if v.strip()]
        else:
            config[key] = _parse_scalar(key, raw, line_no, col)

    if config["mode"] is not None and config["mode"] not in _MODES:
        raise ParseError(f"mode must be one of {', '.join(_MODES)}, got {config['mode']!r}")
    if config["format"] not in ("csv", "json"):
        raise ParseError(f"format must be csv or json, got {config['format']!r}")
    if config["alpha"] is not None and config["n"] is not None:
        beta = config["beta"] if config["beta"] is not None else 1.0
        ns = config["n"] if isinstance(config["n"], list) else [config["n"]]
        for n in ns:
            ModelParams(n, config["alpha"], beta)
    return config


def serialize_config(config):
    """Canonical text form of a config; parse(serialize(parse(t))) is
    parse(t)."""
    lines = []
    for key in CONFIG_KEYS:
        val = config.get(key)
        if val is None:
            continue
        if isinstance(val, list):
            lines.append(f"{key} = {', '.join(str(v) for v in val)}")
        else:
            lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def config_digest(config):
    """sha256 over the canonical serialization: the run identity."""
    return hashlib.sha256(serialize_config(config).encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    mode: str
    artifact_version: str
    started: str
    finished: str
    outputs: list
    fallbacks: list = field(default_factory=list)

    def to_json(self):
        return json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n"


def _atomic_write(path, data):
    """Write bytes (or text) to path via a temp file and rename."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    d = os.path.dirname(os.path.abspath(path)) or "."
    tmp = os.path.join(d, f".{os.path.basename(path)}.tmp.{os.getpid()}")
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def emit_report(profile, fmt, out_dir=".", basename="profile"):
    """Write a CutoffProfile as CSV (fixed column order) or JSON (rows plus
    prediction brackets and critical times).  Returns written paths."""
    if fmt == "csv":
        rows = [
            [r.n, r.t, r.kind, r.value, r.stderr, r.bound_lower, r.bound_upper,
             r.c_pred_lower, r.c_pred_upper]
            for r in profile.rows
        ]
        path = os.path.join(out_dir, f"{basename}.csv")
        _atomic_write(path, _csv_text(CutoffProfile.COLUMNS, rows))
        return [path]
    if fmt == "json":
        doc = {
            "route": profile.route,
            "meta": profile.meta,
            "critical_times": {str(k): v for k, v in profile.critical_times.items()},
            "predictions": {
                str(n): {
                    kind: {
                        "c_lower": p.c_lower,
                        "c_upper": p.c_upper,
                        "source": p.source,
                        "flagged": p.flagged,
                        "flag_reason": p.flag_reason,
                    }
                    for kind, p in preds.items()
                }
                for n, preds in profile.predictions.items()
            },
            "rows": [r.__dict__ for r in profile.rows],
        }
        path = os.path.join(out_dir, f"{basename}.json")
        try:
            text = json.dumps(doc, indent=2, allow_nan=True) + "\n"
        except (TypeError, ValueError) as exc:
            raise SerializationError(f"profile not serializable: {exc}")
        _atomic_write(path, text)
        return [path]
    raise SerializationError(f"unknown report format {fmt!r}")


def read_profile(path):
    """Load a JSON profile emitted by emit_report back into a
    CutoffProfile."""
    with open(path) as fh:
        doc = json.load(fh)
    from .cutoff import CutoffPrediction

    rows = [ProfileRow(**r) for r in doc["rows"]]
    preds = {
        int(n): {
            kind: CutoffPrediction(
                dist_kind=kind,
                c_lower=p["c_lower"],
                c_upper=p["c_upper"],
                source=p["source"],
                flagged=p["flagged"],
                flag_reason=p["flag_reason"],
            )
            for kind, p in kinds.items()
        }
        for n, kinds in doc["predictions"].items()
    }
    return CutoffProfile(
        rows=rows,
        predictions=preds,
        critical_times={int(k): v for k, v in doc["critical_times"].items()},
        route=doc["route"],
        meta=doc["meta"],
    )


def _model_from_config(config, need_alpha=False):
    n = config.get("n")
    if n is None or isinstance(n, list):
        raise ValidationError("this experiment needs a single integer n")
    if config.get("alpha") is not None:
        beta = config.get("beta") if config.get("beta") is not None else 1.0
        return ModelParams(int(n), float(config["alpha"]), float(beta)), None
    if config.get("m") is not None:
        mp = MatrixParams.bru(int(n), int(config["m"]))
        return mp.induced_model(), mp
    if need_alpha:
        raise ValidationError("config must provide alpha (with beta) or m")
    raise ValidationError("config must provide alpha or m")


def _path_csv_rows(times, states, replica):
    for k, t in enumerate(times):
        x = states[k]
        for j, v in enumerate(np.asarray(x, dtype=float).reshape(-1)):
            yield replica, float(t), j, float(v)


def _run_simulate(config, out_dir, fmt, fallbacks, written):
    from .equilibrium import build_x0

    params, mp = _model_from_config(config)
    times = np.asarray(config.get("times") or [1.0], dtype=float)
    replicas = int(config.get("replicas") or 1)
    seed = int(config.get("seed") or 0)
    route = "matrix" if (mp is not None) else "sde"
    x0, note = build_x0(config.get("x0_preset", "zero"), params,
                        RngStream(seed, 900).generator(), positive=(route == "sde"))
    if note:
        fallbacks.append(note)
    rows = []
    if route == "matrix":
        m0 = np.zeros((mp.n, mp.m))
        np.fill_diagonal(m0, np.sqrt(mp.m * x0.as_array()))
        for rep in range(replicas):
            path = matrix_dl_path(m0, times, mp, RngStream(seed, rep), canonical=True)
            arrs = [s.as_array() for s in path.states]
            rows.extend(_path_csv_rows(times, arrs, rep))
    else:
        out = dl_paths_batch((x0, replicas), times, params, RngStream(seed, 0))
        for rep in range(replicas):
            rows.extend(_path_csv_rows(times, out[:, rep, :], rep))
    path = os.path.join(out_dir, "paths.csv")
    _atomic_write(path, _csv_text(("replica", "time", "coord_index", "value"), rows))
    written.append(path)


def _run_distance(config, out_dir, fmt, fallbacks, written):
    from .coupling import wg_decay_estimate
    from .equilibrium import build_x0

    params, _ = _model_from_config(config)
    times = np.asarray(config.get("times") or np.arange(0.5, 6.1, 0.5), dtype=float)
    replicas = int(config.get("replicas") or 200)
    seed = int(config.get("seed") or 0)
    x0, note = build_x0(config.get("x0_preset", "zero"), params,
                        RngStream(seed, 900).generator(), positive=True)
    if note:
        fallbacks.append(note)
    curve = wg_decay_estimate(x0, times, params, replicas, RngStream(seed, 0))
    rows = [
        (r["t"], r["value"], r["stderr"], r["envelope"], r["floor"])
        for r in curve.rows()
    ]
    path = os.path.join(out_dir, "wg_decay.csv")
    _atomic_write(path, _csv_text(("t", "value", "stderr", "envelope", "floor"), rows))
    written.append(path)


def _run_cutoff_profile(config, out_dir, fmt, fallbacks, written):
    profile = run_cutoff_profile(config)
    fallbacks.extend(profile.meta.get("fallbacks", []))
    written.extend(emit_report(profile, fmt, out_dir=out_dir))


def _run_check_cd(config, out_dir, fmt, fallbacks, written):
    from .geometry import cd_certificate

    params, _ = _model_from_config(config, need_alpha=True)
    trials = int(config.get("replicas") or 1000)
    seed = int(config.get("seed") or 0)
    report = cd_certificate(params, 0.5, trials, RngStream(seed, 0))
    path = os.path.join(out_dir, "cd_report.json")
    _atomic_write(path, report.to_json() + "\n")
    written.append(path)


def _run_couple(config, out_dir, fmt, fallbacks, written):
    from .coupling import run_coupled_batch
    from .equilibrium import build_x0, sample_equilibrium

    params, _ = _model_from_config(config)
    times = np.asarray(config.get("times") or np.arange(0.5, 6.1, 0.5), dtype=float)
    replicas = int(config.get("replicas") or 100)
    seed = int(config.get("seed") or 0)
    gen = RngStream(seed, 900).generator()
    x0, note = build_x0(config.get("x0_preset", "zero"), params, gen, positive=True)
    if note:
        fallbacks.append(note)
    y0 = sample_equilibrium(params, gen).state
    sa, sb, coal = run_coupled_batch(x0, y0, times, params, RngStream(seed, 0),
                                     replicas=replicas, kind="mirror")
    rows = []
    for rep in range(replicas):
        for leg, arr in (("x", sa), ("y", sb)):
            for k, t in enumerate(times):
                for j, v in enumerate(arr[k, rep]):
                    rows.append((rep, float(t), leg, j, float(v)))
    csv_path = os.path.join(out_dir, "coupled_paths.csv")
    _atomic_write(csv_path, _csv_text(("replica", "time", "leg", "coord_index", "value"), rows))
    written.append(csv_path)
    finite = np.isfinite(coal)
    summary = {
        "replicas": replicas,
        "coalesced_fraction": float(np.mean(finite)),
        "mean_coalesce_time": float(np.mean(coal[finite])) if np.any(finite) else None,
        "median_coalesce_time": float(np.median(coal[finite])) if np.any(finite) else None,
        "horizon": float(times[-1]),
    }
    sum_path = os.path.join(out_dir, "coupling_summary.json")
    _atomic_write(sum_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written.append(sum_path)


def _run_ou_formulas(config, out_dir, fmt, fallbacks, written):
    from .equilibrium import build_x0

    n = config.get("n")
    m = config.get("m")
    if n is None or m is None or isinstance(n, list):
        raise ValidationError("ou-formulas needs integer n and m")
    mp = MatrixParams.bru(int(n), int(m))
    params = mp.induced_model()
    seed = int(config.get("seed") or 0)
    x0, note = build_x0(config.get("x0_preset", "zero"), params,
                        RngStream(seed, 900).generator())
    if note:
        fallbacks.append(note)
    z0_sq = float(mp.m * observable_phi(x0, params).phi_raw)
    ou = OUParams(int(n), int(m), mp.kappa, mp.gamma, z0_norm_sq=z0_sq)
    times = np.asarray(config.get("times") or np.arange(0.5, 6.1, 0.5), dtype=float)
    rows = []
    for t in times:
        vals = ou_closed_form_distances(ou, float(t))
        for kind in ("KL", "L2", "W2"):
            rows.append((float(t), kind, vals[kind].value))
    path = os.path.join(out_dir, "ou_distances.csv")
    _atomic_write(path, _csv_text(("t", "kind", "value"), rows))
    written.append(path)


_EXPERIMENTS = {
    "simulate": _run_simulate,
    "distance": _run_distance,
    "cutoff-profile": _run_cutoff_profile,
    "check-cd": _run_check_cd,
    "couple": _run_couple,
    "ou-formulas": _run_ou_formulas,
}


def run(config):
    """Dispatch a validated config to its experiment and write outputs.

    Returns the RunManifest (also written to out_dir/manifest.json).  On
    any failure, files created by this run are removed before the error
    propagates.
    """
    mode = config.get("mode")
    if mode not in _EXPERIMENTS:
        raise ValidationError(f"config needs a mode among {', '.join(_MODES)}")
    out_dir = config.get("out_dir") or "."
    os.makedirs(out_dir, exist_ok=True)
    fmt = config.get("format") or "csv"
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    fallbacks = []
    written = []
    try:
        _EXPERIMENTS[mode](config, out_dir, fmt, fallbacks, written)
    except BaseException:
        for p in written:
            if os.path.exists(p):
                os.unlink(p)
        raise
    finished = datetime.datetime.now(datetime.timezone.utc).isoformat()
    manifest = RunManifest(
        config_hash=config_digest(config),
        seed=int(config.get("seed") or 0),
        mode=mode,
        artifact_version=__version__,
        started=started,
        finished=finished,
        outputs=[{"path": p, "sha256": _file_digest(p)} for p in written],
        fallbacks=fallbacks,
    )
    _atomic_write(os.path.join(out_dir, "manifest.json"), manifest.to_json())
    return manifest


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dyson-laguerre",
        description="Simulation and analysis experiments for interacting square-root diffusions.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for name in _MODES:
        p = sub.add_parser(name)
        p.add_argument("--config", help="path to a key = value config file")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--out", help="output directory (overrides out_dir)")
        p.add_argument("--format", choices=("csv", "json"), help="report format")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.config:
            with open(args.config) as fh:
                config = parse_config(fh.read())
        else:
            config = dict(_DEFAULTS)
        config["mode"] = args.mode
        if args.seed is not None:
            config["seed"] = args.seed
        if args.out is not None:
            config["out_dir"] = args.out
        if args.format is not None:
            config["format"] = args.format
        manifest = run(config)
    except (OSError, SerializationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (CollisionError, StepRejected, NumericError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except DysonLaguerreError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for out in manifest.outputs:
        print(f"wrote {out['path']}  sha256={out['sha256'][:12]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
