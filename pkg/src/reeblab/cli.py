"""Command-line entry point: ``reeblab <subcommand> [options]``.

Every run writes ``<out>/<subcommand>.csv`` (each row tagged with the config
hash), ``<out>/<subcommand>.json`` (the run record) and, with ``--plot-data``,
a two-column ``<subcommand>.dat``.  Exit codes: 0 success, 2 a property check
failed, 1 error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .io import SchemaError, canonical_json, content_hash, dumps, validate

SUBCOMMANDS = ("dioph", "recur", "entropy", "taub", "eta", "geom", "preset")

LENS_PHI = {"kind": "lens", "q": [2, 1], "a": [1.0, (1 + 5 ** 0.5) / 2]}
CAT = {"kind": "suspension", "matrix": [[2, 1], [1, 1]]}

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}
_list_pos = {"type": "array", "items": _pos, "minItems": 1}

SCHEMAS = {
    "dioph": {
        "type": "object",
        "required": ["mode"],
        "properties": {
            "mode": {"enum": ["mu", "nu"]},
            "x": {"type": "string"},
            "a": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            "depth": _posint,
            "dps": {"type": "integer", "minimum": 15},
            "t_max": {"type": "number", "minimum": 10},
        },
    },
    "recur": {
        "type": "object",
        "required": ["flow", "T", "eps", "samples"],
        "properties": {
            "flow": {"type": "object"},
            "T": _list_pos,
            "eps": _pos,
            "samples": {"type": "integer", "minimum": 100},
            "dt": _pos,
            "mode": {"enum": ["plain", "extended", "lifted"]},
            "fit": {"enum": ["none", "elliptic", "anosov"]},
        },
    },
    "entropy": {
        "type": "object",
        "required": ["flow", "T", "eps"],
        "properties": {
            "flow": {"type": "object"},
            "T": _list_pos,
            "eps": _pos,
            "dt": _pos,
            "M": {"type": "integer", "minimum": 2},
            "levels": _posint,
        },
    },
    "taub": {
        "type": "object",
        "required": ["stream", "T", "p", "lam"],
        "properties": {
            "stream": {"type": "object"},
            "T": _pos,
            "h": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "p": {"type": "integer", "minimum": 2},
            "lam": {"type": "array", "items": _num, "minItems": 1},
            "weyl": {
                "type": "object",
                "required": ["m", "u0"],
                "properties": {"m": _posint, "u0": _pos, "vol": _pos, "T": _pos},
            },
        },
    },
    "eta": {
        "type": "object",
        "required": ["stream", "method"],
        "properties": {
            "stream": {"type": "object"},
            "method": {"enum": ["erfc", "zeta", "split"]},
            "small_t": {"type": "string", "pattern": r"^(none|progression(:[0-9.eE+-]+)?)$"},
        },
    },
    "geom": {
        "type": "object",
        "required": ["flow", "samples"],
        "properties": {
            "flow": {"type": "object"},
            "samples": {"type": "integer", "minimum": 2},
            "vol_X": {"type": "number", "minimum": 0},
        },
    },
    "preset": {
        "type": "object",
        "required": ["name", "h"],
        "properties": {
            "name": {"enum": ["cor13", "cor14", "thm11"]},
            "h": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0,
                                             "exclusiveMaximum": 1}, "minItems": 1},
            "nu": {"type": "number", "exclusiveMinimum": 1},
            "htop": _pos,
            "lam": _pos,
            "n": {"type": "integer", "minimum": 3},
            "c": _pos,
            "delta": {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5},
            "eps_exponent": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
            "T": _pos,
        },
    },
}


class PresetError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Subcommand bodies: config dict -> payload {"rows", "summary", "checks", "plot"}
# ---------------------------------------------------------------------------


def _flow(spec: dict):
    from .diophantine import parse_real
    from .flows import flow_from_dict

    spec = dict(spec)
    if "a" in spec:
        spec["a"] = [float(parse_real(v)(30)) if isinstance(v, str) else v for v in spec["a"]]
    return flow_from_dict(spec)


def _stream(spec: dict):
    from .spectral_model import EigenvalueStream, synthesize_stream

    if "kind" in spec:
        return synthesize_stream(spec, float(spec.get("h", 1.0)))
    return EigenvalueStream.from_dict(spec)


def run_dioph(cfg: dict, seed: int, workers: int) -> dict:
    from .diophantine import cf_expand, estimate_mu, estimate_nu, parse_real

    if cfg["mode"] == "mu":
        if "x" not in cfg:
            raise SchemaError(["x"], ["required for mode 'mu'"])
        cf = cf_expand(parse_real(cfg["x"]), cfg.get("depth", 30), cfg.get("dps", 100))
        est = estimate_mu(cf)
        rows = [{"k": k, "p": str(p), "q": str(q), "quotient": int(a)}
                for k, ((p, q), a) in enumerate(zip(cf.convergents, cf.partial_quotients))]
        plot = [[k, math.log(int(q))] for k, (p, q) in enumerate(cf.convergents) if int(q) > 0]
    else:
        if "a" not in cfg:
            raise SchemaError(["a"], ["required for mode 'nu'"])
        a = [float(parse_real(v)(30)) for v in cfg["a"]]
        est = estimate_nu(a, cfg.get("t_max", 1e4))
        rows = [{"t": t, "distance": d} for t, d in est.evidence]
        plot = [[math.log(t), math.log(d)] for t, d in est.evidence if d > 0]
    summary = {"exponent": est.exponent, "method": est.method, "window": est.window,
               "fit_residual": est.fit_residual, "periodic": est.periodic}
    return {"rows": rows, "summary": summary, "checks": {}, "plot": plot}


def run_recur(cfg: dict, seed: int, workers: int) -> dict:
    from .recurrence import (RecurrenceConfig, estimate_lifted_volume, estimate_volume,
                             scaling_fit)

    flow = _flow(cfg["flow"])
    mode = cfg.get("mode", "plain")
    rows, series = [], []
    for T in cfg["T"]:
        rc = RecurrenceConfig(T, cfg["eps"], cfg["samples"], seed, cfg.get("dt"), workers=workers)
        if mode == "lifted":
            est = estimate_lifted_volume(flow, rc)
        else:
            est = estimate_volume(flow, rc, extended=(mode == "extended"))
        series.append((T, est))
        rows.append({"T": T, "fraction": est.fraction, "ci_low": est.ci_low,
                     "ci_high": est.ci_high, "volume": est.volume, "hits": est.hits,
                     "radius": est.radius})
    summary = {"n_cells": len(rows), "mode": mode}
    fit = cfg.get("fit", "none")
    if fit != "none":
        sf = scaling_fit(series, fit)
        summary["fit"] = sf.to_dict()
    plot = [[r["T"], r["volume"]] for r in rows]
    return {"rows": rows, "summary": summary, "checks": {}, "plot": plot}


def run_entropy(cfg: dict, seed: int, workers: int) -> dict:
    from .entropy import estimate_htop, suspension_lattice_cloud
    from .flows import SuspensionFlow

    flow = _flow(cfg["flow"])
    M, levels = cfg.get("M", 400), cfg.get("levels", 10)
    if isinstance(flow, SuspensionFlow):
        cloud = suspension_lattice_cloud(M, levels)
    else:
        cloud = flow.sample(np.random.default_rng(seed), M * M * levels)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = estimate_htop(flow, cloud, (cfg["eps"],), cfg["T"], cfg.get("dt", 0.05), seed=seed)
    counts = est.counts[cfg["eps"]]
    sat = est.saturated[cfg["eps"]]
    rows = [{"T": T, "N": n, "lnN": math.log(n), "saturated": s}
            for (T, n), s in zip(counts, sat)]
    summary = {"htop": est.htop, "cloud_size": len(cloud), "warnings": est.warnings}
    plot = [[r["T"], r["lnN"]] for r in rows]
    return {"rows": rows, "summary": summary, "checks": {}, "plot": plot}


def run_taub(cfg: dict, seed: int, workers: int) -> dict:
    from .tauberian import local_weyl_check, make_kernel, mollifier_bound_check, smoothed_counting

    stream = _stream(cfg["stream"])
    kernel = make_kernel("bspline", cfg["p"])
    T, h = cfg["T"], cfg.get("h", 1.0)
    lam = np.asarray(cfg["lam"], dtype=float)
    nz = lam[lam != 0]
    rep = mollifier_bound_check(kernel, T, nz) if nz.size else None
    rows, k = [], 0
    for x in lam:
        row = {"lam": float(x), "smoothed": smoothed_counting(stream, kernel, T, float(x), h)}
        if x != 0:
            row.update(bound=float(rep.rhs[k]), slack=float(rep.slack[k]))
            k += 1
        else:
            row.update(bound=float("nan"), slack=float("nan"))
        rows.append(row)
    checks = {"mollifier_bound": bool(rep.holds) if rep is not None else True}
    summary = {"kernel_order": cfg["p"], "stream_size": len(stream)}
    if "weyl" in cfg:
        w = cfg["weyl"]
        wr = local_weyl_check(stream, w.get("T", T), h, w["m"], w["u0"], w.get("vol", 1.0))
        summary["local_weyl"] = wr.to_dict()
        checks["local_weyl"] = wr.holds
    plot = [[r["lam"], r["smoothed"]] for r in rows]
    return {"rows": rows, "summary": summary, "checks": checks, "plot": plot}


def run_eta(cfg: dict, seed: int, workers: int) -> dict:
    from .eta import ProgressionSmallT, eta_erfc, eta_full_from_stream, eta_zeta_progression

    stream = _stream(cfg["stream"])
    method = cfg["method"]
    small = cfg.get("small_t", "none")
    provider = None
    if small.startswith("progression"):
        a = float(small.split(":")[1]) if ":" in small else None
        provider = ProgressionSmallT(a)

    def evaluate(s):
        if method == "erfc":
            return eta_erfc(s)
        if method == "split":
            return eta_full_from_stream(s, provider)
        a = ProgressionSmallT().parameters(s)[0]
        return eta_zeta_progression(a, s.cutoff)

    res = evaluate(stream)
    neg = evaluate(stream.negate())
    rows = [{"method": res.method, "value": res.value, "tail_bound": res.tail_bound,
             "small_t_omitted": res.small_t_omitted}]
    checks = {"antisymmetry": neg.value == -res.value}
    summary = res.to_dict()
    summary["kernel_dim"] = stream.kernel_dim()
    summary["reduced"] = 0.5 * (stream.kernel_dim() + res.value)
    return {"rows": rows, "summary": summary, "checks": checks, "plot": []}


def run_geom(cfg: dict, seed: int, workers: int) -> dict:
    from .contact_geometry import (contact_volume, contact_volume_closed_form,
                                   leading_term_metric_contact)
    from .flows import LensFlow

    flow = _flow(cfg["flow"])
    if not isinstance(flow, LensFlow):
        raise SchemaError(["flow/kind"], ["geom needs a lens or ellipsoid flow"])
    p = flow.params
    mc = contact_volume(p, cfg["samples"], seed)
    exact = contact_volume_closed_form(p).value
    rel = abs(mc.value - exact) / exact
    summary = {"contact_volume": mc.to_dict(), "closed_form": exact, "relative_error": rel}
    if "vol_X" in cfg:
        summary["leading_term_metric_contact"] = leading_term_metric_contact(p.m, cfg["vol_X"])
    rows = [{"m": p.m, "q0": p.q0, "value": mc.value, "ci_low": mc.ci[0], "ci_high": mc.ci[1],
             "closed_form": exact}]
    return {"rows": rows, "summary": summary, "checks": {"within_1pct": rel < 0.01}, "plot": []}


def preset_schedule(cfg: dict) -> list[dict]:
    """``(h, T, eps)`` rows for the named parameter recipe."""
    name = cfg["name"]
    rows = []
    for h in cfg["h"]:
        if name == "cor14":
            if "nu" not in cfg:
                raise PresetError("cor14 needs nu")
            T = h ** (-1.0 / (2 * cfg["nu"] - 1))
            eps = h ** cfg.get("eps_exponent", 0.49)
        elif name == "cor13":
            n, c = cfg.get("n", 3), cfg.get("c", 0.7)
            if not c < n / 4:
                raise PresetError(f"cor13 needs c < n/4 = {n / 4}")
            if "lam" in cfg:
                lam = cfg["lam"]
            elif "htop" in cfg:
                lam = 1.1 * (2.0 / n) * cfg["htop"]
            else:
                raise PresetError("cor13 needs htop or lam")
            if "htop" in cfg and not lam > 2.0 / n * cfg["htop"]:
                raise PresetError("lam must exceed (2/n) htop")
            T = c * abs(math.log(h)) / lam
            eps = h ** cfg.get("eps_exponent", 0.49)
        elif name == "thm11":
            T = cfg.get("T", 10.0)
            eps = h ** cfg.get("delta", 0.0)
        else:
            raise PresetError(f"unknown preset {name!r}")
        rows.append({"h": h, "T": T, "eps": eps})
    return rows


def run_preset(cfg: dict, seed: int, workers: int) -> dict:
    rows = preset_schedule(cfg)
    return {"rows": rows, "summary": {"name": cfg["name"]}, "checks": {},
            "plot": [[r["h"], r["T"]] for r in rows]}


RUNNERS = {
    "dioph": run_dioph, "recur": run_recur, "entropy": run_entropy, "taub": run_taub,
    "eta": run_eta, "geom": run_geom, "preset": run_preset,
}


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


def execute(subcommand: str, config: dict, seed: int = 0, workers: int = 1) -> dict:
    """Validate, run and wrap the result in a run record (not yet written)."""
    if subcommand not in RUNNERS:
        raise SchemaError(["subcommand"], [f"unknown subcommand {subcommand!r}"])
    validate(config, SCHEMAS[subcommand])
    chash = content_hash({"subcommand": subcommand, "config": config, "seed": seed})
    t0 = time.perf_counter()
    payload = RUNNERS[subcommand](config, seed, workers)
    wall = time.perf_counter() - t0
    for row in payload["rows"]:
        row["config_hash"] = chash
    return {
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
        "workers": workers,
        "config_hash": chash,
        "payload": payload,
        "payload_hash": content_hash(payload),
        "wall_time": wall,
        "version": __version__,
        "backend": BACKEND,
    }


def write_outputs(record: dict, out: Path, plot_data: bool = False) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    sub = record["subcommand"]
    rows = record["payload"]["rows"]
    if rows:
        keys = list(dict.fromkeys(k for r in rows for k in r))
        with open(out / f"{sub}.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            for r in rows:
                w.writerow({k: (canonical_json(v) if isinstance(v, (list, dict)) else v)
                            for k, v in r.items()})
    if plot_data and record["payload"]["plot"]:
        with open(out / f"{sub}.dat", "w") as fh:
            fh.write(f"# config_hash {record['config_hash']}\n")
            for x, y in record["payload"]["plot"]:
                fh.write(f"{x!r} {y!r}\n")
    path = out / f"{sub}.json"
    path.write_text(dumps(record))
    return path


def replay(record: dict) -> tuple[bool, dict]:
    """Re-run a record's config and seed single-threaded; compare payload hashes."""
    new = execute(record["subcommand"], record["config"], record["seed"], workers=1)
    return new["payload_hash"] == record["payload_hash"], new


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _json_arg(text: str):
    """Inline JSON, a path to a JSON file, or a builtin name (``lens-phi``, ``cat``)."""
    builtin = {"lens-phi": LENS_PHI, "cat": CAT}
    if text in builtin:
        return dict(builtin[text])
    if os.path.exists(text):
        return json.loads(Path(text).read_text())
    return json.loads(text)


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors: exit 1, keeping 2 for failed checks."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="reeblab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags given explicitly override it")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", default="reeblab-out")
    common.add_argument("--plot-data", action="store_true", help="also write a two-column .dat")
    sub = p.add_subparsers(dest="subcommand", required=True)

    s = sub.add_parser("dioph", parents=[common], help="irrationality exponents")
    s.add_argument("--mode", choices=["mu", "nu"])
    s.add_argument("--x", help="real expression, e.g. 'sqrt(2)' or 'liouville(5)'")
    s.add_argument("--a", type=lambda t: t.split(","), help="comma-separated expressions")
    s.add_argument("--depth", type=int)
    s.add_argument("--dps", type=int)
    s.add_argument("--t-max", dest="t_max", type=float)

    s = sub.add_parser("recur", parents=[common], help="recurrence-set volumes")
    s.add_argument("--flow", type=_json_arg)
    s.add_argument("--T", type=_floats)
    s.add_argument("--eps", type=float)
    s.add_argument("--samples", type=int)
    s.add_argument("--dt", type=float)
    s.add_argument("--mode", choices=["plain", "extended", "lifted"])
    s.add_argument("--fit", choices=["none", "elliptic", "anosov"])

    s = sub.add_parser("entropy", parents=[common], help="topological entropy by Bowen packing")
    s.add_argument("--flow", type=_json_arg)
    s.add_argument("--T", type=_floats)
    s.add_argument("--eps", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--M", type=int)
    s.add_argument("--levels", type=int)

    s = sub.add_parser("taub", parents=[common], help="smoothed counting and mollifier bound")
    s.add_argument("--stream", type=_json_arg)
    s.add_argument("--T", type=float)
    s.add_argument("--h", type=float)
    s.add_argument("--p", type=int)
    s.add_argument("--lam", type=_floats)
    s.add_argument("--weyl", type=_json_arg, help='e.g. {"m": 1, "u0": 0.0224}')

    s = sub.add_parser("eta", parents=[common], help="eta invariant of a stream")
    s.add_argument("--stream", type=_json_arg)
    s.add_argument("--method", choices=["erfc", "zeta", "split"])
    s.add_argument("--small-t", dest="small_t")
    s.add_argument("--cutoff", type=float, help="shorthand with --progression")
    s.add_argument("--progression", type=float, help="use the stream {n + a}")

    s = sub.add_parser("geom", parents=[common], help="contact volume")
    s.add_argument("--flow", type=_json_arg)
    s.add_argument("--samples", type=int)
    s.add_argument("--vol-X", dest="vol_X", type=float)

    s = sub.add_parser("preset", parents=[common], help="parameter schedules")
    s.add_argument("--name")
    s.add_argument("--h", type=_floats)
    for k in ("nu", "htop", "lam", "c", "delta", "T"):
        s.add_argument(f"--{k}", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--eps-exponent", dest="eps_exponent", type=float)

    s = sub.add_parser("replay", help="re-run a run record and compare payloads")
    s.add_argument("record")
    return p


_NOT_CONFIG = {"subcommand", "config", "seed", "workers", "out", "plot_data", "progression",
               "cutoff"}

DEFAULTS = {
    "recur": {"flow": LENS_PHI, "mode": "plain", "fit": "none"},
    "entropy": {"flow": CAT, "T": [1.0, 2.0, 3.0, 4.0], "eps": 0.05, "dt": 0.05, "M": 400,
                "levels": 10},
    "taub": {"T": 10.0, "p": 2, "h": 1.0},
    "eta": {"method": "erfc", "small_t": "none"},
    "geom": {"flow": LENS_PHI, "samples": 20000},
}


def config_from_args(args) -> dict:
    cfg = dict(DEFAULTS.get(args.subcommand, {}))
    if args.config:
        cfg.update(json.loads(Path(args.config).read_text()))
    for k, v in vars(args).items():
        if k not in _NOT_CONFIG and v is not None:
            cfg[k] = v
    if getattr(args, "progression", None) is not None:
        cut = args.cutoff if args.cutoff is not None else 1e4
        cfg["stream"] = {"kind": "progression", "a": args.progression, "cutoff": cut}
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.subcommand == "replay":
            record = json.loads(Path(args.record).read_text())
            same, new = replay(record)
            print(f"replay {'identical' if same else 'DIFFERS'}: {new['payload_hash']}")
            return 0 if same else 2
        cfg = config_from_args(args)
        record = execute(args.subcommand, cfg, args.seed, args.workers)
        path = write_outputs(record, Path(args.out), args.plot_data)
    except SchemaError as exc:
        print("invalid configuration:", file=sys.stderr)
        for f, m in zip(exc.fields, exc.messages):
            print(f"  {f}: {m}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - reported as exit code 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    checks = record["payload"]["checks"]
    print(f"{args.subcommand}: wrote {path} ({record['config_hash'][:12]})")
    failed = [k for k, ok in checks.items() if not ok]
    for k in failed:
        print(f"property check failed: {k}", file=sys.stderr)
    return 2 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
