"""Command-line entry point: encode, decode, simulate, analyze, optimize.

Reports go to ``--out`` (or stdout) as one JSON record per line, or as CSV
rows with ``--format csv``; a human-readable summary goes to stderr.
Exit codes: 0 ok, 2 configuration, 3 parse, 4 infeasible, 5 corruption, 6 contract violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import AnalysisConfig, first_intersection, is_feasible, little_f, zigzag_curve
from .channel import generate_batches, rate_region_bounds
from .config import load_config
from .decoder import DecoderConfig, decode
from .errors import ConfigurationError, InfeasibleError, LCFountainError
from .optimizer import OptimizationProblem, solve
from .simulate import simulate
from .trace import read_trace, write_trace


# -- report emission ---------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def emit(report: dict, rows: list, args, summary: str):
    """Write the report (json) or its tabular rows (csv), then the summary."""
    if args.timing:
        report["wall_time"] = round(time.perf_counter() - args.t0, 3)
    if args.format == "json":
        text = json.dumps(_jsonable(report), sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(_jsonable(rows))
        text = buf.getvalue()
    if args.out_report:
        Path(args.out_report).write_text(text)
    else:
        sys.stdout.write(text)
    if not args.quiet:
        sys.stderr.write(summary.rstrip("\n") + "\n")


def _table(header, rows):
    cols = [header] + [[f"{v:.4f}" if isinstance(v, float) else str(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cols) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cols]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _overrides(args):
    return {"seed": args.seed, "trials": getattr(args, "trials", None)}


# -- subcommands -------------------------------------------------------------


def cmd_encode(args):
    cfg = load_config(args.config, need=("channel", "psi", "N", "K"), overrides=_overrides(args))
    rng = np.random.default_rng(cfg.seed)
    inputs = None
    if args.input:
        inputs = _read_payloads(args.input, cfg.field, cfg.K, cfg.T)
    elif cfg.T == 0:
        raise ConfigurationError("encode needs T >= 1 to carry payloads")
    trace, inputs = generate_batches(cfg.users(), cfg.g, cfg.N, rng, cfg.slots, cfg.field, cfg.T, inputs=inputs)
    write_trace(args.trace, trace)
    if args.save_inputs:
        _write_payloads(args.save_inputs, inputs, cfg.field)
    hist = {str(k): int(v) for k, v in zip(*np.unique(trace.types, return_counts=True))}
    report = {"command": "encode", "config_digest": cfg.digest, "seed": cfg.seed, "L": cfg.L, "K": cfg.K,
              "N": cfg.N, "T": cfg.T, "slot_types": hist, "trace": str(args.trace)}
    rows = [{"user": lab, "K": k, "N": cfg.N} for lab, k in zip(cfg.labels, cfg.K)]
    emit(report, rows, args, f"wrote {cfg.N} batches for {cfg.L} users to {args.trace}")


def cmd_decode(args):
    trace = read_trace(args.trace)
    dec = DecoderConfig()
    labels = None
    digest = None
    if args.config:
        cfg = load_config(args.config)
        if cfg.L != trace.L:
            raise ConfigurationError(f"config has L={cfg.L} users but the trace has L={trace.L}")
        dec, labels, digest = cfg.decoder, cfg.labels, cfg.digest
    if args.instance:
        dec = DecoderConfig(args.instance, args.iterations)
    labels = labels or [chr(ord("A") + s) for s in range(trace.L)]
    res = decode(trace, dec, payloads=trace.T > 0)
    if args.payloads_out and res.inputs is not None:
        _write_payloads(args.payloads_out, res.inputs, trace.field)
    report = {"command": "decode", "config_digest": digest, **res.report.to_dict()}
    rows = [{"user": lab, "K": k, "decoded": d, "fraction": f}
            for lab, k, d, f in zip(labels, res.report.K, res.report.decoded, res.report.fractions)]
    emit(report, rows, args, _table(["user", "K", "decoded", "fraction"],
                                    [[r["user"], r["K"], r["decoded"], r["fraction"]] for r in rows]))


def cmd_simulate(args):
    cfg = load_config(args.config, need=("channel", "psi", "N", "K"), overrides=_overrides(args))
    report = simulate(cfg, workers=args.workers)
    agg = report["aggregate"]
    rows = [{"trial": r["trial"], "user": lab, "fraction": f}
            for r in report["records"] for lab, f in zip(cfg.labels, r["fractions"])]
    th = report["theory"]
    body = [[lab, agg["mean"][s], agg["min"][s], agg["quantiles"]["0.05"][s]]
            + ([th["limit"][s]] if th else []) for s, lab in enumerate(cfg.labels)]
    summary = _table(["user", "mean", "min", "q05"] + (["z*"] if th else []), body)
    if "hit_rate" in agg:
        summary += f"\ntrials with every user >= {agg['target']}: {agg['hit_rate']:.2%}"
    emit(report, rows, args, summary)


def cmd_analyze(args):
    cfg = load_config(args.config, need=("channel", "psi"), overrides=_overrides(args))
    c = cfg.analysis_c()
    if c is None:
        raise ConfigurationError("analyze needs analysis.C")
    acfg = AnalysisConfig(cfg.g, cfg.psis, c, cfg.analysis.get("kind", cfg.decoder.lif_kind),
                          cfg.analysis.get("i", cfg.decoder.iterations))
    inter = first_intersection(acfg, np.random.default_rng(cfg.seed))
    points = [list(map(float, p)) for p in cfg.analysis.get("points", [])]
    checks = [{"point": p, "feasible": is_feasible(p, acfg),
               "f": [little_f(s, p, acfg) for s in range(cfg.L)]} for p in points]
    curves = []
    for bps in cfg.analysis.get("curves", []):
        curve = zigzag_curve(bps, None, acfg)
        curves.append({"breakpoints": bps, "vertices": curve.points.tolist(),
                       "feasible": bool(np.all(curve.feasible))})
    from .analysis import fixed_point
    tr = fixed_point(acfg)
    bounds = [{"users": "+".join(cfg.labels[s] for s in S), "bound": v} for S, v in rate_region_bounds(cfg.g)]
    report = {"command": "analyze", "config_digest": cfg.digest, "C": c, "kind": acfg.kind,
              "limit": inter.point.tolist(), "on_surfaces": inter.on_surfaces, "minimal": inter.minimal,
              "iterations": tr.iterations, "iterates": tr.iterates.tolist(), "points": checks,
              "curves": curves, "rate_bounds": bounds, "beta": cfg.g.beta()}
    rows = [{"iteration": i, **{lab: z[s] for s, lab in enumerate(cfg.labels)}} for i, z in enumerate(tr.iterates)]
    summary = _table(["user", "C/beta", "z*"], [[lab, c[s], inter.point[s]] for s, lab in enumerate(cfg.labels)])
    summary += f"\n{tr.iterations} iterations; minimal intersection: {inter.minimal}"
    emit(report, rows, args, summary)


def _problem(cfg):
    o = cfg.optimizer
    L = cfg.L
    eta = [float(e) for e in ([o.get("eta", 0.98)] * L if not isinstance(o.get("eta"), list) else o["eta"])]
    fixed = {cfg.labels.index(k): float(v) for k, v in (o.get("fixed_theta") or {}).items()}
    opt = o.get("optimize")
    optimized = [cfg.labels.index(k) for k in opt] if opt else None
    try:
        return OptimizationProblem(cfg.g, eta, optimized, fixed, o.get("kind", "star"),
                                   int(o.get("t_max", 20)), int(o.get("M", 20)), o.get("D"))
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None


def cmd_optimize(args):
    cfg = load_config(args.config, need=("channel",), overrides=_overrides(args))
    problem = _problem(cfg)
    o = cfg.optimizer
    kw = {k: int(o[k]) for k in ("outer", "perturbations") if k in o}
    res = solve(problem, np.random.default_rng(cfg.seed), restarts=int(o.get("restarts", 20)),
                workers=args.workers, **kw)
    report = {"command": "optimize", "config_digest": cfg.digest, "seed": cfg.seed, **res.to_dict(problem),
              "sum_rate": sum(res.rates(problem)),
              "rate_bounds": [{"users": "+".join(cfg.labels[s] for s in S), "bound": v}
                              for S, v in rate_region_bounds(cfg.g)]}
    rows = [{"user": lab, "eta": problem.eta[s], "theta": res.theta[s], "rate": res.rates(problem)[s],
             "psi": json.dumps(res.psis[s].as_pairs())} for s, lab in enumerate(cfg.labels)]
    summary = _table([f"R_{lab}/beta" for lab in cfg.labels] + ["R_sum/beta", "status"],
                     [res.rates(problem) + [sum(res.rates(problem)), res.status]])
    emit(report, rows, args, summary)
    if res.status == "infeasible":
        raise InfeasibleError("no restart produced a verified configuration")


# -- payload files -----------------------------------------------------------


def _read_payloads(path, field, K, T):
    data = Path(path).read_bytes()
    dt = np.dtype(field.dtype).newbyteorder("<")
    need = sum(K) * T * dt.itemsize
    if T == 0 or len(data) != need:
        raise ConfigurationError(f"payload file has {len(data)} bytes, expected {need} (sum K * T symbols)")
    flat = np.frombuffer(data, dtype=dt).astype(field.dtype)
    if flat.size and int(flat.max()) >= field.order:
        raise ConfigurationError(f"payload symbol outside GF({field.order})")
    out, pos = [], 0
    for k in K:
        out.append(flat[pos:pos + k * T].reshape(k, T).copy())
        pos += k * T
    return out


def _write_payloads(path, inputs, field):
    dt = np.dtype(field.dtype).newbyteorder("<")
    Path(path).write_bytes(b"".join(np.asarray(x).astype(dt).tobytes() for x in inputs))


# -- parser ------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="lcfountain", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"lcfountain {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit); overrides the config")
    common.add_argument("--out", dest="out_report", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--timing", action="store_true", help="add wall time to the report")
    common.add_argument("--quiet", action="store_true", help="no summary on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("encode", parents=[common], help="write a binary batch trace")
    e.add_argument("--config", required=True)
    e.add_argument("--trace", required=True, help="trace file to write")
    e.add_argument("--input", help="raw payload file (sum K_s * T symbols); random when omitted")
    e.add_argument("--save-inputs", help="write the encoded payloads here")
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", parents=[common], help="decode a trace file")
    d.add_argument("trace")
    d.add_argument("--config")
    d.add_argument("--instance", choices=("substitution", "bp", "ge"))
    d.add_argument("--iterations", type=int)
    d.add_argument("--payloads-out", help="write recovered payloads (undecoded rows are zero)")
    d.set_defaults(func=cmd_decode)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo trials")
    s.add_argument("--config", required=True)
    s.add_argument("--trials", type=int)
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", parents=[common], help="fixed point, feasibility and rate bounds")
    a.add_argument("--config", required=True)
    a.set_defaults(func=cmd_analyze)

    o = sub.add_parser("optimize", parents=[common], help="design degree distributions")
    o.add_argument("--config", required=True)
    o.set_defaults(func=cmd_optimize)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.t0 = time.perf_counter()
    if args.seed is not None and not 0 <= args.seed < 2**64:
        sys.stderr.write("error: --seed must be an unsigned 64-bit integer\n")
        return ConfigurationError.exit_code
    if args.workers < 1:
        sys.stderr.write("error: --workers must be >= 1\n")
        return ConfigurationError.exit_code
    try:
        args.func(args)
    except LCFountainError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
