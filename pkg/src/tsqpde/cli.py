"""Command-line entry point.

Verbs: ``build``, ``compress``, ``simulate``, ``estimate``, ``run``, ``report``.
Every ``RunConfig`` key is also a flag (``--n-sites 4``, ``--aem true``);
flags override ``--config`` files, which override ``--preset`` values.

Exit codes: 0 success, 2 invalid input, 3 resource budget exceeded.
Set ``TSQPDE_THREADS`` to cap BLAS threads.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import mps as mpslib
from .exceptions import ConfigError, InsufficientDataError, NoSignalError, ResourceError
from .pipeline import (PRESETS, RunConfig, RunReport, Workspace, _evol_stage, _prep_stage, _series, build_stage,
                       emit_plotdata, parse_config, preset_configs, run_pipeline, serialize_config, validate_config)
from .spectral import TimeSeries, estimate_gap, gap_trace

EXIT_OK, EXIT_INVALID, EXIT_RESOURCE = 0, 2, 3
THREADS_ENV = "TSQPDE_THREADS"

log = logging.getLogger("tsqpde")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named reproduction preset")
    for f in dataclasses.fields(RunConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, metavar=f.name.upper(), default=None)


def _configs(args) -> list[RunConfig]:
    base = RunConfig()
    if args.config:
        base = parse_config(Path(args.config).read_text())
    overrides = "".join(f"{k[4:]} = {v}\n" for k, v in vars(args).items() if k.startswith("cfg_") and v is not None)
    if overrides:
        base = parse_config(overrides, base)
    if args.preset:
        cfgs = preset_configs(args.preset, base)
        # explicit flags win over preset entries
        if overrides:
            cfgs = [parse_config(overrides, c) for c in cfgs]
        return cfgs
    return [validate_config(base)]


def _cmd_build(cfg: RunConfig) -> dict:
    ws = Workspace(cfg)
    terms, g, e, sol, ref = build_stage(cfg, ws)
    fwd = ref("forward", cfg.ref_slices)
    mpslib.save(fwd, ws.out / "reference_forward.npz")
    (ws.out / "config.txt").write_text(serialize_config(cfg))
    with open(ws.out / "hamiltonian.tsv", "w") as fh:
        fh.write("coefficient\tpauli\n")
        for t in terms:
            fh.write(f"{t.coefficient!r}\t{t.label(cfg.n_qubits)}\n")
    return {"gap_ref": sol.gap, "e0": float(sol.energies[0]), "n_terms": len(terms), "reference_bonds": fwd.bond_dims}


def _cmd_compress(cfg: RunConfig) -> dict:
    ws = Workspace(cfg)
    terms, g, e, sol, ref = build_stage(cfg, ws)
    report = RunReport(cfg, sol.gap, float("nan"), None, None)  # type: ignore[arg-type]
    prep = _prep_stage(cfg, ws, g, e, report)
    evol, variants = _evol_stage(cfg, ws, ref, report)
    out = {}
    for name, c in [("prep", prep), ("evol", evol)] + [(f"variant_{k}", v) for k, v in variants.items()]:
        if hasattr(c, "to_gate_list"):
            safe = name.replace("=", "")
            c.save(ws.out / f"{safe}.json")
            (ws.out / f"{safe}.gates").write_text(c.to_gate_list())
            out[name] = {"width": c.width, "depth": c.depth}
    out["prep_overlap"] = report.prep_overlap
    out["evol_fidelity"] = report.evol_fidelity
    return out


def _cmd_simulate(cfg: RunConfig) -> dict:
    ws = Workspace(cfg)
    terms, g, e, sol, ref = build_stage(cfg, ws)
    report = RunReport(cfg, sol.gap, float("nan"), None, None)  # type: ignore[arg-type]
    prep = _prep_stage(cfg, ws, g, e, report)
    evol, _ = _evol_stage(cfg, ws, ref, report)
    ts, _, a0sq = _series(cfg, prep, evol, ws.out / "runlog.tsv")
    ts.write(ws.out / "timeseries.tsv")
    return {"samples": len(ts), "a0sq": a0sq, "stop_reason": ts.metadata.get("stop_reason")}


def _cmd_estimate(series_path: str, reference: float | None, out_dir: str | None) -> dict:
    ts = TimeSeries.read(series_path)
    gap, est = estimate_gap(ts)
    out = {"gap": gap, "alpha": est.alpha, "residual": est.residual, "modes": len(est.modes)}
    if reference is not None:
        out["gap_error"] = gap - reference
    if out_dir:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        est.write(d / "spectrum.tsv")
        rows = gap_trace(ts, reference)
        with open(d / "gap_trace.tsv", "w") as fh:
            fh.write("step\tvalue\n")
            for r, v in rows:
                fh.write(f"{r}\t{v!r}\n")
    return out


def _cmd_report(out_dir: str) -> dict:
    d = Path(out_dir)
    summary = d / "summary.json"
    if not summary.exists():
        raise FileNotFoundError(f"no summary.json in {d}")
    return json.loads(summary.read_text())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsqpde", description="Tensor-network phase-difference estimation pipeline")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, help_ in [("build", "Hamiltonian, reference gap and reference MPO"),
                        ("compress", "optimize preparation and evolution circuits"),
                        ("simulate", "measure the time series"),
                        ("run", "full pipeline with estimates and plot data")]:
        _add_config_flags(sub.add_parser(verb, help=help_))
    p = sub.add_parser("estimate", help="gap estimate from a time-series file")
    p.add_argument("series")
    p.add_argument("--reference", type=float, default=None)
    p.add_argument("--out", default=None)
    p = sub.add_parser("report", help="print the summary of a finished run")
    p.add_argument("out_dir")
    return parser


def _dispatch(args) -> list[dict]:
    if args.verb == "estimate":
        return [_cmd_estimate(args.series, args.reference, args.out)]
    if args.verb == "report":
        return [_cmd_report(args.out_dir)]
    results = []
    for cfg in _configs(args):
        if args.verb == "build":
            results.append(_cmd_build(cfg))
        elif args.verb == "compress":
            results.append(_cmd_compress(cfg))
        elif args.verb == "simulate":
            results.append(_cmd_simulate(cfg))
        else:
            rep = run_pipeline(cfg)
            results.append({"output_dir": cfg.output_dir, **rep.summary()})
    return results


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    threads = os.environ.get(THREADS_ENV)
    try:
        limit = int(threads) if threads else None
    except ValueError:
        print(f"error: {THREADS_ENV} must be an integer", file=sys.stderr)
        return EXIT_INVALID
    try:
        with threadpool_limits(limits=limit):
            results = _dispatch(args)
    except ConfigError as exc:
        print(f"error: {exc} (fields: {', '.join(exc.fields)})", file=sys.stderr)
        return EXIT_INVALID
    except (InsufficientDataError, NoSignalError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ResourceError, MemoryError) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    for r in results:
        print(json.dumps(r, sort_keys=True, default=str))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
