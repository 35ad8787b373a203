"""End-to-end runs: model -> circuits -> measurements -> gap estimate.

Configuration is flat ``key = value`` text.  Every key of ``RunConfig`` may
appear once; unknown keys are rejected.  ``serialize_config`` writes all keys
in sorted order, which is the canonical form.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mps as mpslib
from .aem import MLTables, VariantSet, compute_M_L, mitigated_series, solve_weights
from .circuits import BrickWallCircuit
from .compress import SweepReport, enhance_overlap, optimize_evolution, optimize_prep
from .exceptions import ConfigError
from .model import HubbardSpec, build_hubbard, select_target_states
from .mps import MPO, MPS, circuit_to_mps, statevector_to_mps, superpose_ancilla
from .sim import Experiment, NoiseSpec
from .spectral import SpectralEstimate, TimeSeries, collect_series, estimate_gap, gap_trace, shot_threshold
from .trotter import TrotterSpec, build_trotter_mpo

__all__ = [
    "RunConfig",
    "RunReport",
    "parse_config",
    "serialize_config",
    "load_config",
    "validate_config",
    "run_pipeline",
    "emit_plotdata",
    "PRESETS",
    "preset_configs",
    "Workspace",
]

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    n_sites: int = 4
    hopping: float = 1.0
    onsite: float = 10.0
    dt: float = 0.05
    max_steps: int = 50
    d_prep: int = 5
    d_evol: int = 5
    prep_sweeps: int = 1000
    evol_sweeps: int = 10000
    opt_cutoff: float = 1e-12
    ref_slices: int = 100
    trotter_cutoff: float = 1e-12
    prep_mode: str = "compressed"  # or "exact"
    evol_mode: str = "compressed"  # or "exact"
    perturbation: float = 0.01
    shots: int = 100_000  # 0 selects exact probabilities
    p_step: float = 0.0
    backend: str = "statevector"
    aem: bool = False
    aem_kind: str = "sweeps"
    aem_sweeps: str = "1,10,10000"
    aem_slices: str = "1,4,100"
    aem_cutoff: float = 1e-12
    aem_bond_budget: int = 0  # 0 means unlimited
    enhance: bool = False
    enhance_depth: int = 5
    enhance_sweeps: int = 1000
    enhance_iters: int = 2
    gap_trace: bool = True
    seed: int = 0
    output_dir: str = "out"
    cache_dir: str = ""

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_sites

    def int_list(self, key: str) -> list[int]:
        return [int(x) for x in str(getattr(self, key)).split(",") if x.strip()]


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_CHOICES = {
    "prep_mode": ("compressed", "exact"),
    "evol_mode": ("compressed", "exact"),
    "backend": ("statevector", "mps"),
    "aem_kind": ("sweeps", "slices"),
}


def _coerce(key: str, raw: str):
    typ = _FIELDS[key].type
    raw = raw.strip()
    if typ in ("bool", bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if typ in ("int", int):
        return int(raw)
    if typ in ("float", float):
        return float(raw)
    return raw


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = dataclasses.asdict(base) if base is not None else {}
    bad: list[str] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep or key not in _FIELDS:
            bad.append(key or f"line {lineno}")
            continue
        if key in seen:
            bad.append(key)
            continue
        seen.add(key)
        try:
            values[key] = _coerce(key, raw)
        except ValueError:
            bad.append(key)
    if bad:
        raise ConfigError(f"unreadable or unknown config entries: {', '.join(bad)}", bad)
    cfg = RunConfig(**values)
    validate_config(cfg)
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    return "".join(f"{k} = {_format(getattr(cfg, k))}\n" for k in sorted(_FIELDS))


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


def validate_config(cfg: RunConfig) -> RunConfig:
    bad = []

    def need(cond, key):
        if not cond:
            bad.append(key)

    need(2 <= cfg.n_sites <= 6, "n_sites")
    need(np.isfinite(cfg.hopping), "hopping")
    need(np.isfinite(cfg.onsite), "onsite")
    need(np.isfinite(cfg.dt) and cfg.dt > 0, "dt")
    need(cfg.max_steps >= 4, "max_steps")
    need(cfg.d_prep >= 1, "d_prep")
    need(cfg.d_evol >= 1, "d_evol")
    need(cfg.prep_sweeps >= 0, "prep_sweeps")
    need(cfg.evol_sweeps >= 0, "evol_sweeps")
    need(0 <= cfg.opt_cutoff < 1, "opt_cutoff")
    need(cfg.ref_slices >= 1, "ref_slices")
    need(0 <= cfg.trotter_cutoff < 1, "trotter_cutoff")
    need(cfg.perturbation >= 0, "perturbation")
    need(cfg.shots >= 0, "shots")
    need(0 <= cfg.p_step < 1, "p_step")
    need(0 <= cfg.aem_cutoff < 1, "aem_cutoff")
    need(cfg.aem_bond_budget >= 0, "aem_bond_budget")
    need(cfg.enhance_depth >= 1, "enhance_depth")
    need(cfg.enhance_sweeps >= 0, "enhance_sweeps")
    need(cfg.enhance_iters >= 1, "enhance_iters")
    for key, choices in _CHOICES.items():
        need(getattr(cfg, key) in choices, key)
    for key in ("aem_sweeps", "aem_slices"):
        try:
            vals = cfg.int_list(key)
            need(len(vals) >= 2 and all(v >= 1 for v in vals), key)
        except ValueError:
            bad.append(key)
    if cfg.aem and cfg.evol_mode != "compressed":
        bad.append("aem")
    if bad:
        raise ConfigError(f"invalid config values: {', '.join(bad)}", bad)
    return cfg


# -- caching -------------------------------------------------------------------


def _key(*parts) -> str:
    return hashlib.sha256(json.dumps(parts, sort_keys=True, default=str).encode()).hexdigest()[:20]


class Workspace:
    """Output directory plus a content-keyed cache of expensive artifacts."""

    def __init__(self, cfg: RunConfig):
        self.out = Path(cfg.output_dir)
        self.cache = Path(cfg.cache_dir) if cfg.cache_dir else self.out / "cache"
        self.out.mkdir(parents=True, exist_ok=True)
        self.cache.mkdir(parents=True, exist_ok=True)

    def cached_mpo(self, key: str, build):
        path = self.cache / f"mpo_{key}.npz"
        if path.exists():
            return mpslib.load(path)
        obj = build()
        mpslib.save(obj, path)
        return obj

    def cached_circuits(self, key: str, build):
        """``build()`` returns ``(circuits: dict[str, circuit], reports: list[SweepReport])``."""
        path = self.cache / f"circ_{key}.json"
        if path.exists():
            data = json.loads(path.read_text())
            circs = {k: BrickWallCircuit.from_dict(v) for k, v in data["circuits"].items()}
            reps = [SweepReport(r[0], r[1], r[2]) for r in data["reports"]]
            return circs, reps
        circs, reps = build()
        data = {
            "circuits": {k: c.to_dict() for k, c in circs.items()},
            "reports": [[r.sweep_index, r.objective, r.overlap_or_fidelity] for r in reps],
        }
        path.write_text(json.dumps(data))
        return circs, reps


# -- run -------------------------------------------------------------------------


@dataclass
class RunReport:
    config: RunConfig
    gap_ref: float
    gap_est: float
    series: TimeSeries
    estimate: SpectralEstimate
    trace: list = field(default_factory=list)
    prep_reports: list = field(default_factory=list)
    evol_reports: list = field(default_factory=list)
    prep_overlap: float | None = None
    evol_fidelity: float | None = None
    a0sq: float = 0.5
    aem_gap: float | None = None
    aem_series: TimeSeries | None = None
    aem_estimate: SpectralEstimate | None = None
    aem_trace: list = field(default_factory=list)
    aem_tables: MLTables | None = None
    aem_weights: list = field(default_factory=list)
    variant_gaps: dict = field(default_factory=dict)
    enhance_overlaps: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    @property
    def gap_error(self) -> float:
        return self.gap_est - self.gap_ref

    @property
    def relative_error(self) -> float:
        return abs(self.gap_error) / abs(self.gap_ref)

    @property
    def aem_gap_error(self) -> float | None:
        return None if self.aem_gap is None else self.aem_gap - self.gap_ref

    def summary(self) -> dict:
        out = {
            "gap_ref": self.gap_ref,
            "gap_est": self.gap_est,
            "gap_error": self.gap_error,
            "relative_error": self.relative_error,
            "alpha": self.estimate.alpha,
            "samples": len(self.series),
            "stop_reason": self.series.metadata.get("stop_reason"),
            "a0sq": self.a0sq,
            "prep_overlap": self.prep_overlap,
            "evol_fidelity": self.evol_fidelity,
        }
        if self.aem_gap is not None:
            out["aem_gap"] = self.aem_gap
            out["aem_gap_error"] = self.aem_gap_error
            out["variant_gaps"] = self.variant_gaps
        if self.enhance_overlaps:
            out["enhance_overlaps"] = self.enhance_overlaps
        return out


class _Stage:
    def __init__(self, timings: dict, name: str):
        self.timings, self.name = timings, name

    def __enter__(self):
        self.t0 = time.perf_counter()
        log.info("stage %s", self.name)

    def __exit__(self, *exc):
        self.timings[self.name] = time.perf_counter() - self.t0


def build_stage(cfg: RunConfig, ws: Workspace):
    """Hamiltonian, reference gap, target states and the one-step references."""
    terms = build_hubbard(HubbardSpec(cfg.n_sites, cfg.hopping, cfg.onsite))
    g, e, sol = select_target_states(terms, cfg.n_qubits)
    model = (cfg.n_sites, cfg.hopping, cfg.onsite)

    def ref(sign, slices):
        spec = TrotterSpec(cfg.dt, slices, sign, cfg.trotter_cutoff)
        return ws.cached_mpo(_key("trotter", model, cfg.dt, slices, sign, cfg.trotter_cutoff),
                             lambda: build_trotter_mpo(terms, spec, cfg.n_qubits))

    return terms, g, e, sol, ref


def _prep_stage(cfg, ws, g, e, report):
    if cfg.prep_mode == "exact":
        return np.concatenate([g, e]) / np.sqrt(2)
    target = superpose_ancilla(statevector_to_mps(g), statevector_to_mps(e))
    model = (cfg.n_sites, cfg.hopping, cfg.onsite)
    if cfg.enhance:
        key = _key("enhance", model, cfg.enhance_depth, cfg.enhance_sweeps, cfg.enhance_iters, cfg.opt_cutoff,
                   cfg.perturbation, cfg.seed)

        def build():
            res = enhance_overlap(target, cfg.enhance_depth, cfg.enhance_sweeps, cfg.enhance_iters, cfg.opt_cutoff,
                                  perturbation=cfg.perturbation, seed=cfg.seed, min_gain=0.0)
            reps = [SweepReport(k + 1, 1 - o, o) for k, o in enumerate(res.overlaps)]
            return {"prep": res.circuit}, reps

        circs, reps = ws.cached_circuits(key, build)
        report.enhance_overlaps = [r.overlap_or_fidelity for r in reps]
    else:
        key = _key("prep", model, cfg.d_prep, cfg.prep_sweeps, cfg.opt_cutoff, cfg.perturbation, cfg.seed)

        def build():
            res = optimize_prep(target, cfg.d_prep, cfg.prep_sweeps, cfg.opt_cutoff, perturbation=cfg.perturbation,
                                seed=cfg.seed)
            return {"prep": res.circuit}, res.reports

        circs, reps = ws.cached_circuits(key, build)
    report.prep_reports = reps
    report.prep_overlap = reps[-1].overlap_or_fidelity
    return circs["prep"]


def _evol_stage(cfg, ws, ref, report):
    """Main evolution circuit plus the AEM variants (label -> circuit)."""
    if cfg.evol_mode == "exact":
        return ref("forward", cfg.ref_slices), {}
    model = (cfg.n_sites, cfg.hopping, cfg.onsite)
    sweeps = [cfg.evol_sweeps]
    if cfg.aem and cfg.aem_kind == "sweeps":
        sweeps = sorted(set(sweeps + cfg.int_list("aem_sweeps")))
    key = _key("evol", model, cfg.dt, cfg.d_evol, cfg.ref_slices, max(sweeps), sweeps, cfg.opt_cutoff,
               cfg.trotter_cutoff, cfg.perturbation, cfg.seed)
    target = ref("forward", cfg.ref_slices)

    def build():
        res = optimize_evolution(target, cfg.d_evol, max(sweeps), cfg.opt_cutoff, perturbation=cfg.perturbation,
                                 seed=cfg.seed + 1, checkpoints=sweeps)
        return {f"sweeps={s}": res.checkpoints[s] for s in sweeps}, res.reports

    circs, reps = ws.cached_circuits(key, build)
    report.evol_reports = reps
    report.evol_fidelity = reps[min(cfg.evol_sweeps, len(reps) - 1)].overlap_or_fidelity
    main = circs[f"sweeps={cfg.evol_sweeps}"]
    variants: dict = {}
    if cfg.aem and cfg.aem_kind == "sweeps":
        variants = {f"sweeps={s}": circs[f"sweeps={s}"] for s in cfg.int_list("aem_sweeps")}
    elif cfg.aem:
        for m in cfg.int_list("aem_slices"):
            vkey = _key("evol_slices", model, cfg.dt, cfg.d_evol, m, cfg.evol_sweeps, cfg.opt_cutoff,
                        cfg.trotter_cutoff, cfg.perturbation, cfg.seed)
            tgt = ref("forward", m)

            def vbuild(tgt=tgt):
                res = optimize_evolution(tgt, cfg.d_evol, cfg.evol_sweeps, cfg.opt_cutoff,
                                         perturbation=cfg.perturbation, seed=cfg.seed + 1)
                return {"c": res.circuit}, res.reports

            variants[f"slices={m}"] = ws.cached_circuits(vkey, vbuild)[0]["c"]
    return main, variants


def _series(cfg, prep, evol, log_path=None):
    noise = NoiseSpec(cfg.p_step, cfg.shots or None, cfg.seed)
    exp = Experiment(prep, evol, cfg.dt, noise, cfg.backend)
    a0sq = exp.a0sq()
    table: list = []

    def measure(r):
        vals = exp.measure_step(r)
        table.append(vals)
        return tuple(vals)

    ts = collect_series(measure, cfg.dt, cfg.max_steps, shot_threshold(noise.shots), a0sq,
                        metadata={"shots": cfg.shots, "p_step": cfg.p_step})
    if log_path is not None:
        exp.log.write(log_path)
    return ts, np.array(table), a0sq


def run_pipeline(cfg: RunConfig, write: bool = True) -> RunReport:
    validate_config(cfg)
    ws = Workspace(cfg)
    timings: dict = {}
    with _Stage(timings, "build"):
        terms, g, e, sol, ref = build_stage(cfg, ws)
    report = RunReport(cfg, sol.gap, float("nan"), None, None, timings=timings)  # type: ignore[arg-type]
    with _Stage(timings, "compress"):
        prep = _prep_stage(cfg, ws, g, e, report)
        evol, variants = _evol_stage(cfg, ws, ref, report)
    with _Stage(timings, "simulate"):
        ts, _, a0sq = _series(cfg, prep, evol, ws.out / "runlog.tsv" if write else None)
    report.series, report.a0sq = ts, a0sq
    with _Stage(timings, "estimate"):
        report.gap_est, report.estimate = estimate_gap(ts)
        if cfg.gap_trace:
            report.trace = gap_trace(ts, sol.gap)
    if variants:
        with _Stage(timings, "aem"):
            _aem_stage(cfg, prep, variants, ref, report)
    if write:
        _write_outputs(report, ws.out)
        emit_plotdata(report, ws.out / "plotdata")
    return report


def _aem_stage(cfg, prep, variants, ref, report):
    labels = list(variants)
    circs = [variants[k] for k in labels]
    tables_m = []
    for label, c in zip(labels, circs):
        ts_i, tab, _ = _series(cfg, prep, c)
        tables_m.append(tab)
        report.variant_gaps[label] = estimate_gap(ts_i)[0] - report.gap_ref
    steps = min(len(t) for t in tables_m)
    tables_m = [t[:steps] for t in tables_m]
    if isinstance(prep, BrickWallCircuit):
        psi = circuit_to_mps(prep, MPS.zeros(prep.width), cutoff=cfg.opt_cutoff)
    else:
        psi = MPS.from_dense(prep)
    vs = VariantSet(labels, circs, cfg.aem_kind)
    back = ref("reverse", cfg.ref_slices)
    tab = compute_M_L(psi, vs, back, steps, cfg.aem_cutoff, bond_budget=cfg.aem_bond_budget or None)
    weights = [solve_weights(tab.M[s], tab.L[s]).c for s in range(tab.steps)]
    ts = mitigated_series(weights, [t[: tab.steps] for t in tables_m], cfg.dt, report.a0sq,
                          metadata={"aem": cfg.aem_kind})
    report.aem_tables = tab
    report.aem_weights = weights
    report.aem_series = ts
    report.aem_gap, report.aem_estimate = estimate_gap(ts)
    if cfg.gap_trace:
        report.aem_trace = gap_trace(ts, report.gap_ref)


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(repr(float(x)) if isinstance(x, (float, np.floating)) else str(x) for x in row) + "\n")


def _write_outputs(report: RunReport, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(serialize_config(report.config))
    report.series.write(out / "timeseries.tsv")
    report.estimate.write(out / "spectrum.tsv")
    (out / "summary.json").write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
    (out / "timings.json").write_text(json.dumps(report.timings, indent=2, sort_keys=True) + "\n")
    _write_rows(out / "sweeps_prep.tsv", ["sweep", "objective", "overlap"],
                [(r.sweep_index, r.objective, r.overlap_or_fidelity) for r in report.prep_reports])
    _write_rows(out / "sweeps_evol.tsv", ["sweep", "objective", "fidelity"],
                [(r.sweep_index, r.objective, r.overlap_or_fidelity) for r in report.evol_reports])
    if report.aem_tables is not None:
        report.aem_tables.write(out / "aem_tables.tsv")
        report.aem_tables.write_bonds(out / "aem_bonds.tsv")
        k = len(report.aem_weights[0]) if report.aem_weights else 0
        _write_rows(out / "aem_weights.tsv", ["step"] + [f"c_{i}" for i in range(k)],
                    [(s + 1, *map(float, w)) for s, w in enumerate(report.aem_weights)])
        report.aem_series.write(out / "timeseries_aem.tsv")
        report.aem_estimate.write(out / "spectrum_aem.tsv")


def emit_plotdata(report: RunReport, out, tag: str = "") -> list[Path]:
    """Columnar ``(step, value)`` files for plotting.  Returns the paths written."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    sfx = f"_{tag}" if tag else ""
    written = []

    def emit(name, header, rows):
        p = out / f"{name}{sfx}.tsv"
        _write_rows(p, header, rows)
        written.append(p)

    emit("gap_error", ["step", "gap_error"], report.trace)
    emit("signal_abs", ["step", "abs_s"], [(int(r), float(abs(v))) for r, v in zip(report.series.steps, report.series.values)])
    emit("modes", ["weight", "delta", "alpha"], [(m.weight, m.frequency, m.decay) for m in report.estimate.modes] if report.estimate else [])
    if report.prep_reports:
        emit("prep_overlap", ["sweep", "overlap"], [(r.sweep_index, r.overlap_or_fidelity) for r in report.prep_reports])
    if report.evol_reports:
        emit("evol_fidelity", ["sweep", "fidelity"], [(r.sweep_index, r.overlap_or_fidelity) for r in report.evol_reports])
    if report.aem_tables is not None:
        emit("gap_error_aem", ["step", "gap_error"], report.aem_trace)
        for key, vals in sorted(report.aem_tables.bonds.items()):
            emit(f"aem_bond_{key}", ["step", "max_bond"], [(s + 1, b) for s, b in enumerate(vals)])
    if report.enhance_overlaps:
        emit("enhance_overlap", ["iteration", "overlap"], [(k + 1, o) for k, o in enumerate(report.enhance_overlaps)])
    return written


# -- presets -----------------------------------------------------------------------


PRESETS: dict[str, list[dict]] = {
    "exact_smoke": [dict(prep_mode="exact", evol_mode="exact", max_steps=50, dt=0.05, shots=0)],
    "fig_dt_study": [dict(dt=dt) for dt in (0.5, 0.1, 0.05)],
    "fig_step_study": [dict(dt=0.05, max_steps=100)],
    "fig_aem_sweeps": [dict(dt=0.05, aem=True, aem_kind="sweeps")],
    "fig_aem_slices": [dict(dt=0.05, aem=True, aem_kind="slices")],
    "fig_aem_dt01": [dict(dt=0.1, aem=True, aem_kind="sweeps")],
    "fig_aem_cutoffs": [dict(dt=0.1, aem=True, aem_cutoff=c, gap_trace=False) for c in (1e-12, 1e-10, 1e-8)],
    "fig_enhance": [dict(enhance=True, enhance_depth=5, enhance_sweeps=1000, enhance_iters=2)],
}


def preset_configs(name: str, base: RunConfig | None = None) -> list[RunConfig]:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}", ["preset"])
    base = base or RunConfig()
    out = []
    for i, over in enumerate(PRESETS[name]):
        d = dataclasses.asdict(base)
        d.update(over)
        if len(PRESETS[name]) > 1:
            d["output_dir"] = str(Path(base.output_dir) / f"{name}_{i}")
            d["cache_dir"] = base.cache_dir or str(Path(base.output_dir) / "cache")
        cfg = RunConfig(**d)
        validate_config(cfg)
        out.append(cfg)
    return out
