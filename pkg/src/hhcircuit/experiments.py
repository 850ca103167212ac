"""Config-driven experiment runner with CSV, JSON and SVG outputs.

A config is a JSON object::

    {"kind": "quiet-sweep", "seed": 0, "jobs": 4, "out": "results/quiet",
     "params": {"taus": [2.0, 2.2, 2.4], "runs": 10}}

Missing parameters take the defaults of the kind. Run ``r`` of an
experiment draws from the stream ``run_seed(seed, r)`` (the deterministic
scan uses ``scan_seed``), so results do not depend on ``jobs``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from .circuit import (CircuitSpec, InitScenario, TransmissionParams, autocorrelation_peak,
                      block_activity, build_circuit, detect_rotation, init_circuit, run_circuit,
                      run_reference)
from .dynamics import Attractor, classify_attractor
from .errors import ConfigError, DomainError
from .neuron import NoiseParams, SpikeTrain, output_path, simulate_neuron
from .regimes import (ALPHA_C, C_DF_DEFAULT, C_LT_DEFAULT, I_END, LAMBDA_C, QuietConfig,
                      calibrate_quantiles, classify_quiet, classify_regular)
from .rng import run_seed, scan_seed
from .statistics import interspike_intervals

OUT_ENV = "HHCIRCUIT_OUT"
DEFAULT_OUT = "hhcircuit-out"

KIND_ALIASES = {
    "DeterministicScan": "det-scan",
    "SingleNeuron": "neuron",
    "QuietSweep": "quiet-sweep",
    "RegularSweep": "regular-sweep",
    "Calibrate": "calibrate",
    "CircuitRun": "circuit",
    "ReferenceRun": "reference",
}

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "det-scan": dict(a_grid=[4.0, 5.2, 5.245, 5.3, 8.4, 10.0], n_trials=100, burn_in=1000.0,
                     tail=1000.0, dt=0.001),
    "neuron": dict(theta=10.0, tau=0.7, sigma=0.83666, t_end=400.0, burn_in=0.0, dt=0.001,
                   record_every=10, c1=0.02, runs=1),
    "quiet-sweep": dict(theta=4.0, sigma=2.5, taus=[2.0, 2.1, 2.2, 2.3, 2.4], runs=10, t0=250.0,
                        k=100, burn_in=1000.0, dt=0.001, c_df=C_DF_DEFAULT, c_lt=C_LT_DEFAULT),
    "regular-sweep": dict(theta=10.0, sigmas=[1.0, 1.5, 2.5, 5.0], taus=[0.1, 0.5, 1.0, 2.5, 5.0],
                          runs=20, t1=500.0, burn_in=100.0, dt=0.001, c1=0.02),
    "calibrate": dict(lambda_c=LAMBDA_C, t0=250.0, k=100, i_end=I_END, alpha_c=ALPHA_C,
                      replications=40000),
    "circuit": dict(m=3, l=4, tau=1.4, sigma=1.5, c1=0.02, theta1=4.0, theta2=10.0,
                    delta_star=14.3, t_end=1800.0, dt=0.001, scenario="zero", runs=1,
                    window=50.0, burn_in=600.0, record_every=100),
    "reference": dict(m=3, l=4, c=0.05, dt=0.01, t_end=2000.0, runs=10, record_every=10),
}


@dataclass
class ExperimentConfig:
    kind: str
    params: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    jobs: int = 1
    out: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - {"kind", "params", "seed", "jobs", "out"}
        if unknown:
            raise ConfigError([f"unknown config field {k!r}" for k in sorted(unknown)])
        kind = KIND_ALIASES.get(d.get("kind"), d.get("kind"))
        if kind not in DEFAULTS:
            raise ConfigError(f"unknown kind {d.get('kind')!r}; expected one of {sorted(DEFAULTS)}")
        params = dict(DEFAULTS[kind])
        params.update(d.get("params") or {})
        cfg = cls(kind, params, d.get("seed", 0), d.get("jobs", 1), d.get("out"))
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON: {e}") from None
        return cls.from_dict(d)

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json(fh.read())

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "seed": self.seed, "jobs": self.jobs, "params": self.params}
        if self.out is not None:
            d["out"] = self.out
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def validate(self) -> None:
        """Raise ConfigError listing every violated constraint."""
        problems = []
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            problems.append("seed must be a non-negative integer")
        if isinstance(self.jobs, bool) or not isinstance(self.jobs, int) or self.jobs < 1:
            problems.append("jobs must be a positive integer")
        unknown = set(self.params) - set(DEFAULTS[self.kind])
        problems += [f"unknown parameter {k!r} for {self.kind}" for k in sorted(unknown)]
        if not unknown:
            problems += _VALIDATORS[self.kind](self.params)
        if problems:
            raise ConfigError(problems)


# -- validation ---------------------------------------------------------------

def _num(p, name, problems, lo=None, hi=None, lo_open=True, integer=False):
    x = p[name]
    ok_type = isinstance(x, int) if integer else isinstance(x, (int, float))
    if isinstance(x, bool) or not ok_type or not math.isfinite(x):
        problems.append(f"{name} must be a finite {'integer' if integer else 'number'}, got {x!r}")
        return
    if lo is not None and (x <= lo if lo_open else x < lo):
        problems.append(f"{name} must be {'>' if lo_open else '>='} {lo}, got {x}")
    if hi is not None and x > hi:
        problems.append(f"{name} must be <= {hi}, got {x}")


def _grid(p, name, problems, lo=0.0, hi=None):
    g = p[name]
    if not isinstance(g, list) or not g:
        problems.append(f"{name} must be a non-empty list")
        return
    for x in g:
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x) or x <= lo \
                or (hi is not None and x > hi):
            problems.append(f"{name} entries must lie in ({lo}, {hi if hi is not None else 'inf'}), got {x!r}")


def _v_scan(p):
    pr = []
    _grid(p, "a_grid", pr, 0.0, 20.0)
    _num(p, "n_trials", pr, 10, lo_open=False, integer=True)
    _num(p, "burn_in", pr, 0, lo_open=False)
    _num(p, "tail", pr, 0)
    _num(p, "dt", pr, 0, 0.01)
    return pr


def _v_neuron(p):
    pr = []
    for k in ("theta", "tau", "t_end", "c1"):
        _num(p, k, pr, 0)
    _num(p, "sigma", pr, 0, lo_open=False)
    _num(p, "burn_in", pr, 0, lo_open=False)
    _num(p, "dt", pr, 0, 0.01)
    _num(p, "record_every", pr, 1, lo_open=False, integer=True)
    _num(p, "runs", pr, 1, lo_open=False, integer=True)
    return pr


def _v_quiet(p):
    pr = []
    for k in ("theta", "sigma", "t0", "c_df", "c_lt"):
        _num(p, k, pr, 0)
    _grid(p, "taus", pr)
    _num(p, "k", pr, 1, lo_open=False, integer=True)
    _num(p, "runs", pr, 1, lo_open=False, integer=True)
    _num(p, "burn_in", pr, 0, lo_open=False)
    _num(p, "dt", pr, 0, 0.01)
    return pr


def _v_regular(p):
    pr = []
    for k in ("theta", "t1", "c1"):
        _num(p, k, pr, 0)
    _grid(p, "sigmas", pr)
    _grid(p, "taus", pr)
    _num(p, "runs", pr, 1, lo_open=False, integer=True)
    _num(p, "burn_in", pr, 0, lo_open=False)
    _num(p, "dt", pr, 0, 0.01)
    return pr


def _v_calibrate(p):
    pr = []
    for k in ("t0", "i_end"):
        _num(p, k, pr, 0)
    _num(p, "lambda_c", pr, 0, lo_open=False)
    _num(p, "alpha_c", pr, 0, 1)
    _num(p, "k", pr, 1, lo_open=False, integer=True)
    _num(p, "replications", pr, 1, lo_open=False, integer=True)
    return pr


def _circuit_spec(p, seed=0) -> CircuitSpec:
    return CircuitSpec(
        m=p["m"], l=p["l"], noise=NoiseParams(p["theta2"], p["tau"], p["sigma"]), c1=p["c1"],
        transmission=TransmissionParams.from_median(p["delta_star"], p["c1"], p["theta1"], p["theta2"]),
        dt=p["dt"], seed=seed, init_scenario=InitScenario(p["scenario"]))


def _ring_problems(p):
    pr = []
    _num(p, "m", pr, integer=True)
    _num(p, "l", pr, integer=True)
    if not pr:
        if p["m"] < 3 or p["m"] % 2 == 0:
            pr.append(f"M must be an odd integer >= 3, got {p['m']}")
        if p["l"] < 4:
            pr.append(f"L must be an integer >= 4, got {p['l']}")
    return pr


def _v_circuit(p):
    pr = _ring_problems(p)
    for k in ("tau", "sigma", "c1", "theta1", "theta2", "delta_star", "t_end", "window"):
        _num(p, k, pr, 0)
    _num(p, "dt", pr, 0, 0.01)
    _num(p, "burn_in", pr, 0, lo_open=False)
    _num(p, "runs", pr, 1, lo_open=False, integer=True)
    _num(p, "record_every", pr, 1, lo_open=False, integer=True)
    if p["scenario"] not in {s.value for s in InitScenario}:
        pr.append(f"scenario must be 'zero' or 'uniform', got {p['scenario']!r}")
    if not pr:
        try:
            build_circuit(_circuit_spec(p))
        except (ConfigError, DomainError) as e:
            pr += getattr(e, "problems", [str(e)])
    return pr


def _v_reference(p):
    pr = _ring_problems(p)
    _num(p, "c", pr, 0, 1)
    if p["c"] == 1:
        pr.append("c must be < 1")
    _num(p, "dt", pr, 0)
    _num(p, "t_end", pr, 0)
    _num(p, "runs", pr, 1, lo_open=False, integer=True)
    _num(p, "record_every", pr, 1, lo_open=False, integer=True)
    return pr


_VALIDATORS = {
    "det-scan": _v_scan, "neuron": _v_neuron, "quiet-sweep": _v_quiet,
    "regular-sweep": _v_regular, "calibrate": _v_calibrate, "circuit": _v_circuit,
    "reference": _v_reference,
}


# -- run records and emitters ----------------------------------------------------

@dataclass
class RunRecord:
    run_id: str
    seed: int
    stream: str
    params: Dict[str, Any]
    stats: Dict[str, Any]
    wall_time: float = 0.0

    def row(self) -> Dict[str, Any]:
        out = {"run_id": self.run_id, "seed": self.seed, "stream": self.stream}
        out.update(self.params)
        out.update(self.stats)
        out["wall_time"] = self.wall_time
        return out


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def emit_csv(rows, path: str, header: Optional[Sequence[str]] = None) -> None:
    """Write rows as CSV with a header line and shortest round-trip floats.

    ``rows`` may be RunRecords, dicts, a SpikeTrain (single column ``t``) or
    a 2-D array together with ``header``.
    """
    if isinstance(rows, SpikeTrain):
        rows, header = rows.times[:, None], ["t"]
    if isinstance(rows, np.ndarray):
        if header is None:
            raise DomainError("array rows need a header")
        body = [list(r) for r in rows]
    else:
        dicts = [r.row() if isinstance(r, RunRecord) else r for r in rows]
        if header is None:
            header = []
            for d in dicts:
                header += [k for k in d if k not in header]
        body = [[d.get(k, "") for k in header] for d in dicts]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for r in body:
            w.writerow([_fmt(x) for x in r])


def emit_raster_svg(trains: Sequence[SpikeTrain], circuit, path: str, t_end: Optional[float] = None,
                    width: int = 900, height: int = 360) -> None:
    """Spike raster: neuron i at level i, neuron N repeated at level 0.

    Inhibitory neurons red, excitatory green.
    """
    if not trains:
        raise DomainError("need at least one train")
    n = len(trains)
    horizon = t_end if t_end is not None else max(tr.horizon for tr in trains)
    left, right, top, bottom = 60, 20, 20, 50
    pw, ph = width - left - right, height - top - bottom

    def px(t):
        return left + pw * t / horizon

    def py(level):
        return top + ph * (1 - level / n)

    out = io.StringIO()
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
              f'viewBox="0 0 {width} {height}">\n')
    out.write('<rect width="100%" height="100%" fill="white"/>\n')
    x0, y0 = left, top + ph
    out.write(f'<line x1="{x0}" y1="{y0}" x2="{x0 + pw}" y2="{y0}" stroke="black"/>\n')
    out.write(f'<line x1="{x0}" y1="{top}" x2="{x0}" y2="{y0}" stroke="black"/>\n')
    for k in range(6):
        t = horizon * k / 5
        out.write(f'<line x1="{px(t):.2f}" y1="{y0}" x2="{px(t):.2f}" y2="{y0 + 5}" stroke="black"/>\n')
        out.write(f'<text x="{px(t):.2f}" y="{y0 + 18}" font-size="11" text-anchor="middle">{t:g}</text>\n')
    for level in range(n + 1):
        out.write(f'<text x="{x0 - 8}" y="{py(level) + 4:.2f}" font-size="10" text-anchor="end">'
                  f'{level if level else n}</text>\n')
    out.write(f'<text x="{left + pw / 2}" y="{height - 8}" font-size="12" text-anchor="middle">'
              't (model units)</text>\n')
    out.write(f'<text x="14" y="{top + ph / 2}" font-size="12" text-anchor="middle" '
              f'transform="rotate(-90 14 {top + ph / 2})">neuron</text>\n')
    levels = [(i + 1, i) for i in range(n)] + [(0, n - 1)]
    for level, i in levels:
        colour = "red" if circuit.inh[i] else "green"
        for t in trains[i].times:
            out.write(f'<circle cx="{px(t):.2f}" cy="{py(level):.2f}" r="1.6" fill="{colour}"/>\n')
    out.write("</svg>\n")
    with open(path, "w") as fh:
        fh.write(out.getvalue())


# -- per-kind tasks (module level so they pickle) -----------------------------

def _task_scan(p, seed, i):
    a = p["a_grid"][i]
    hits = sum(
        classify_attractor(a, scan_seed(seed, i, j), burn_in=p["burn_in"], tail=p["tail"],
                           dt=p["dt"]).kind is Attractor.ORBIT
        for j in range(p["n_trials"]))
    return dict(a=a), dict(orbit_fraction=hits / p["n_trials"], n_trials=p["n_trials"]), {}


def _task_neuron(p, seed, r):
    noise = NoiseParams(p["theta"], p["tau"], p["sigma"])
    run = simulate_neuron(noise, p["t_end"], dt=p["dt"], seed=run_seed(seed, r), burn_in=p["burn_in"],
                          record_every=p["record_every"])
    isis = interspike_intervals(run.train)
    reg = classify_regular(run.train, run.train.horizon, p["c1"])
    traj = run.trajectory
    u = output_path(run.train, p["c1"], grid=traj[:, 0]).values
    stats = dict(n_spikes=len(run.train), median_isi=reg.median,
                 min_isi=float(isis.min()) if isis.size else float("nan"),
                 max_isi=float(isis.max()) if isis.size else float("nan"),
                 r25=reg.r25, u2=reg.u2, u1=reg.u1)
    files = {f"spikes_{r}.csv": (run.train.times[:, None], ["t"]),
             f"trajectory_{r}.csv": (np.column_stack([traj, u]), ["t", "V", "n", "m", "h", "X", "U"])}
    return dict(theta=p["theta"], tau=p["tau"], sigma=p["sigma"]), stats, files


def _task_quiet(p, seed, idx):
    tau = p["taus"][idx // p["runs"]]
    cfg = QuietConfig(t0=p["t0"], k=p["k"], c_df=p["c_df"], c_lt=p["c_lt"])
    run = simulate_neuron(NoiseParams(p["theta"], tau, p["sigma"]), cfg.t1, dt=p["dt"],
                          seed=run_seed(seed, idx), burn_in=p["burn_in"], record_every=None)
    v = classify_quiet(run.train, cfg)
    stats = dict(n_spikes=v.n_t1, branch=v.branch.value, quiet=v.quiet, delta_df=v.delta_df,
                 delta_lt=v.delta_lt, count_ok=v.count_ok, df_ok=v.df_ok, lt_ok=v.lt_ok)
    return dict(theta=p["theta"], tau=tau, sigma=p["sigma"]), stats, {}


def _task_regular(p, seed, idx):
    per = p["runs"] * len(p["taus"])
    sigma = p["sigmas"][idx // per]
    tau = p["taus"][(idx % per) // p["runs"]]
    run = simulate_neuron(NoiseParams(p["theta"], tau, sigma), p["t1"], dt=p["dt"],
                          seed=run_seed(seed, idx), burn_in=p["burn_in"], record_every=None)
    v = classify_regular(run.train, p["t1"], p["c1"])
    stats = dict(n_spikes=v.n_t1, median_isi=v.median, coverage=v.coverage, r05=v.r05, r10=v.r10,
                 r25=v.r25, regular=v.regular, u2=v.u2, u1=v.u1)
    return dict(theta=p["theta"], tau=tau, sigma=sigma), stats, {}


def _task_calibrate(p, seed, r):
    cal = calibrate_quantiles(p["lambda_c"], p["t0"], p["k"], p["i_end"], p["alpha_c"],
                              p["replications"], seed)
    return {}, dict(c_df=cal.c_df, c_lt=cal.c_lt), {}


def _task_circuit(p, seed, r):
    circuit = build_circuit(_circuit_spec(p, seed))
    state = init_circuit(circuit, run_seed(seed, r))
    run = run_circuit(circuit, p["t_end"], state=state, record_every=p["record_every"])
    act = block_activity(run.trains, circuit, p["window"], p["delta_star"])
    rot = detect_rotation(act, p["burn_in"])
    spikes = np.array([(t, i + 1) for i, tr in enumerate(run.trains) for t in tr.times]).reshape(-1, 2)
    spikes = spikes[np.argsort(spikes[:, 0], kind="stable")]
    stats = dict(n_spikes=int(spikes.shape[0]), rotating=rot.rotating, direction=rot.direction,
                 period=rot.period, always_mixed=rot.always_mixed)
    files = {f"spikes_{r}.csv": (spikes, ["t", "neuron"]),
             f"inputs_{r}.csv": (run.inputs, ["t"] + [f"A{i + 1}" for i in range(circuit.n)]),
             f"blocks_{r}.csv": (act.counts.T, [f"block{b + 1}" for b in range(circuit.spec.m)]),
             f"raster_{r}.svg": ("raster", run.trains, circuit)}
    return dict(scenario=p["scenario"]), stats, files


def _task_reference(p, seed, r):
    circuit = build_circuit(CircuitSpec(
        m=p["m"], l=p["l"], noise=NoiseParams(1.0, 1.0, 1.0), c1=0.02,
        transmission=TransmissionParams.from_median(14.3, 0.02)))
    ref = run_reference(circuit, p["t_end"], run_seed(seed, r), p["c"], p["dt"], p["record_every"])
    tr = ref.trajectory
    tail = tr[tr[:, 0] > p["t_end"] / 2]
    lag, peak = autocorrelation_peak(tail[:, 1], p["dt"] * p["record_every"])
    files = {f"trajectory_{r}.csv": (tr, ["t"] + [f"x{i + 1}" for i in range(circuit.n)])}
    return {}, dict(acf_lag=lag, acf_peak=peak, amplitude=float(np.ptp(tail[:, 1]))), files


def _n_tasks(cfg):
    p = cfg.params
    return {
        "det-scan": lambda: len(p["a_grid"]),
        "neuron": lambda: p["runs"],
        "quiet-sweep": lambda: p["runs"] * len(p["taus"]),
        "regular-sweep": lambda: p["runs"] * len(p["taus"]) * len(p["sigmas"]),
        "calibrate": lambda: 1,
        "circuit": lambda: p["runs"],
        "reference": lambda: p["runs"],
    }[cfg.kind]()


_TASKS: Dict[str, Callable] = {
    "det-scan": _task_scan, "neuron": _task_neuron, "quiet-sweep": _task_quiet,
    "regular-sweep": _task_regular, "calibrate": _task_calibrate, "circuit": _task_circuit,
    "reference": _task_reference,
}


def _run_one(kind, params, seed, idx):
    t = time.perf_counter()
    par, stats, files = _TASKS[kind](params, seed, idx)
    stream = f"scan/{idx}" if kind == "det-scan" else f"run/{idx}"
    return RunRecord(f"{kind}-{idx:04d}", seed, stream, par, stats, time.perf_counter() - t), files


# -- summary tables ---------------------------------------------------------------

def _pct(flags):
    return round(100.0 * sum(bool(f) for f in flags) / len(flags), 6)


def summary_table(cfg: ExperimentConfig, records: List[RunRecord]) -> Dict[str, list]:
    p = cfg.params
    if cfg.kind == "quiet-sweep":
        row = ["quiet %"] + [_pct([r.stats["quiet"] for r in records if r.params["tau"] == tau])
                             for tau in p["taus"]]
        return {"header": ["tau"] + list(p["taus"]), "rows": [row]}
    if cfg.kind == "regular-sweep":
        rows = []
        for s in p["sigmas"]:
            rows.append([s] + [_pct([r.stats["regular"] for r in records
                                     if r.params["sigma"] == s and r.params["tau"] == tau])
                               for tau in p["taus"]])
        return {"header": ["sigma \\ tau"] + list(p["taus"]), "rows": rows}
    if cfg.kind == "det-scan":
        return {"header": ["a", "orbit fraction"],
                "rows": [[r.params["a"], r.stats["orbit_fraction"]] for r in records]}
    keys = list(records[0].stats) if records else []
    return {"header": ["run_id"] + keys, "rows": [[r.run_id] + [r.stats[k] for k in keys] for r in records]}


def format_table(table: Dict[str, list]) -> str:
    cells = [[_fmt(x) for x in table["header"]]] + [[_fmt(x) for x in r] for r in table["rows"]]
    widths = [max(len(c[j]) for c in cells) for j in range(len(cells[0]))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells)


@dataclass
class ExperimentResult:
    records: List[RunRecord]
    summary: Dict[str, list]
    out_dir: str
    files: List[str]


def _write_manifest(out_dir, cfg, files, complete, summary=None, error=None):
    manifest = {"config": cfg.to_dict(), "complete": complete, "files": sorted(files)}
    if summary is not None:
        manifest["summary"] = summary
    if error is not None:
        manifest["error"] = error
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, default=_fmt)


def default_out_dir() -> str:
    return os.environ.get(OUT_ENV, DEFAULT_OUT)


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[str] = None) -> ExperimentResult:
    """Run every task of ``cfg`` (in parallel up to ``cfg.jobs``) and write results.

    Writes ``runs.csv`` (one row per run), ``summary.csv``, per-run artifacts
    and ``manifest.json``. If anything fails the manifest is written with
    ``"complete": false`` before the error propagates.
    """
    cfg.validate()
    out_dir = out_dir or cfg.out or default_out_dir()
    os.makedirs(out_dir, exist_ok=True)
    written: List[str] = []
    _write_manifest(out_dir, cfg, written, complete=False)
    try:
        n = _n_tasks(cfg)
        args = [(cfg.kind, cfg.params, cfg.seed, i) for i in range(n)]
        if cfg.jobs > 1 and n > 1:
            with ProcessPoolExecutor(max_workers=min(cfg.jobs, n)) as pool:
                results = list(pool.map(_run_one, *zip(*args)))
        else:
            results = [_run_one(*a) for a in args]
        records = [rec for rec, _ in results]
        for _, files in results:
            for name, payload in files.items():
                path = os.path.join(out_dir, name)
                if isinstance(payload[0], str):
                    emit_raster_svg(payload[1], payload[2], path)
                else:
                    emit_csv(payload[0], path, payload[1])
                written.append(name)
        emit_csv(records, os.path.join(out_dir, "runs.csv"))
        summary = summary_table(cfg, records)
        emit_csv(np.array(summary["rows"], dtype=object), os.path.join(out_dir, "summary.csv"),
                 [str(h) for h in summary["header"]])
        written += ["runs.csv", "summary.csv"]
    except BaseException as e:
        _write_manifest(out_dir, cfg, written, complete=False, error=f"{type(e).__name__}: {e}")
        raise
    _write_manifest(out_dir, cfg, written, complete=True, summary=summary)
    return ExperimentResult(records, summary, out_dir, written)
