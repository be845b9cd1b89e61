"""Configuration files, parameter sweeps and CSV export.

Config files are INI-style (``key = value`` lines under ``[channel]``,
``[system]`` and ``[sweep]``).  Powers need an explicit unit suffix,
``dBw`` or ``W``; everything is stored in watts.
"""
from __future__ import annotations

import configparser
import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .analysis import Metrics, evaluate_policy
from .channel import ChannelModel, dbw_to_watt, get_distribution, quantize_channel
from .cmdp import KINDS, ConfigError, Policy, SystemConfig, build_state_space
from .simulator import baseline_generation, baseline_retransmission, simulate_replicas
from .solver import ConvergenceError, LagrangianSolution, MonotonicityError, solve_cmdp

log = logging.getLogger(__name__)

SWEEP_VARIABLES = ("c_max_dbw", "omega", "gamma", "alpha")
POLICIES = ("optimal", "retransmission", "generation")
SWEEP_COLUMNS = [
    "sweep_value", "policy", "age", "transmit_power", "total_power", "efficiency",
    "sim_age", "sim_age_stderr", "sim_efficiency", "sim_efficiency_stderr",
    "eta_minus", "eta_plus", "xi", "status",
]

_SYSTEM_KEYS = {
    "m": ("M", int), "delta_max": ("delta_max", int), "c_max": ("c_max", "power"),
    "alpha": ("alpha", float), "omega": ("omega", float), "gamma": ("gamma", float),
    "rate": ("rate", float), "tol_eta": ("tol_eta", float), "tol_v": ("tol_v", float),
    "max_iter": ("max_iter", int), "sensing_power": ("sensing_power", "power"),
    "charge_sensing_on_discard": ("charge_sensing_on_discard", "bool"),
    "overflow": ("overflow", str),
}
_CHANNEL_KEYS = {"distribution": str, "k": int, "rate": float}
_SWEEP_KEYS = {
    "variable": str, "grid": "floats", "policies": "names", "horizon": int,
    "replicas": int, "seed": int, "output": str, "baseline_quantized": "bool", "workers": int,
}


@dataclass(frozen=True)
class ExperimentSpec:
    system: SystemConfig = field(default_factory=SystemConfig)
    distribution: str = "exponential_unit_mean"
    K: int = 128
    variable: str | None = None
    grid: tuple[float, ...] = ()
    policies: tuple[str, ...] = POLICIES
    horizon: int = 0
    replicas: int = 5
    seed: int = 0
    output: str | None = None
    baseline_quantized: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError("K must be >= 1", ("K",))
        if self.variable is not None:
            if self.variable not in SWEEP_VARIABLES:
                raise ConfigError(f"sweep variable must be one of {SWEEP_VARIABLES}", ("variable",))
            g = np.asarray(self.grid, dtype=float)
            if g.size == 0:
                raise ConfigError("sweep grid is empty", ("grid",))
            d = np.diff(g)
            if not (np.all(d > 0) or np.all(d < 0)):
                raise ConfigError("sweep grid must be strictly monotone", ("grid",))
        bad = [p for p in self.policies if p not in POLICIES]
        if bad or not self.policies:
            raise ConfigError(f"unknown policies {bad}; choose from {POLICIES}", ("policies",))
        if self.horizon < 0 or self.replicas < 1:
            raise ConfigError("horizon must be >= 0 and replicas >= 1", ("horizon", "replicas"))

    def channel(self) -> ChannelModel:
        return quantize_channel(get_distribution(self.distribution), self.K, self.system.rate)

    def config_at(self, value: float) -> SystemConfig:
        if self.variable == "c_max_dbw":
            return replace(self.system, c_max=dbw_to_watt(value))
        if self.variable is None:
            return self.system
        return replace(self.system, **{self.variable: value})


def parse_power(text: str, key: str = "power") -> float:
    t = text.strip()
    low = t.lower()
    try:
        if low.endswith("dbw"):
            return dbw_to_watt(float(t[:-3]))
        if low.endswith("w"):
            return float(t[:-1])
    except ValueError:
        pass
    raise ConfigError(f"{key}: expected a number with unit suffix 'dBw' or 'W', got {text!r}", (key,))


def _convert(raw: str, kind, key: str):
    try:
        if kind == "power":
            return parse_power(raw, key)
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "floats":
            return tuple(float(x) for x in raw.replace(",", " ").split())
        if kind == "names":
            return tuple(x.strip() for x in raw.split(",") if x.strip())
        return kind(raw.strip())
    except ConfigError:
        raise
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}", (key,)) from None


def load_config(path) -> ExperimentSpec:
    """Read and validate an experiment config; unknown keys are errors."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str.lower
    with open(path) as f:
        parser.read_file(f)
    unknown_sections = set(parser.sections()) - {"channel", "system", "sweep"}
    if unknown_sections:
        raise ConfigError(f"unknown sections {sorted(unknown_sections)}", tuple(sorted(unknown_sections)))

    sys_kw, spec_kw = {}, {}
    alpha_given = False
    if parser.has_section("channel"):
        for key, raw in parser.items("channel"):
            if key not in _CHANNEL_KEYS:
                raise ConfigError(f"unknown key [channel] {key}", (key,))
            val = _convert(raw, _CHANNEL_KEYS[key], key)
            if key == "distribution":
                spec_kw["distribution"] = val
            elif key == "k":
                spec_kw["K"] = val
            else:
                sys_kw["rate"] = val
    if parser.has_section("system"):
        for key, raw in parser.items("system"):
            if key not in _SYSTEM_KEYS:
                raise ConfigError(f"unknown key [system] {key}", (key,))
            name, kind = _SYSTEM_KEYS[key]
            sys_kw[name] = _convert(raw, kind, key)
            alpha_given |= name == "alpha"
    if parser.has_section("sweep"):
        for key, raw in parser.items("sweep"):
            if key not in _SWEEP_KEYS:
                raise ConfigError(f"unknown key [sweep] {key}", (key,))
            spec_kw[key] = _convert(raw, _SWEEP_KEYS[key], key)

    system = SystemConfig(**sys_kw)
    defaults = SystemConfig.__dataclass_fields__
    for f in fields(SystemConfig):
        if f.name not in sys_kw:
            log.info("default %s = %r", f.name, defaults[f.name].default)
    spec = ExperimentSpec(system=system, **spec_kw)
    for name in ("distribution", "K", "replicas", "seed", "horizon"):
        if name not in spec_kw and name.lower() not in spec_kw:
            log.info("default %s = %r", name, getattr(spec, name))
    if alpha_given or system.sensing_power is None:
        log.info("sensing power P_s = alpha * c_max = %.6g W", system.p_s)
    return spec


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _row(value, policy, metrics: Metrics | None, sim=None, sol: LagrangianSolution | None = None, status="ok"):
    row = dict.fromkeys(SWEEP_COLUMNS)
    row.update(sweep_value=float(value), policy=policy, status=status)
    if metrics is not None:
        row.update(
            age=metrics.avg_age, transmit_power=metrics.avg_transmit_power,
            total_power=metrics.avg_total_power, efficiency=metrics.energy_efficiency,
        )
    if sim is not None:
        row.update(
            sim_age=sim.mean["time_avg_age"], sim_age_stderr=sim.stderr["time_avg_age"],
            sim_efficiency=sim.mean["energy_efficiency"], sim_efficiency_stderr=sim.stderr["energy_efficiency"],
        )
    if sol is not None:
        row.update(eta_minus=sol.eta_minus, eta_plus=sol.eta_plus, xi=sol.xi)
    return row


def run_grid_point(spec: ExperimentSpec, value: float) -> list[dict]:
    """All policy rows for one grid value; independent of other grid points."""
    cfg = spec.config_at(value)
    model = spec.channel()
    seeds = [spec.seed + i for i in range(spec.replicas)]
    rows = []
    for name in spec.policies:
        sim = None
        if name == "optimal":
            try:
                sol = solve_cmdp(model, cfg)
            except (ConvergenceError, MonotonicityError) as exc:
                log.warning("grid point %s: %s", value, exc)
                rows.append(_row(value, name, None, status="nonconvergence"))
                continue
            if spec.horizon:
                sim = simulate_replicas(sol.mixed_policy(), cfg, spec.horizon, seeds)
            rows.append(_row(value, name, sol.mixed, sim, sol))
        else:
            make = baseline_retransmission if name == "retransmission" else baseline_generation
            pol = make(cfg.c_max, model, cfg, quantized=spec.baseline_quantized)
            metrics, _ = evaluate_policy(pol, cfg)
            if spec.horizon:
                sim = simulate_replicas(pol, cfg, spec.horizon, seeds)
            rows.append(_row(value, name, metrics, sim))
    return rows


def _parse_row(r: dict) -> dict:
    out = {}
    for k in SWEEP_COLUMNS:
        v = r[k]
        if k in ("policy", "status"):
            out[k] = v
        else:
            out[k] = float(v) if v != "" else None
    return out


def _read_existing(path, spec: ExperimentSpec) -> dict[str, list[dict]]:
    done: dict[str, list[dict]] = {}
    if not path or not os.path.exists(path):
        return done
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != SWEEP_COLUMNS:
            return done
        for r in reader:
            done.setdefault(r["sweep_value"], []).append(_parse_row(r))
    want = list(spec.policies)
    return {k: v for k, v in done.items() if [r["policy"] for r in v] == want}


def _write(path, rows: list[dict]) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r[k]) for k in SWEEP_COLUMNS})
    os.replace(tmp, path)


def run_sweep(spec: ExperimentSpec, output: str | None = None, resume: bool = True) -> list[dict]:
    """One row per (grid value, policy), in grid order.

    With an output path, rows are written after every grid point and grid
    points already present in that file are reused.
    """
    if spec.variable is None:
        raise ConfigError("no sweep variable configured", ("variable",))
    path = output or spec.output
    existing = _read_existing(path, spec) if resume else {}
    grid = [float(v) for v in spec.grid]
    todo = [v for v in grid if _fmt(v) not in existing]
    results: dict[str, list[dict]] = dict(existing)

    def record(value, rows):
        results[_fmt(value)] = rows
        if path:
            _write(path, [r for v in grid if _fmt(v) in results for r in results[_fmt(v)]])

    if spec.workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            for value, rows in zip(todo, pool.map(run_grid_point, [spec] * len(todo), todo)):
                record(value, rows)
    else:
        for value in todo:
            record(value, run_grid_point(spec, value))
    return [r for v in grid for r in results[_fmt(v)]]


HEATMAP_COLUMNS = ["policy", "age", "round", "kind", "level", "power"]


def export_policy_heatmap(
    solution: LagrangianSolution, path, cfg: SystemConfig | None = None, with_pi: bool = False
) -> None:
    """Per-state actions of both bracketing policies; xi in a header comment.

    ``with_pi`` adds each policy's stationary probabilities (needs ``cfg``).
    """
    cols = HEATMAP_COLUMNS + (["pi"] if with_pi else [])
    with open(path, "w", newline="") as f:
        f.write(f"# xi={solution.xi!r} eta_minus={solution.eta_minus!r} eta_plus={solution.eta_plus!r}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(cols)
        for tag, pol in (("minus", solution.policy_minus), ("plus", solution.policy_plus)):
            pi = evaluate_policy(pol, cfg)[1] if with_pi else None
            powers = pol.transmit_powers()
            for i, s in enumerate(pol.states):
                row = [tag, s.age, s.round, KINDS[pol.kinds[i]], int(pol.levels[i]), repr(float(powers[i]))]
                if with_pi:
                    row.append(repr(float(pi[i])))
                w.writerow(row)


def load_policy_heatmap(path, model: ChannelModel, cfg: SystemConfig) -> tuple[Policy, Policy, float]:
    """Inverse of :func:`export_policy_heatmap`: ``(policy_minus, policy_plus, xi)``."""
    with open(path, newline="") as f:
        header = f.readline()
        meta = dict(item.split("=", 1) for item in header.lstrip("# ").split())
        rows = list(csv.DictReader(f))
    states = build_state_space(cfg.M, cfg.delta_max)
    out = []
    for tag in ("minus", "plus"):
        sel = {(int(r["age"]), int(r["round"])): r for r in rows if r["policy"] == tag}
        kinds = np.array([KINDS.index(sel[s]["kind"]) for s in states], dtype=np.int8)
        levels = np.array([int(sel[s]["level"]) for s in states], dtype=np.int64)
        out.append(Policy(model, cfg.M, cfg.delta_max, kinds, levels, name=f"optimal-{tag}"))
    return out[0], out[1], float(meta["xi"])
