"""Experiment presets, Monte Carlo orchestration and result files.

Every (sweep value, channel draw) pair is one job. Channel draws use the
generator seeded by (seed, draw), so all sweep values and all schemes see
matched channels; detection trials use their own seeded stream, shared by
the schemes compared on a draw.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from . import detection as det
from .baselines import random_beamforming_design
from .model import Budgets, sensing_sinr
from .optimizer import (InfeasibleError, MMSettings, MonotonicityError, RankRecoveryError,
                        SolverError, mm_optimize)
from .scenario import ScenarioConfig, Square, draw_channels

log = logging.getLogger(__name__)

CSV_HEADER = ("preset", "sweep_name", "sweep_value", "draw", "seed", "status",
              "metric_name", "metric_x", "metric_y")
PRESETS = ("roc_sweep", "accuracy_vs_caprx", "sinr_vs_user_angle", "custom")
MODES = ("roc", "accuracy", "sinr")
TARGET_FA = 0.1
ANGLE_SWEEP = "user_angle_deg"


class ConfigError(ValueError):
    """Bad preset name, config file or experiment settings."""


# ----------------------------------------------------------------------------
# presets
# ----------------------------------------------------------------------------

def _two_by_two(n_antennas: int, power: float, **kw) -> ScenarioConfig:
    base = dict(
        n_tx=2, n_rx=2, n_users=2, n_antennas=n_antennas,
        tx_positions=((0.0, 500.0), (500.0, 500.0)),
        rx_positions=((0.0, 250.0), (500.0, 250.0)),
        user_regions=(Square((200.0, 200.0), 30.0), Square((300.0, 300.0), 30.0)),
        eve_region=Square((250.0, 250.0), 30.0),
        power_budget=power,
    )
    base.update(kw)
    return ScenarioConfig(**base)


CIRCLE_CENTER = (250.0, 250.0)
CIRCLE_RADIUS = 400.0


def user_on_circle(angle_deg: float, center=CIRCLE_CENTER, radius=CIRCLE_RADIUS) -> Square:
    phi = math.radians(angle_deg)
    return Square((center[0] + radius * math.cos(phi), center[1] + radius * math.sin(phi)), 0.0)


def _preset_table():
    return {
        "roc_sweep": dict(
            mode="roc",
            base=_two_by_two(3, 6.0, cap_tx=8.0, cap_rx=4.0, secrecy_floor=0.5),
            sweep_name="secrecy_floor", sweep_values=(0.5, 2.0)),
        "accuracy_vs_caprx": dict(
            mode="accuracy",
            base=_two_by_two(2, 5.0, cap_tx=8.0, cap_rx=3.0, secrecy_floor=0.5),
            sweep_name="cap_rx", sweep_values=(1.0, 2.0, 3.0, 4.0, 5.0)),
        "sinr_vs_user_angle": dict(
            mode="sinr",
            base=ScenarioConfig(
                n_tx=2, n_rx=1, n_users=1, n_antennas=6,
                tx_positions=((0.0, 500.0), (500.0, 500.0)),
                rx_positions=((250.0, 0.0),),
                user_regions=(user_on_circle(0.0),),
                eve_region=Square(CIRCLE_CENTER, 0.0),
                rician_factor=math.inf, power_budget=5.0,
                cap_tx=8.0, cap_rx=4.0, secrecy_floor=1.0),
            sweep_name=ANGLE_SWEEP, sweep_values=tuple(float(a) for a in range(0, 360, 10))),
    }


@dataclass(frozen=True)
class ExperimentSpec:
    preset: str
    base: ScenarioConfig
    sweep_name: str
    sweep_values: tuple
    mode: str = "roc"
    n_draws: int = 20
    n_trials: int = 5000
    seed: int = 0
    out_dir: Path | None = None
    fa_grid: tuple = tuple(np.round(np.linspace(0.0, 1.0, 101), 10))
    workers: int = 1
    settings: MMSettings = field(default_factory=MMSettings)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; valid presets: {', '.join(PRESETS)}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; valid modes: {', '.join(MODES)}")
        if len(self.sweep_values) == 0:
            raise ConfigError("sweep_values must be non-empty")
        if self.n_draws < 1 or self.n_trials < 1 or self.workers < 1:
            raise ConfigError("n_draws, n_trials and workers must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        names = {f.name for f in fields(ScenarioConfig)}
        if self.sweep_name != ANGLE_SWEEP and self.sweep_name not in names:
            raise ConfigError(f"cannot sweep {self.sweep_name!r}: not a scenario field")

    def config_for(self, value) -> ScenarioConfig:
        if self.sweep_name == ANGLE_SWEEP:
            if self.base.n_users != 1:
                raise ConfigError(f"{ANGLE_SWEEP} sweeps need exactly one user")
            return replace(self.base, user_regions=(user_on_circle(value),))
        current = getattr(self.base, self.sweep_name)
        value = type(current)(value) if isinstance(current, (int, float)) else value
        return replace(self.base, **{self.sweep_name: value})


def preset_spec(name: str, **overrides) -> ExperimentSpec:
    table = _preset_table()
    if name == "custom":
        raise ConfigError("the custom preset needs a config file")
    if name not in table:
        raise ConfigError(f"unknown preset {name!r}; valid presets: {', '.join(PRESETS)}")
    kw = dict(table[name])
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec(preset=name, **kw)


# ----------------------------------------------------------------------------
# config files
# ----------------------------------------------------------------------------

_EXPERIMENT_KEYS = {"sweep_name", "sweep_values", "mode", "n_draws", "n_trials", "fa_grid"}


def _square(obj, where):
    if not isinstance(obj, dict) or set(obj) != {"center", "side"}:
        raise ConfigError(f"{where}: expected a mapping with keys center and side")
    c = obj["center"]
    if len(c) != 2:
        raise ConfigError(f"{where}.center: expected two coordinates")
    return Square((float(c[0]), float(c[1])), float(obj["side"]))


def _scenario_overrides(raw: dict) -> dict:
    names = {f.name for f in fields(ScenarioConfig)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"unknown scenario keys: {', '.join(unknown)}")
    out = {}
    for key, val in raw.items():
        if key in ("tx_positions", "rx_positions"):
            out[key] = tuple((float(p[0]), float(p[1])) for p in val)
        elif key == "user_regions":
            out[key] = tuple(_square(s, f"user_regions[{i}]") for i, s in enumerate(val))
        elif key == "eve_region":
            out[key] = _square(val, key)
        elif key in ("n_tx", "n_rx", "n_users", "n_antennas", "n_symbols", "seed"):
            out[key] = int(val)
        else:
            out[key] = float(val)
    return out


def load_config(path) -> dict:
    """Parse a YAML config into {"scenario": {...}, "experiment": {...}}."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    unknown = sorted(set(raw) - {"scenario", "experiment"})
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(unknown)}")
    experiment = raw.get("experiment") or {}
    bad = sorted(set(experiment) - _EXPERIMENT_KEYS)
    if bad:
        raise ConfigError(f"unknown experiment keys: {', '.join(bad)}")
    try:
        scenario = _scenario_overrides(raw.get("scenario") or {})
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad scenario value: {exc}") from exc
    return {"scenario": scenario, "experiment": dict(experiment)}


def build_spec(preset: str, config_path=None, seed: int = 0, out_dir=None,
               n_draws=None, n_trials=None, workers: int = 1) -> ExperimentSpec:
    """Combine a preset with an optional config file and CLI overrides."""
    cfg = load_config(config_path) if config_path else {"scenario": {}, "experiment": {}}
    exp = dict(cfg["experiment"])
    if "sweep_values" in exp:
        exp["sweep_values"] = tuple(float(v) for v in exp["sweep_values"])
    if "fa_grid" in exp:
        exp["fa_grid"] = tuple(float(v) for v in exp["fa_grid"])
    try:
        if preset == "custom":
            if not cfg["scenario"]:
                raise ConfigError("the custom preset needs a scenario section")
            base = ScenarioConfig(**cfg["scenario"])
            for key in ("sweep_name", "sweep_values"):
                if key not in exp:
                    raise ConfigError(f"the custom preset needs experiment.{key}")
            kw = {"mode": "roc", **exp}
        else:
            if preset not in PRESETS:
                raise ConfigError(f"unknown preset {preset!r}; valid presets: {', '.join(PRESETS)}")
            table = _preset_table()[preset]
            base = replace(table["base"], **cfg["scenario"])
            kw = {k: v for k, v in table.items() if k != "base"}
            kw.update(exp)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid scenario: {exc}") from exc
    if n_draws is not None:
        kw["n_draws"] = n_draws
    if n_trials is not None:
        kw["n_trials"] = n_trials
    return ExperimentSpec(preset=preset, base=base, seed=seed,
                          out_dir=Path(out_dir) if out_dir else None, workers=workers, **kw)


# ----------------------------------------------------------------------------
# running
# ----------------------------------------------------------------------------

def _status_of(exc: Exception) -> str:
    if isinstance(exc, InfeasibleError):
        return "infeasible"
    if isinstance(exc, RankRecoveryError):
        return "rank_recovery_failed"
    if isinstance(exc, SolverError):
        return "solver_error"
    if isinstance(exc, MonotonicityError):
        return "non_monotone"
    return "error"


def _rng(seed, *tags):
    return np.random.default_rng([seed, *tags])


def _symbols(spec) -> int:
    return spec.base.n_symbols


def _roc_rows(spec, design, ch, draw):
    roc = det.simulate_roc(design, ch, None, det.CENTRALIZED, spec.n_trials,
                           _rng(spec.seed, draw, 1), _symbols(spec))
    return [("p_de", fa, de) for fa, de in zip(spec.fa_grid, det.detection_curve(roc, spec.fa_grid))]


def _accuracy(spec, design, ch, draw, mode):
    roc = det.simulate_roc(design, ch, None, mode, spec.n_trials,
                           _rng(spec.seed, draw, 1), _symbols(spec))
    return det.sensing_accuracy(det.detection_at_fa(roc, TARGET_FA), TARGET_FA)


def run_job(spec: ExperimentSpec, index: int, draw: int):
    """All CSV rows for one (sweep value, draw) pair."""
    value = spec.sweep_values[index]
    config = spec.config_for(value)
    ch = draw_channels(config, _rng(spec.seed, draw))
    budgets = Budgets.from_config(config)
    metrics: list[tuple[str, str, float, float]] = []  # (status, name, x, y)

    design, status = None, "ok"
    try:
        design, _ = mm_optimize(ch, budgets, settings=spec.settings, rng=_rng(spec.seed, draw, 3))
    except (InfeasibleError, RankRecoveryError, SolverError, MonotonicityError,
            ValueError, np.linalg.LinAlgError) as exc:
        status = _status_of(exc)
        log.info("%s=%s draw %d: %s", spec.sweep_name, value, draw, exc)

    if spec.mode == "roc":
        if design is None:
            metrics += [(status, "p_de", fa, math.nan) for fa in spec.fa_grid]
        else:
            metrics += [(status, n, x, y) for n, x, y in _roc_rows(spec, design, ch, draw)]
    elif spec.mode == "sinr":
        y = sensing_sinr(design, ch) if design is not None else math.nan
        x = float(value) if spec.sweep_name == ANGLE_SWEEP else float(draw)
        metrics.append((status, "sensing_sinr", x, y))
    else:
        for name, mode in (("accuracy_proposed", det.CENTRALIZED),
                           ("accuracy_distributed", det.DISTRIBUTED)):
            y = _accuracy(spec, design, ch, draw, mode) if design is not None else math.nan
            metrics.append((status, name, TARGET_FA, y))
        try:
            rand = random_beamforming_design(ch, budgets, _rng(spec.seed, draw, 2))
            metrics.append(("ok", "accuracy_random", TARGET_FA,
                            _accuracy(spec, rand, ch, draw, det.CENTRALIZED)))
        except (ValueError, np.linalg.LinAlgError) as exc:
            metrics.append((_status_of(exc), "accuracy_random", TARGET_FA, math.nan))
    return [(index, draw, *m) for m in metrics]


def _fmt(x) -> str:
    x = float(x)
    return "nan" if math.isnan(x) else format(x, ".12g")


def _run_all(spec: ExperimentSpec):
    jobs = [(i, d) for i in range(len(spec.sweep_values)) for d in range(spec.n_draws)]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            chunks = list(pool.map(run_job, [spec] * len(jobs), *zip(*jobs)))
    else:
        chunks = [run_job(spec, i, d) for i, d in jobs]
    rows = [row for chunk in chunks for row in chunk]
    # keyed then sorted so output order never depends on scheduling
    rows.sort(key=lambda r: (r[0], r[1], r[3], r[4]))
    return rows


def results_csv_text(spec: ExperimentSpec, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for index, draw, status, name, x, y in rows:
        writer.writerow([spec.preset, spec.sweep_name, _fmt(spec.sweep_values[index]), draw,
                         spec.seed, status, name, _fmt(x), _fmt(y)])
    return buf.getvalue()


def summarize(spec: ExperimentSpec, rows) -> dict:
    groups: dict = {}
    for index, draw, status, name, x, y in rows:
        key = (index, name)
        g = groups.setdefault(key, {"draws": set(), "ok_draws": set(), "ys": []})
        g["draws"].add(draw)
        if status == "ok":
            g["ok_draws"].add(draw)
            if spec.mode != "roc" or abs(x - TARGET_FA) < 1e-12:
                g["ys"].append(y)
    entries = []
    for (index, name), g in sorted(groups.items()):
        ys = [y for y in g["ys"] if not math.isnan(y)]
        entries.append({
            "sweep_value": float(spec.sweep_values[index]),
            "metric": name if spec.mode != "roc" else f"p_de@p_fa={TARGET_FA}",
            "mean": float(np.mean(ys)) if ys else None,
            "n_ok": len(g["ok_draws"]),
            "n_failed": len(g["draws"] - g["ok_draws"]),
        })
    return {
        "preset": spec.preset,
        "mode": spec.mode,
        "seed": spec.seed,
        "n_draws": spec.n_draws,
        "n_trials": spec.n_trials,
        "sweep_name": spec.sweep_name,
        "sweep_values": [float(v) for v in spec.sweep_values],
        "results": entries,
    }


def run_experiment(spec: ExperimentSpec, plot: bool = True) -> dict:
    """Run every job, write results.csv and summary.json (and an SVG), return the summary."""
    if spec.out_dir is None:
        raise ConfigError("out_dir is required")
    out = Path(spec.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    rows = _run_all(spec)
    if rows and all(r[2] != "ok" for r in rows if r[3] != "accuracy_random"):
        raise RuntimeError("every channel draw failed; see the log for per-draw errors")
    csv_path = out / "results.csv"
    csv_path.write_text(results_csv_text(spec, rows), encoding="utf-8")
    summary = summarize(spec, rows)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    if plot:
        emit_plot(csv_path, spec.mode, out / f"{spec.mode}.svg")
    return summary


# ----------------------------------------------------------------------------
# plots
# ----------------------------------------------------------------------------

PLOT_KINDS = ("roc", "accuracy", "sinr")


def read_results(csv_path):
    """Rows of a results.csv as dicts with numeric fields converted."""
    try:
        with open(csv_path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != CSV_HEADER:
                raise ConfigError(f"{csv_path}: header does not match the results schema")
            rows = []
            for line, r in enumerate(reader, start=2):
                try:
                    rows.append(dict(r, sweep_value=float(r["sweep_value"]), draw=int(r["draw"]),
                                     metric_x=float(r["metric_x"]), metric_y=float(r["metric_y"])))
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{csv_path}:{line}: malformed row ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {csv_path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{csv_path}: no data rows")
    return rows


def _mean_curves(rows, key):
    """{label: (xs, mean ys)} averaging ok rows over draws."""
    acc: dict = {}
    for r in rows:
        label, x = key(r)
        ys = acc.setdefault(label, {}).setdefault(x, [])
        if r["status"] == "ok" and not math.isnan(r["metric_y"]):
            ys.append(r["metric_y"])
    out = {}
    for label in sorted(acc):
        xs = sorted(acc[label])
        out[label] = (np.array(xs), np.array([np.mean(acc[label][x]) if acc[label][x] else np.nan
                                              for x in xs]))
    return out


def emit_plot(csv_path, kind: str, out_path):
    """Deterministic SVG line plot of a results.csv."""
    if kind not in PLOT_KINDS:
        raise ConfigError(f"unknown plot kind {kind!r}; valid kinds: {', '.join(PLOT_KINDS)}")
    rows = read_results(csv_path)
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    sweep = rows[0]["sweep_name"]
    with plt.rc_context({"svg.hashsalt": "cfisac", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6, 4.5))
        if kind == "roc":
            sel = [r for r in rows if r["metric_name"] == "p_de"]
            curves = _mean_curves(sel, lambda r: (f"{sweep} = {r['sweep_value']:g}", r["metric_x"]))
            for label, (xs, ys) in curves.items():
                ax.plot(xs, ys, label=label)
            ax.plot([0, 1], [0, 1], color="0.7", linestyle=":", linewidth=1)
            ax.set_xlim(0, 1)
            ax.set_ylim(0, 1)
            ax.set_xlabel("false-alarm probability")
            ax.set_ylabel("detection probability")
        elif kind == "accuracy":
            sel = [r for r in rows if r["metric_name"].startswith("accuracy_")]
            curves = _mean_curves(sel, lambda r: (r["metric_name"][len("accuracy_"):], r["sweep_value"]))
            for label, (xs, ys) in curves.items():
                ax.plot(xs, ys, marker="o", label=label)
            ax.set_xlabel(f"{sweep} (bits/symbol)" if sweep.startswith("cap") else sweep)
            ax.set_ylabel("sensing accuracy")
        else:
            sel = [r for r in rows if r["metric_name"] == "sensing_sinr"]
            curves = _mean_curves(sel, lambda r: ("sensing SINR", r["metric_x"]))
            for label, (xs, ys) in curves.items():
                with np.errstate(divide="ignore"):
                    ax.plot(xs, 10 * np.log10(ys), marker=".", label=label)
            ax.set_xlabel("user angle (deg)" if sweep == ANGLE_SWEEP else sweep)
            ax.set_ylabel("sensing SINR (dB)")
        if not sel:
            plt.close(fig)
            raise ConfigError(f"{csv_path}: no rows for plot kind {kind!r}")
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(out_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return Path(out_path)
