"""Monte-Carlo sweeps over SINR target, user count and region size.

Every scheme sees the same channel draw for a given trial (paired design).
The draw depends only on ``(base seed, trial)``, so it is also shared across
axis values; the user-count axis adds users without redrawing earlier ones.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy import stats

from .baselines import solve_scheme
from .channel import sample_scenario
from .config import ConfigError, ScenarioConfig, SchemeId, watt_to_dbm

AXES = {
    "sinr_db": "sinr_target_db",
    "num_users": "K",
    "region_size": "region_size",
}

DEFAULT_VALUES = {
    "sinr_db": [4.0, 6.0, 8.0, 10.0, 12.0, 14.0],
    "num_users": [2.0, 3.0, 4.0, 5.0, 6.0],
    "region_size": [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
}

FIGURE_NAMES = {"sinr_db": "fig2", "num_users": "fig3", "region_size": "fig4"}

RECORD_COLUMNS = ("scheme", "axis", "axis_value", "trial", "seed", "scenario_digest",
                  "total_power_dbm", "total_power_w", "converged", "iters_outer",
                  "iters_inner_total")
SUMMARY_COLUMNS = ("scheme", "axis", "axis_value", "n", "mean_power_w", "mean_power_dbm",
                   "ci95_half_width_w", "ci95_low_dbm", "ci95_high_dbm", "converged_rate")
TIMING_COLUMNS = ("scheme", "axis_value", "trial", "wall_time_ms")


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}")
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ConfigError("sweep needs at least one value")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError("sweep values must be strictly increasing")
        object.__setattr__(self, "values", vals)

    def apply(self, config: ScenarioConfig, value) -> ScenarioConfig:
        name = AXES[self.axis]
        if name == "K":
            if value != int(value) or value < 1:
                raise ConfigError(f"user count must be a positive integer, got {value}")
            value = int(value)
        return replace(config, **{name: value})


@dataclass(frozen=True)
class TrialRecord:
    scheme: str
    axis: str
    axis_value: float
    trial: int
    seed: int
    scenario_digest: str
    total_power_dbm: float
    total_power_w: float
    converged: bool
    iters_outer: int
    iters_inner_total: int
    wall_time_ms: float = 0.0


@dataclass(frozen=True)
class SummaryRow:
    scheme: str
    axis: str
    axis_value: float
    n: int
    mean_power_w: float
    mean_power_dbm: float
    ci95_half_width_w: float
    ci95_low_dbm: float
    ci95_high_dbm: float
    converged_rate: float


def trial_seed(base_seed, trial):
    return int(np.random.SeedSequence(base_seed, spawn_key=(trial,)).generate_state(1)[0])


def _run_trial(config, axis, value, trial, schemes):
    seed = trial_seed(config.seed, trial)
    scenario = sample_scenario(config, seed)
    digest = scenario.digest()
    out = []
    for scheme in schemes:
        t0 = time.perf_counter()
        res = solve_scheme(scheme, scenario, config.solver)
        ms = 1e3 * (time.perf_counter() - t0)
        out.append(TrialRecord(
            scheme=SchemeId(scheme).value, axis=axis, axis_value=float(value), trial=trial,
            seed=seed, scenario_digest=digest, total_power_dbm=watt_to_dbm(res.total_power),
            total_power_w=res.total_power, converged=res.converged,
            iters_outer=res.outer_iterations, iters_inner_total=res.inner_iterations,
            wall_time_ms=ms))
    return out


def _run_trial_args(args):
    return _run_trial(*args)


def worker_count():
    raw = os.environ.get("FLUIDBEAM_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"FLUIDBEAM_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def _sort_key(rec, order):
    return order[rec.scheme], rec.axis_value, rec.trial


def run_sweep(config: ScenarioConfig, sweep: SweepSpec, workers=None, progress=None):
    """Run every scheme on every (axis value, trial) pair.

    Returns records in canonical order (scheme, axis value, trial) whatever
    the execution order. Non-converged trials are kept.
    """
    schemes = tuple(SchemeId(s) for s in config.schemes)
    tasks = [(sweep.apply(config, v), sweep.axis, v, t, schemes)
             for v in sweep.values for t in range(config.trials)]
    workers = worker_count() if workers is None else workers
    records = []
    if workers <= 1 or len(tasks) == 1:
        for i, task in enumerate(tasks):
            records.extend(_run_trial(*task))
            if progress:
                progress(i + 1, len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, recs in enumerate(pool.map(_run_trial_args, tasks, chunksize=1)):
                records.extend(recs)
                if progress:
                    progress(i + 1, len(tasks))
    order = {s.value: i for i, s in enumerate(schemes)}
    return sorted(records, key=lambda r: _sort_key(r, order))


def _fmt(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            d = asdict(row)
            writer.writerow([_fmt(d[c]) for c in columns])


def write_records(records, path):
    _write_csv(path, RECORD_COLUMNS, records)


def write_timings(records, path):
    _write_csv(path, TIMING_COLUMNS, records)


def write_summary(rows, path):
    _write_csv(path, SUMMARY_COLUMNS, rows)


def read_summary(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for raw in csv.DictReader(fh):
            rows.append(SummaryRow(
                scheme=raw["scheme"], axis=raw["axis"], axis_value=float(raw["axis_value"]),
                n=int(raw["n"]), mean_power_w=float(raw["mean_power_w"]),
                mean_power_dbm=float(raw["mean_power_dbm"]),
                ci95_half_width_w=float(raw["ci95_half_width_w"]),
                ci95_low_dbm=float(raw["ci95_low_dbm"]),
                ci95_high_dbm=float(raw["ci95_high_dbm"]),
                converged_rate=float(raw["converged_rate"])))
    return rows


def ci_half_width(samples, level=0.95):
    """Student-t confidence half-width of the sample mean; nan for one sample."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        return math.nan
    sem = x.std(ddof=1) / math.sqrt(x.size)
    return float(stats.t.ppf(0.5 + level / 2.0, x.size - 1) * sem)


def aggregate(records):
    """Mean power (averaged in watts, then converted) per scheme and axis value."""
    if not records:
        raise ValueError("no records to aggregate")
    groups = {}
    for r in records:
        groups.setdefault((r.scheme, r.axis, r.axis_value), []).append(r)
    scheme_order = {}
    for r in records:
        scheme_order.setdefault(r.scheme, len(scheme_order))
    rows = []
    for (scheme, axis, value), recs in sorted(groups.items(),
                                              key=lambda kv: (scheme_order[kv[0][0]], kv[0][2])):
        p = np.array([r.total_power_w for r in recs])
        mean = float(p.mean())
        half = ci_half_width(p)
        lo = watt_to_dbm(mean - half) if half == half and mean > half else -math.inf
        hi = watt_to_dbm(mean + half) if half == half else math.nan
        if half != half:
            lo = hi = watt_to_dbm(mean)
        rows.append(SummaryRow(scheme, axis, value, len(recs), mean, watt_to_dbm(mean), half,
                               lo, hi, float(np.mean([r.converged for r in recs]))))
    return rows


def paired_db_gap(records, scheme, reference, axis_value):
    """Per-trial ``P_scheme / P_reference`` in dB at one axis value, trial-aligned."""
    a = {r.trial: r for r in records if r.scheme == scheme and r.axis_value == axis_value}
    b = {r.trial: r for r in records if r.scheme == reference and r.axis_value == axis_value}
    common = sorted(set(a) & set(b))
    for t in common:
        if a[t].scenario_digest != b[t].scenario_digest:
            raise ValueError(f"trial {t}: schemes saw different channel draws")
    return np.array([10.0 * math.log10(a[t].total_power_w / b[t].total_power_w) for t in common])


def write_plot_data(rows, path, axis):
    """Gnuplot-friendly table: axis value, then mean dBm per scheme."""
    schemes = list(dict.fromkeys(r.scheme for r in rows))
    values = sorted({r.axis_value for r in rows})
    table = {(r.scheme, r.axis_value): r.mean_power_dbm for r in rows}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {axis} " + " ".join(f"{s}_dbm" for s in schemes) + "\n")
        for v in values:
            cells = [_fmt(float(table.get((s, v), math.nan))) for s in schemes]
            fh.write(_fmt(v) + " " + " ".join(cells) + "\n")
