"""Metrics and the multi-trial experiment runner."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .attack import (
    AttackSpec,
    choose_targets,
    malicious_count,
    poison,
    random_distribution,
    split_malicious,
)
from .core import Dataset, ItemDomain, check_frequencies, load_dataset, make_rng, synthesize_zipf, true_frequencies
from .ldp import make_protocol
from .recover import RecoveryConfig, RecoveryResult, detection_baseline, ldprecover

__all__ = [
    "METHODS",
    "METHOD_LABELS",
    "SWEEP_RANGES",
    "DatasetSpec",
    "ExperimentConfig",
    "MetricRow",
    "ExperimentResult",
    "mse",
    "frequency_gain",
    "run_experiment",
    "run_sweep",
    "write_results",
    "format_table",
    "RESULT_COLUMNS",
]

log = logging.getLogger(__name__)

METHODS = ("poisoned", "ldprecover", "ldprecover_star", "detection")
METHOD_LABELS = {
    "poisoned": "Poisoned",
    "ldprecover": "LDPRecover",
    "ldprecover_star": "LDPRecover*",
    "detection": "Detection",
}
SWEEP_RANGES = {"beta": (0.0, 0.1), "epsilon": (0.1, 1.6), "eta": (0.01, 0.4)}
RESULT_COLUMNS = ("sweep_param", "sweep_value", "trial", "method", "metric", "value")


def mse(f_true, f_est) -> float:
    """Mean over items of the squared frequency error."""
    f_true = check_frequencies(f_true)
    f_est = check_frequencies(f_est, f_true.size)
    return float(np.mean((f_true - f_est) ** 2))


def frequency_gain(f_genuine_agg, f_est, targets) -> float:
    """Total increase of the targets' frequencies over the genuine-only aggregate.

    Positive when the targets end up more popular than the genuine reports
    alone make them; negative when a defence pushes them below that.
    """
    f_genuine_agg = check_frequencies(f_genuine_agg)
    f_est = check_frequencies(f_est, f_genuine_agg.size)
    targets = np.asarray(list(targets), dtype=np.int64)
    if targets.size == 0:
        raise ValueError("target set is empty")
    if targets.min() < 0 or targets.max() >= f_est.size:
        raise ValueError("target out of domain")
    return float(np.sum(f_est[targets] - f_genuine_agg[targets]))


@dataclass(frozen=True)
class DatasetSpec:
    """Either a file (``path``) or a Zipf law (``d``, ``n``, ``s``)."""

    path: str | None = None
    domain_size: int | None = None
    d: int = 102
    n: int = 389894
    s: float = 1.1

    def build(self, seed: int) -> Dataset:
        if self.path is not None:
            return load_dataset(self.path, self.domain_size)
        return synthesize_zipf(ItemDomain(self.d), self.n, self.s, seed)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    protocol: str = "grr"
    epsilon: float = 0.5
    g: int | None = None
    attack: str = "adaptive"
    beta: float = 0.05
    m: int | None = None
    r: int = 10
    h_fraction: float = 0.1
    concentration: float = 0.05
    attackers: int = 1
    eta: float = 0.2
    paper_faithful_partial: bool = True
    tolerance: float | None = None
    methods: tuple[str, ...] = METHODS
    trials: int = 10
    seed: int = 0
    sweep_param: str | None = None
    sweep_values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.attackers < 1:
            raise ValueError("attackers must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 <= self.beta < 1:
            raise ValueError("beta must lie in [0, 1)")
        if self.m is not None and self.m < 0:
            raise ValueError("m must be nonnegative")
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if not 0 < self.h_fraction <= 1:
            raise ValueError("h_fraction must lie in (0, 1]")
        if not self.concentration > 0:
            raise ValueError("concentration must be positive")
        if not self.eta >= 0:
            raise ValueError("eta must be nonnegative")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")
        if self.sweep_param is not None:
            if self.sweep_param not in SWEEP_RANGES:
                raise ValueError(f"sweep parameter must be one of {sorted(SWEEP_RANGES)}")
            if not self.sweep_values:
                raise ValueError("sweep needs at least one value")
            lo, hi = SWEEP_RANGES[self.sweep_param]
            bad = [v for v in self.sweep_values if not lo <= v <= hi]
            if bad:
                raise ValueError(f"{self.sweep_param} values {bad} outside [{lo}, {hi}]")

    def recovery(self, targets=None) -> RecoveryConfig:
        return RecoveryConfig(self.eta, targets, self.paper_faithful_partial, self.tolerance)


@dataclass
class MetricRow:
    method: str
    mse_trials: list[float]
    fg_trials: list[float] | None = None

    @property
    def label(self) -> str:
        return METHOD_LABELS[self.method]

    @property
    def mse(self) -> float:
        return _nanmean(self.mse_trials)

    @property
    def fg(self) -> float | None:
        return None if self.fg_trials is None else _nanmean(self.fg_trials)

    @property
    def failed(self) -> int:
        return sum(math.isnan(v) for v in self.mse_trials)


def _nanmean(values) -> float:
    ok = [v for v in values if not math.isnan(v)]
    return float(np.mean(ok)) if ok else math.nan


@dataclass
class ExperimentResult:
    rows: list[MetricRow]
    records: list[dict]
    # first trial's vectors, for inspection
    frequencies: dict[str, list[float]] = field(default_factory=dict)
    recovery: RecoveryResult | None = None
    targets: tuple[int, ...] | None = None

    def row(self, method: str) -> MetricRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def summary(self) -> dict:
        return {
            r.method: {"label": r.label, "mse": r.mse, "fg": r.fg, "failed": r.failed, "trials": len(r.mse_trials)}
            for r in self.rows
        }


def _attack_specs(config: ExperimentConfig, d: int, n: int, rng: np.random.Generator):
    m = config.m if config.m is not None else malicious_count(config.beta, n)
    kind = config.attack
    if kind == "none":
        return [AttackSpec("none", 0)], None
    if kind == "manip":
        return [AttackSpec("manip", m, h_fraction=config.h_fraction)], None
    if kind in ("mga", "mga_ipa"):
        targets = choose_targets(d, config.r, rng)
        return [AttackSpec(kind, m, targets=targets)], targets
    if kind == "adaptive":
        shares = split_malicious(m, config.attackers, rng) if config.attackers > 1 else [m]
        specs = [
            AttackSpec("adaptive", int(k), dist=random_distribution(d, rng, config.concentration))
            for k in shares
        ]
        return specs, None
    raise ValueError(f"unknown attack kind {kind!r}")


def _run_trial(config: ExperimentConfig, data: Dataset, f_true: np.ndarray, trial: int) -> dict:
    seed = config.seed + trial
    protocol = make_protocol(config.protocol, config.epsilon, data.d, config.g)
    specs, targets = _attack_specs(config, data.d, data.n, make_rng(seed, "attack-spec"))
    reports = poison(data, protocol, specs, seed)
    f_genuine = protocol.aggregate(reports.genuine).frequencies
    f_z = protocol.aggregate(reports.combined()).frequencies

    if config.attack == "adaptive":
        # the harness knows both aggregates, so it can name the most boosted items
        k = max(1, config.r // 2)
        targets = tuple(sorted(int(v) for v in np.argsort(f_z - f_genuine, kind="stable")[::-1][:k]))

    estimates, failures = {}, {}
    recovery = None
    for method in config.methods:
        try:
            if method == "poisoned":
                estimates[method] = f_z
            elif method == "ldprecover":
                recovery = ldprecover(f_z, protocol, config.recovery())
                estimates[method] = recovery.recovered
            elif targets is None:
                continue
            elif method == "ldprecover_star":
                estimates[method] = ldprecover(f_z, protocol, config.recovery(targets)).recovered
            elif method == "detection":
                estimates[method] = detection_baseline(reports, targets, protocol)
        except Exception as exc:  # one broken method must not sink the trial
            log.warning("trial %d: %s failed: %s", trial, method, exc)
            failures[method] = str(exc)

    metrics = {}
    for method in config.methods:
        if method in estimates:
            f = estimates[method]
            fg = frequency_gain(f_genuine, f, targets) if targets is not None else None
            metrics[method] = (mse(f_true, f), fg)
        elif method in failures:
            metrics[method] = (math.nan, math.nan if targets is not None else None)
    out = {"trial": trial, "metrics": metrics, "targets": targets}
    if trial == 0:
        out["frequencies"] = {
            "true": f_true.tolist(),
            "genuine": f_genuine.tolist(),
            "poisoned": f_z.tolist(),
        }
        if recovery is not None:
            out["frequencies"]["recovered"] = recovery.recovered.tolist()
        out["recovery"] = recovery
    return out


def _trial_worker(args):
    return _run_trial(*args)


def run_experiment(config: ExperimentConfig, jobs: int = 1, data: Dataset | None = None) -> ExperimentResult:
    """Run ``config.trials`` independent trials; trial ``t`` uses seed ``seed + t``."""
    if data is None:
        data = config.dataset.build(config.seed)
    f_true = true_frequencies(data)
    work = [(config, data, f_true, t) for t in range(config.trials)]
    if jobs > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trials = list(pool.map(_trial_worker, work))
    else:
        trials = [_run_trial(*w) for w in work]

    sweep_param = config.sweep_param or ""
    sweep_value = getattr(config, config.sweep_param) if config.sweep_param else ""
    rows, records = [], []
    for method in config.methods:
        per_trial = [t["metrics"][method] for t in trials if method in t["metrics"]]
        if not per_trial:
            continue
        has_fg = any(fg is not None for _, fg in per_trial)
        row = MetricRow(method, [v for v, _ in per_trial], [fg for _, fg in per_trial] if has_fg else None)
        rows.append(row)
    for t in trials:
        for method in config.methods:
            if method not in t["metrics"]:
                continue
            mse_v, fg_v = t["metrics"][method]
            base = {"sweep_param": sweep_param, "sweep_value": sweep_value, "trial": t["trial"], "method": method}
            records.append({**base, "metric": "mse", "value": mse_v})
            if fg_v is not None:
                records.append({**base, "metric": "fg", "value": fg_v})

    first = trials[0]
    return ExperimentResult(rows, records, first.get("frequencies", {}), first.get("recovery"), first["targets"])


def run_sweep(config: ExperimentConfig, jobs: int = 1) -> dict[float, ExperimentResult]:
    """One experiment per grid value of ``config.sweep_param``; other settings fixed."""
    if config.sweep_param is None:
        raise ValueError("config has no sweep parameter")
    data = config.dataset.build(config.seed)
    results = {}
    for value in config.sweep_values:
        point = replace(config, **{config.sweep_param: float(value)})
        log.info("sweep %s=%g", config.sweep_param, value)
        results[float(value)] = run_experiment(point, jobs, data)
    return results


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _csv_text(records) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=RESULT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow({**rec, "value": repr(float(rec["value"]))})
    return buf.getvalue()


def write_results(outdir, result: ExperimentResult | dict[float, ExperimentResult], config: ExperimentConfig) -> None:
    """Write ``results.csv`` and ``summary.json`` (plus inspection artifacts for single runs).

    Files are written to a temporary name and renamed, so an interrupted run
    never leaves a truncated final file behind.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = _config_json(config)
    if isinstance(result, ExperimentResult):
        records = result.records
        summary = {"config": cfg, "methods": result.summary(), "targets": result.targets}
        if result.recovery is not None:
            _atomic_write(outdir / "recovery.json", json.dumps(result.recovery.to_json(), indent=1))
        if result.frequencies:
            cols = list(result.frequencies)
            lines = ["item," + ",".join(cols)]
            for v in range(len(result.frequencies["true"])):
                lines.append(f"{v}," + ",".join(repr(result.frequencies[c][v]) for c in cols))
            _atomic_write(outdir / "frequencies.csv", "\n".join(lines) + "\n")
    else:
        records = [rec for res in result.values() for rec in res.records]
        summary = {
            "config": cfg,
            "sweep": {repr(value): res.summary() for value, res in result.items()},
        }
    _atomic_write(outdir / "results.csv", _csv_text(records))
    _atomic_write(outdir / "summary.json", json.dumps(summary, indent=1, default=_json_default))


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _config_json(config: ExperimentConfig) -> dict:
    out = asdict(config)
    out["methods"] = list(config.methods)
    out["sweep_values"] = list(config.sweep_values)
    return out


def format_table(result: ExperimentResult) -> str:
    """Per-method means, three significant digits (e.g. ``5.89E-04``)."""
    lines = [f"{'method':<12} {'MSE':>10} {'FG':>10} {'failed':>7}"]
    for row in result.rows:
        fg = "-" if row.fg is None else _sci(row.fg)
        lines.append(f"{row.label:<12} {_sci(row.mse):>10} {fg:>10} {row.failed:>7}")
    return "\n".join(lines)


def _sci(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.2E}"
