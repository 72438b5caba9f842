"""Command-line entry point.

Example::

    robust-cubature run --scenario vpo --estimators ckf,rckf,cks,rcks \\
        --p1 0 --p2 0.2 --trials 100 --seed 42 --out-dir out/

Resolution order for every setting: command-line flag, then the JSON file
given by ``--config``, then the built-in default. ``--dry-run`` prints the
resolved configuration as JSON; that output is itself a valid ``--config``
file. The seed falls back to the ``RK_SEED`` environment variable.

Exit codes: 0 success, 1 experiment or I/O failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .benchmark import ESTIMATOR_KINDS, EstimatorConfig, MetricsReport, run_experiment
from .scenarios import PRESETS

SWEEP_KEYS = ("p1", "p2", "phi1", "phi2", "sigma", "eta")
FORMATS = ("text", "json", "csv")


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: str = "vpo"
    estimators: list = field(default_factory=lambda: [{"kind": k} for k in ESTIMATOR_KINDS])
    sigma: float = 2.0
    eta: float = 2.0
    p1: Optional[float] = None
    p2: Optional[float] = None
    phi1: Optional[float] = None
    phi2: Optional[float] = None
    scenario_params: dict = field(default_factory=dict)
    trials: int = 100
    seed: int = 0
    sweep: Optional[str] = None
    out_dir: str = "."
    format: str = "text"
    max_iters: int = 50
    tol: float = 1e-6
    workers: int = 1

    def validate(self) -> "RunConfig":
        if self.scenario not in PRESETS:
            raise UsageError(f"--scenario: unknown preset {self.scenario!r}; choose from {sorted(PRESETS)}")
        if not self.estimators:
            raise UsageError("--estimators: need at least one estimator")
        if self.trials < 1:
            raise UsageError(f"--trials: must be >= 1, got {self.trials}")
        if self.workers < 1:
            raise UsageError(f"--workers: must be >= 1, got {self.workers}")
        if self.max_iters < 1:
            raise UsageError(f"--max-iters: must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise UsageError(f"--tol: must be positive, got {self.tol}")
        if self.format not in FORMATS:
            raise UsageError(f"--format: choose from {FORMATS}")
        for key in ("p1", "p2"):
            v = getattr(self, key)
            if v is not None and not 0.0 <= v <= 1.0:
                raise UsageError(f"--{key}: contamination ratio must be in [0, 1], got {v}")
        for key in ("phi1", "phi2", "sigma", "eta"):
            v = getattr(self, key)
            if v is not None and not v > 0:
                raise UsageError(f"--{key}: must be positive, got {v}")
        try:
            self.estimator_configs()
        except (TypeError, ValueError) as exc:
            raise UsageError(f"--estimators: {exc}") from exc
        if self.sweep is not None:
            parse_sweep(self.sweep)
        return self

    def estimator_configs(self, sigma: Optional[float] = None, eta: Optional[float] = None) -> list[EstimatorConfig]:
        out = []
        for e in self.estimators:
            kw = dict(sigma=self.sigma, eta=self.eta, max_iters=self.max_iters, tol=self.tol)
            kw.update({k: v for k, v in e.items() if k != "kind"})
            if sigma is not None and "sigma" not in e:
                kw["sigma"] = sigma
            if eta is not None and "eta" not in e:
                kw["eta"] = eta
            out.append(EstimatorConfig(e["kind"], **kw))
        return out

    def scenario_kwargs(self, **override) -> dict:
        kw = dict(self.scenario_params)
        for key in ("p1", "p2", "phi1", "phi2"):
            if getattr(self, key) is not None:
                kw[key] = float(getattr(self, key))
        kw.update(override)
        return kw

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def parse_estimators(text: str) -> list[dict]:
    """``ckf,rckf:sigma=20:eta=2`` -> ``[{"kind": "ckf"}, {"kind": "rckf", "sigma": 20.0, "eta": 2.0}]``."""
    out = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        kind, *opts = item.split(":")
        kind = kind.lower()
        if kind not in ESTIMATOR_KINDS:
            raise UsageError(f"--estimators: unknown estimator {kind!r}; choose from {ESTIMATOR_KINDS}")
        entry: dict = {"kind": kind}
        for opt in opts:
            key, _, val = opt.partition("=")
            if key not in ("sigma", "eta", "label"):
                raise UsageError(f"--estimators: unknown option {key!r} for {kind}")
            entry[key] = val if key == "label" else _float(val, "--estimators")
        out.append(entry)
    return out


def _float(text: str, flag: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"{flag}: expected a number, got {text!r}") from None


def parse_sweep(text: str) -> tuple[str, list[float]]:
    """``p2=0:0.1:0.3`` (start:step:stop, inclusive) or ``sigma=2,20`` (explicit list)."""
    key, sep, spec = text.partition("=")
    if not sep or key not in SWEEP_KEYS:
        raise UsageError(f"--sweep: expected KEY=VALUES with KEY in {SWEEP_KEYS}, got {text!r}")
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise UsageError(f"--sweep: range must be start:step:stop, got {spec!r}")
        start, step, stop = (_float(p, "--sweep") for p in parts)
        if not step > 0 or stop < start:
            raise UsageError(f"--sweep: bad range {spec!r}")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        values = [round(start + i * step, 12) for i in range(count)]
    else:
        values = [_float(v, "--sweep") for v in spec.split(",") if v]
    if not values:
        raise UsageError("--sweep: no values")
    return key, values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-cubature", description="Robust cubature filter/smoother benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a Monte-Carlo experiment", argument_default=argparse.SUPPRESS)
    run.add_argument("--config", help="JSON file with RunConfig fields")
    run.add_argument("--scenario", choices=sorted(PRESETS))
    run.add_argument("--estimators", type=str, help="comma list, e.g. ckf,rckf:sigma=20")
    run.add_argument("--sigma", type=float)
    run.add_argument("--eta", type=float)
    for key in ("p1", "p2", "phi1", "phi2"):
        run.add_argument(f"--{key}", type=float)
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--sweep", type=str, help="p2=0:0.1:0.3 or sigma=2,20")
    run.add_argument("--out-dir", dest="out_dir")
    run.add_argument("--format", choices=FORMATS)
    run.add_argument("--dry-run", dest="dry_run", action="store_true")
    run.add_argument("--max-iters", dest="max_iters", type=int)
    run.add_argument("--tol", type=float)
    run.add_argument("--workers", type=int)
    return parser


def load_config_file(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"--config: invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("--config: top level must be a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise UsageError(f"--config: unknown key(s) {unknown}")
    if "estimators" in data:
        ests = data["estimators"]
        if isinstance(ests, str):
            data["estimators"] = parse_estimators(ests)
        elif isinstance(ests, list):
            data["estimators"] = [{"kind": e} if isinstance(e, str) else dict(e) for e in ests]
        else:
            raise UsageError("--config: estimators must be a list or a comma string")
    return data


def parse_config(argv: list[str], env: Optional[dict] = None) -> tuple[RunConfig, bool]:
    """Resolve flags, config file and defaults. Returns ``(config, dry_run)``."""
    env = os.environ if env is None else env
    ns = vars(build_parser().parse_args(argv))
    ns.pop("command", None)
    dry_run = bool(ns.pop("dry_run", False))
    values = load_config_file(ns.pop("config")) if "config" in ns else {}
    if "estimators" in ns:
        ns["estimators"] = parse_estimators(ns["estimators"])
    values.update(ns)
    if "seed" not in values and env.get("RK_SEED"):
        try:
            values["seed"] = int(env["RK_SEED"])
        except ValueError:
            raise UsageError(f"RK_SEED: expected an integer, got {env['RK_SEED']!r}") from None
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc
    return cfg.validate(), dry_run


def _sweep_points(cfg: RunConfig):
    """Yield ``(label, scenario kwargs, estimator configs)`` per sweep value."""
    if cfg.sweep is None:
        yield None, cfg.scenario_kwargs(), cfg.estimator_configs()
        return
    key, values = parse_sweep(cfg.sweep)
    for v in values:
        if key in ("sigma", "eta"):
            ests = cfg.estimator_configs(**{key: v})
            yield f"{key}={v:g}", cfg.scenario_kwargs(), ests
        else:
            yield f"{key}={v:g}", cfg.scenario_kwargs(**{key: v}), cfg.estimator_configs()


def _relabel(report: MetricsReport, tag: str) -> list[tuple]:
    return [(s, f"{n}[{tag}]", m, v) for s, n, m, v in report.csv_rows()]


def execute(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    reports: list[tuple[Optional[str], MetricsReport]] = []
    for tag, scen_kw, ests in _sweep_points(cfg):
        spec = PRESETS[cfg.scenario](**scen_kw)
        print(f"running {cfg.scenario} {tag or ''} trials={cfg.trials}".rstrip(), file=sys.stderr)
        report = run_experiment(spec, ests, cfg.trials, cfg.seed, workers=cfg.workers)
        reports.append((tag, report))
    if all(r.used_trials == 0 for _, r in reports):
        print("error: every trial failed; no metrics to report", file=sys.stderr)
        return 1

    if cfg.sweep is None:
        doc = reports[0][1].to_dict()
        rows = reports[0][1].csv_rows()
    else:
        key, values = parse_sweep(cfg.sweep)
        doc = {
            "sweep": {"key": key, "values": values},
            "reports": [dict(r.to_dict(), sweep_value=v) for (_, r), v in zip(reports, values)],
        }
        rows = [row for tag, r in reports for row in _relabel(r, tag)]
    doc["config"] = cfg.to_dict()
    report_json = json.dumps(doc, indent=2, sort_keys=True)
    csv_text = "step,estimator,metric,value\n" + "".join(f"{s},{n},{m},{float(v)!r}\n" for s, n, m, v in rows)
    timing = {tag or "run": r.total_time for tag, r in reports}

    try:
        od = Path(cfg.out_dir)
        od.mkdir(parents=True, exist_ok=True)
        (od / "report.json").write_text(report_json + "\n")
        (od / "rmse_series.csv").write_text(csv_text)
        (od / "timing.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        print(f"error: cannot write outputs to {cfg.out_dir}: {exc}", file=sys.stderr)
        return 1

    if cfg.format == "json":
        print(report_json, file=out)
    elif cfg.format == "csv":
        print(csv_text, end="", file=out)
    else:
        for tag, r in reports:
            if tag:
                print(f"== {tag}", file=out)
            print(r.to_text(), file=out)
        if cfg.sweep is not None:
            print(sweep_table(reports), file=out)
    return 0


def sweep_table(reports) -> str:
    """One row per sweep value with the first-component TRMSE of each estimator."""
    names = list(reports[0][1].trmse)
    lines = [["value"] + [f"{n}_trmse" for n in names]]
    for tag, r in reports:
        lines.append([tag] + [" ".join(f"{v:.4f}" for v in r.trmse[n]) for n in names])
    widths = [max(len(row[i]) for row in lines) for i in range(len(lines[0]))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in lines)


def main(argv: Optional[list[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg, dry_run = parse_config(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse reports its own usage errors
        return int(exc.code or 0)
    if dry_run:
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        return 0
    try:
        return execute(cfg)
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
