"""Running scenarios and emitting reports.

The JSON report is canonical: keys sorted, floats written by ``repr``, no
timestamps.  Wall-clock timing lives in :attr:`Report.timing` and is only
serialised on request, so identical scenario + seed + version gives
byte-identical output.
"""
from __future__ import annotations

import contextvars
import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..poisson import fd_step_override
from .checks import CHECK_TYPES, RunContext

REPORT_SCHEMA = "chpoisson.report/1"
PASS, FAIL, DEGENERATE = "pass", "fail", "degenerate-points-only"


@dataclass
class CheckRecord:
    id: str
    type: str
    anchor: str
    points_tested: int
    points_skipped: int
    max_residual: float | None
    tolerance: float
    verdict: str
    details: dict = field(default_factory=dict)
    error: str | None = None

    def to_dict(self):
        out = {"id": self.id, "type": self.type, "anchor": self.anchor,
               "points_tested": self.points_tested, "points_skipped": self.points_skipped,
               "max_residual": self.max_residual, "tolerance": self.tolerance,
               "verdict": self.verdict, "details": self.details}
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass
class Report:
    scenario: str
    seed: int
    samples: int
    checks: list
    tool_version: str = __version__
    timing: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.verdict == PASS for c in self.checks)

    @property
    def exit_code(self):
        return 0 if self.passed else 1

    def to_dict(self, include_timing=False):
        counts = {v: sum(1 for c in self.checks if c.verdict == v)
                  for v in (PASS, FAIL, DEGENERATE)}
        out = {"schema": REPORT_SCHEMA, "tool_version": self.tool_version,
               "scenario": self.scenario, "seed": self.seed, "samples": self.samples,
               "checks": [c.to_dict() for c in self.checks],
               "summary": {**counts, "verdict": PASS if self.passed else FAIL}}
        if include_timing:
            out["timing"] = self.timing
        return out


def _plain(obj):
    """Convert numpy scalars and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def to_json(report, include_timing=False):
    return json.dumps(_plain(report.to_dict(include_timing)), indent=2, sort_keys=True) + "\n"


CSV_COLUMNS = ("id", "type", "verdict", "points_tested", "points_skipped", "max_residual",
               "tolerance", "anchor")


def to_csv_summary(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for c in report.checks:
        row = c.to_dict()
        writer.writerow([("" if row[k] is None else
                          repr(row[k]) if isinstance(row[k], float) else row[k])
                         for k in CSV_COLUMNS])
    return buf.getvalue()


def export(report, fmt="json", include_timing=False):
    if fmt == "json":
        return to_json(report, include_timing)
    if fmt in ("csv", "csv-summary"):
        return to_csv_summary(report)
    raise ValueError(f"unknown export format {fmt!r}")


def report_from_dict(data):
    """Rebuild a :class:`Report` from its JSON form (for ``export``)."""
    checks = [CheckRecord(c["id"], c["type"], c["anchor"], c["points_tested"],
                          c["points_skipped"], c["max_residual"], c["tolerance"], c["verdict"],
                          c.get("details", {}), c.get("error")) for c in data["checks"]]
    return Report(data["scenario"], data["seed"], data["samples"], checks,
                  data.get("tool_version", __version__), data.get("timing", {}))


def _verdict(outcome):
    if outcome.tested == 0 and outcome.skipped > 0:
        return DEGENERATE
    return PASS if outcome.passed else FAIL


def _tolerance(check, scenario, tol_override):
    if tol_override is not None:
        return float(tol_override)
    if "tol" in check.spec:
        return float(check.spec["tol"])
    kind = CHECK_TYPES[check.type]
    return float(scenario.tolerances.get(check.type, kind.default_tol))


def run_check(scenario, index, seed, count, tol_override=None, trajectory_dir=None):
    """Run one prepared check; module errors become a failing record."""
    check = scenario.checks[index]
    kind = CHECK_TYPES[check.type]
    tol = _tolerance(check, scenario, tol_override)
    n = count if count is not None else check.spec.get("count", scenario.count)
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    ctx = RunContext(rng, int(n), scenario.box, tol, trajectory_dir, check.id)
    start = time.perf_counter()
    try:
        out = kind.run(check.objects, scenario.env, ctx)
        residual = float(out.residual)
        if not math.isfinite(residual):
            raise FloatingPointError(f"non-finite residual {residual}")
        record = CheckRecord(check.id, check.type, kind.anchor, int(out.tested),
                             int(out.skipped), residual, tol, _verdict(out), out.details)
    except Exception as exc:  # surfaced in the report; other checks keep running
        record = CheckRecord(check.id, check.type, kind.anchor, 0, 0, None, tol, FAIL,
                             error=f"{type(exc).__name__}: {exc}")
    return record, time.perf_counter() - start


def run(scenario, seed=None, samples=None, tol=None, fd_step=None, trajectory_dir=None,
        jobs=1):
    """Execute every check; records keep declaration order whatever ``jobs`` is."""
    seed = scenario.seed if seed is None else int(seed)
    trajectory_dir = None if trajectory_dir is None else Path(trajectory_dir)
    start = time.perf_counter()

    def task(i):
        if fd_step is None:
            return run_check(scenario, i, seed, samples, tol, trajectory_dir)
        with fd_step_override(fd_step):
            return run_check(scenario, i, seed, samples, tol, trajectory_dir)

    indices = range(len(scenario.checks))
    if jobs > 1 and len(scenario.checks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(contextvars.copy_context().run, task, i) for i in indices]
            results = [f.result() for f in futures]
    else:
        results = [task(i) for i in indices]
    timing = {"total_seconds": time.perf_counter() - start,
              "checks": {r.id: t for r, t in results}}
    return Report(scenario.name, seed, samples if samples is not None else scenario.count,
                  [r for r, _ in results], timing=timing)


CATALOG_DIR = Path(__file__).with_name("catalog")


def catalog_list():
    return sorted(p.stem for p in CATALOG_DIR.glob("*.json"))


def catalog_text(name):
    path = CATALOG_DIR / f"{name}.json"
    if not path.is_file():
        raise KeyError(f"no catalog scenario named {name!r}; see `catalog list`")
    return path.read_text()
