"""Mean and Student-t confidence intervals over repeated runs."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import betaincinv

from .errors import EmptyGroup, EmptySamples
from .metrics import EvalResult

DEFAULT_LEVEL = 0.95


def t_quantile(p: float, dof: float) -> float:
    """Inverse CDF of Student's t, via the inverse regularised incomplete beta function."""
    if not 0 < p < 1:
        raise ValueError("p must be in (0, 1)")
    if p == 0.5:
        return 0.0
    tail = min(p, 1 - p)
    x = betaincinv(dof / 2.0, 0.5, 2 * tail)
    t = math.sqrt(dof * (1 - x) / x)
    return t if p > 0.5 else -t


@dataclass(frozen=True)
class RunStatistics:
    metric: str
    n: int
    mean: float
    ci_half_width: Optional[float]  # None when n == 1
    samples: tuple = field(default=())
    n_undefined: int = 0
    level: float = DEFAULT_LEVEL


def mean_ci(samples, level: float = DEFAULT_LEVEL, metric: str = "") -> RunStatistics:
    values = np.asarray(list(samples), dtype=np.float64)
    if values.size == 0:
        raise EmptySamples(f"no samples for {metric or 'metric'}")
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    n = values.size
    mean = float(values.mean())
    if n == 1:
        half = None
    elif np.all(values == values[0]):
        half = 0.0
    else:
        s = float(values.std(ddof=1))
        half = t_quantile((1 + level) / 2, n - 1) * s / math.sqrt(n)
    return RunStatistics(metric, n, mean, half, tuple(values.tolist()), 0, level)


def aggregate_runs(groups: dict, level: float = DEFAULT_LEVEL) -> dict:
    """``{group: [EvalResult, ...]}`` -> ``{group: {metric: RunStatistics or None}}``.

    Undefined metric values are left out of the sample set; a metric that is
    undefined in every run maps to ``None``.
    """
    table = {}
    for group, results in groups.items():
        results = list(results)
        if not results:
            raise EmptyGroup(f"group {group!r} has no runs")
        row = {}
        for name in EvalResult.metric_names():
            values = [getattr(r, name) for r in results]
            defined = [v for v in values if v is not None]
            if not defined:
                row[name] = None
                continue
            st = mean_ci(defined, level, name)
            row[name] = RunStatistics(name, st.n, st.mean, st.ci_half_width, st.samples,
                                      len(values) - len(defined), level)
        table[group] = row
    return table


def load_runs(runs_dir) -> dict:
    """Read ``<runs_dir>/<group>/<run>.json`` EvalResult files, groups and runs in sorted order."""
    runs_dir = os.fspath(runs_dir)
    if not os.path.isdir(runs_dir):
        raise FileNotFoundError(runs_dir)
    groups = {}
    for group in sorted(os.listdir(runs_dir)):
        gdir = os.path.join(runs_dir, group)
        if not os.path.isdir(gdir):
            continue
        results = []
        for name in sorted(os.listdir(gdir)):
            if name.endswith(".json"):
                with open(os.path.join(gdir, name), encoding="utf-8") as fh:
                    results.append(EvalResult.from_dict(json.load(fh)))
        if not results:
            raise EmptyGroup(f"group {group!r} has no run files")
        groups[group] = results
    if not groups:
        raise EmptyGroup(f"{runs_dir} contains no run groups")
    return groups


def _fmt(v: Optional[float]) -> str:
    return "-" if v is None else f"{v:.6f}"


CSV_COLUMNS = ["group", "metric", "n", "mean", "ci_half_width", "ci_low", "ci_high", "n_undefined"]


def table_rows(table: dict):
    for group, row in table.items():
        for metric in EvalResult.metric_names():
            st = row[metric]
            if st is None:
                yield [group, metric, 0, "-", "-", "-", "-", "-"]
                continue
            hw = st.ci_half_width
            yield [
                group, metric, st.n, _fmt(st.mean), _fmt(hw),
                _fmt(None if hw is None else st.mean - hw),
                _fmt(None if hw is None else st.mean + hw),
                st.n_undefined,
            ]


def write_csv(table: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(table_rows(table))


def table_to_json(table: dict) -> dict:
    out = {}
    for group, row in table.items():
        out[group] = {
            m: None if st is None else {
                "n": st.n, "mean": st.mean, "ci_half_width": st.ci_half_width,
                "samples": list(st.samples), "n_undefined": st.n_undefined, "level": st.level,
            }
            for m, st in row.items()
        }
    return out


def format_table(table: dict) -> str:
    """Metric rows by configuration columns, each cell ``mean ± half-width``."""
    groups = list(table)
    width = max([18] + [len(g) + 2 for g in groups])
    lines = ["metric  " + "".join(f"{g:>{width}}" for g in groups)]
    for metric in EvalResult.metric_names():
        cells = []
        for g in groups:
            st = table[g][metric]
            if st is None:
                cells.append("-")
            elif st.ci_half_width is None:
                cells.append(f"{st.mean:.3f} ± -")
            else:
                cells.append(f"{st.mean:.3f} ± {st.ci_half_width:.3f}")
        lines.append(f"{metric:<8}" + "".join(f"{c:>{width}}" for c in cells))
    return "\n".join(lines)
