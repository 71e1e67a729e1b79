"""Evaluation reports and their file layout.

A report directory holds ``report.json``, ``cells.csv`` (one line per
predicted cell, tagged with the run label) and one ``panel-<name>.csv`` per
plot panel with header ``x,y,series``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..database import fmt
from ..errors import ArgumentError
from ..mfrec import rms_deviation, scaled_rms

TIMING_KEYS = ("db_build", "train", "predict", "direct_compute")


@dataclass
class RunResult:
    """One masked-completion run: the hidden cells and their predictions."""

    label: str
    rows: np.ndarray
    cols: np.ndarray
    actual: np.ndarray
    predicted: np.ndarray
    params: dict = field(default_factory=dict)
    trace: Optional[dict] = None
    timing: dict = field(default_factory=dict)
    scaled: bool = False

    @property
    def n_r(self) -> int:
        return int(self.actual.size)

    @property
    def delta(self) -> float:
        return rms_deviation(self.predicted, self.actual)

    def delta_scaled(self):
        return scaled_rms(self.predicted, self.actual)

    @property
    def diverged(self) -> bool:
        return bool(self.trace) and self.trace.get("stop_reason") == "diverged"

    def summary(self):
        d = {"label": self.label, "n_r": self.n_r, "delta": self.delta, **self.params}
        if self.scaled:
            d["delta_scaled"], d["degenerate_scale"] = self.delta_scaled()
        if self.trace is not None:
            d["train"] = self.trace
        if self.timing:
            d["timing"] = self.timing
        return d


@dataclass
class Panel:
    """Plot data: ``points`` is a list of (x, y, series) triples."""

    name: str
    kind: str
    points: list

    @classmethod
    def scatter(cls, name, actual, predicted, series="prediction"):
        pts = [(float(a), float(p), series) for a, p in zip(actual, predicted)]
        if len(actual):
            lo = float(min(np.min(actual), np.min(predicted)))
            hi = float(max(np.max(actual), np.max(predicted)))
            pts += [(lo, lo, "ideal"), (hi, hi, "ideal")]
        return cls(name, "scatter", pts)

    @classmethod
    def sweep(cls, name, xs, ys, series="delta"):
        order = np.argsort(np.asarray(xs, dtype=float), kind="stable")
        return cls(name, "sweep", [(float(xs[k]), float(ys[k]), series) for k in order])


@dataclass
class EvalReport:
    name: str
    config: dict
    runs: list = field(default_factory=list)
    panels: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    timing: dict = field(default_factory=lambda: {k: 0.0 for k in TIMING_KEYS})
    fidelity_check: bool = False

    def add_run(self, run: RunResult, panel: bool = True) -> RunResult:
        self.runs.append(run)
        if panel:
            self.add_panel(Panel.scatter(run.label, run.actual, run.predicted))
        for k, v in run.timing.items():
            self.timing[k] = self.timing.get(k, 0.0) + v
        return run

    def add_panel(self, panel: Panel):
        self.panels[panel.name] = panel

    def run(self, label: str) -> RunResult:
        for r in self.runs:
            if r.label == label:
                return r
        raise ArgumentError(f"report {self.name!r} has no run {label!r}")

    def delta(self, label: str) -> float:
        return self.run(label).delta

    @property
    def flags(self):
        fl = {
            "divergence": any(r.diverged for r in self.runs),
            "degenerate_scale": any(r.scaled and r.delta_scaled()[1] for r in self.runs),
        }
        if self.fidelity_check:
            fl["fidelity_out_of_range"] = int(
                sum(np.count_nonzero((r.predicted < 0) | (r.predicted > 1)) for r in self.runs)
            )
        return fl

    @property
    def flagged(self) -> bool:
        fl = self.flags
        return fl["divergence"] or fl["degenerate_scale"]

    def to_json(self):
        return {
            "name": self.name,
            "config": self.config,
            "runs": [r.summary() for r in self.runs],
            "metrics": self.metrics,
            "timing": self.timing,
            "flags": self.flags,
            "panels": sorted(self.panels),
        }

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "report.json", out / "cells.csv"]
        with open(paths[0], "w", encoding="utf-8", newline="\n") as fh:
            json.dump(_jsonable(self.to_json()), fh, indent=2)
            fh.write("\n")
        with open(paths[1], "w", encoding="utf-8", newline="\n") as fh:
            fh.write("run,i,j,actual,predicted\n")
            for r in self.runs:
                for i, j, a, p in zip(r.rows, r.cols, r.actual, r.predicted):
                    fh.write(f"{r.label},{int(i)},{int(j)},{fmt(a)},{fmt(p)}\n")
        for name in sorted(self.panels):
            paths.append(emit_plot_data(self, name, out))
        return paths


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def emit_plot_data(report: EvalReport, panel: str, out_dir) -> Path:
    """Write ``panel-<panel>.csv`` with header ``x,y,series``."""
    if panel not in report.panels:
        raise ArgumentError(f"report {report.name!r} has no panel {panel!r}; have {sorted(report.panels)}")
    path = Path(out_dir) / f"panel-{panel}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,y,series\n")
        for x, y, s in report.panels[panel].points:
            fh.write(f"{fmt(x)},{fmt(y)},{s}\n")
    return path


def read_cells(path):
    """Per-run (actual, predicted) arrays from a ``cells.csv`` file."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            label, _, _, a, p = line.rstrip("\n").split(",")
            out.setdefault(label, ([], []))
            out[label][0].append(float(a))
            out[label][1].append(float(p))
    return {k: (np.array(a), np.array(p)) for k, (a, p) in out.items()}


def read_panel(path):
    """(x, y, series) columns of a panel CSV."""
    xs, ys, ss = [], [], []
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            x, y, s = line.rstrip("\n").split(",")
            xs.append(float(x))
            ys.append(float(y))
            ss.append(s)
    return np.array(xs), np.array(ys), np.array(ss)
