"""Error reports, bifurcation diagrams and the method comparison."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fom import SnapshotSet, probe
from .metrics import relative_errors
from .podnn import PodNnModel
from .projection import GlobalRom, LocalRoms
from .selection import Criterion, SelectionCriterion

log = logging.getLogger(__name__)


@dataclass
class Outcome:
    state: np.ndarray
    converged: bool
    cluster: int = -1


@dataclass
class LocalRomMethod:
    local: LocalRoms
    criterion: SelectionCriterion
    tag: str = ""

    def __post_init__(self):
        if not self.tag:
            suffix = "" if self.local.bases.overlap else "-nooverlap"
            self.tag = f"local-{self.criterion.kind.value}{suffix}"

    def clusters(self, mus) -> np.ndarray:
        return self.criterion.select_many(mus)


def run_method(method, mus) -> list[Outcome]:
    """Evaluate a global ROM, local ROM + criterion, or POD-NN at each parameter."""
    mus = np.atleast_2d(np.asarray(mus, dtype=float))
    if isinstance(method, GlobalRom):
        out = []
        for mu in mus:
            res = method.evaluate(mu)
            out.append(Outcome(res.state, res.solution.converged))
        return out
    if isinstance(method, LocalRomMethod):
        out = []
        for mu, k in zip(mus, method.clusters(mus)):
            res = method.local.evaluate_cluster(int(k), mu)
            out.append(Outcome(res.state, res.solution.converged, int(k)))
        return out
    if isinstance(method, PodNnModel):
        states = method.basis.modes @ method.coefficients(mus).T
        return [Outcome(states[:, i], True) for i in range(len(mus))]
    raise TypeError(f"unsupported method {type(method).__name__}")


def method_tag(method) -> str:
    return method.tag


@dataclass
class MethodReport:
    tag: str
    l2: np.ndarray
    linf: np.ndarray
    converged: np.ndarray
    clusters: np.ndarray
    params: np.ndarray
    online_seconds: float = 0.0
    offline_seconds: float = 0.0

    @property
    def samples(self) -> int:
        return len(self.l2)

    @property
    def mean_l2(self) -> float:
        return float(np.mean(self.l2))

    @property
    def mean_linf(self) -> float:
        return float(np.mean(self.linf))


@dataclass
class BifurcationDiagram:
    params: np.ndarray
    values: np.ndarray
    converged: np.ndarray
    source: str = "reference"
    clusters: np.ndarray | None = field(default=None, repr=False)


def reference_diagram(reference: SnapshotSet) -> BifurcationDiagram:
    values = np.array([probe(s) for s in reference.snapshots.T])
    return BifurcationDiagram(reference.params, values, np.ones(len(values), dtype=bool), "reference")


def bifurcation_diagram(method, grid: np.ndarray) -> BifurcationDiagram:
    """Probe the lifted state of ``method`` at every grid point (row-major, mu1 fastest)."""
    outcomes = run_method(method, grid)
    return BifurcationDiagram(
        np.asarray(grid, dtype=float),
        np.array([probe(o.state) for o in outcomes]),
        np.array([o.converged for o in outcomes]),
        method_tag(method),
        np.array([o.cluster for o in outcomes]),
    )


def evaluate_method(method, reference: SnapshotSet, *, full_state: bool = False) -> MethodReport:
    t0 = time.perf_counter()
    outcomes = run_method(method, reference.params)
    elapsed = time.perf_counter() - t0
    errs = [relative_errors(o.state, ref, full_state=full_state) for o, ref in zip(outcomes, reference.snapshots.T)]
    return MethodReport(
        method_tag(method),
        np.array([e.l2 for e in errs]),
        np.array([e.linf for e in errs]),
        np.array([o.converged for o in outcomes]),
        np.array([o.cluster for o in outcomes]),
        reference.params,
        online_seconds=elapsed,
    )


def compare_methods(methods, reference: SnapshotSet, *, full_state: bool = False) -> list[MethodReport]:
    reports = []
    for m in methods:
        rep = evaluate_method(m, reference, full_state=full_state)
        log.info("%-34s mean L2 %.4e  mean Linf %.4e  (%.1fs online)", rep.tag, rep.mean_l2, rep.mean_linf, rep.online_seconds)
        reports.append(rep)
    return reports


def oracle_method(local: LocalRoms, reference: SnapshotSet, labels: np.ndarray) -> LocalRomMethod:
    crit = SelectionCriterion(Criterion.ORACLE, local.cfg, local.k, reference_params=reference.params, oracle_labels=labels)
    return LocalRomMethod(local, crit)


# ---- CSV / SVG output -------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_errors_csv(path, reports: list[MethodReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "samples", "mean_l2", "mean_linf"])
        for r in reports:
            w.writerow([r.tag, r.samples, _fmt(r.mean_l2), _fmt(r.mean_linf)])


def write_points_csv(path, report: MethodReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mu1", "mu2", "l2", "linf", "converged", "cluster"])
        for (m1, m2), e2, ei, c, k in zip(report.params, report.l2, report.linf, report.converged, report.clusters):
            w.writerow([_fmt(m1), _fmt(m2), _fmt(e2), _fmt(ei), int(c), int(k)])


def read_points_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return {key: np.array([float(r[key]) for r in rows]) for key in ("mu1", "mu2", "l2", "linf", "converged", "cluster")}


def write_diagram_csv(path, diagram: BifurcationDiagram) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mu1", "mu2", "observable", "converged"])
        for (m1, m2), v, c in zip(diagram.params, diagram.values, diagram.converged):
            w.writerow([_fmt(m1), _fmt(m2), _fmt(v), int(c)])


def read_diagram_csv(path, source: str = "file") -> BifurcationDiagram:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    params = np.array([[float(r["mu1"]), float(r["mu2"])] for r in rows])
    values = np.array([float(r["observable"]) for r in rows])
    conv = np.array([bool(int(r["converged"])) for r in rows])
    return BifurcationDiagram(params, values, conv, source)


def write_diagram_text(path, diagram: BifurcationDiagram) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (m1, m2), v in zip(diagram.params, diagram.values):
            fh.write(f"{m1:.10g} {m2:.10g} {v:.10g}\n")


def _color(t: float) -> str:
    # blue -> white -> red ramp on [0, 1]
    t = min(max(t, 0.0), 1.0)
    if t < 0.5:
        s = t / 0.5
        r, g, b = int(59 + s * (255 - 59)), int(76 + s * (255 - 76)), int(192 + s * (255 - 192))
    else:
        s = (t - 0.5) / 0.5
        r, g, b = 255, int(255 - s * (255 - 60)), int(255 - s * (255 - 50))
    return f"#{r:02x}{g:02x}{b:02x}"


def write_diagram_svg(path, diagram: BifurcationDiagram, title: str = "") -> None:
    """Heatmap of the observable over the parameter box, one cell per grid point."""
    m1 = np.unique(diagram.params[:, 0])
    m2 = np.unique(diagram.params[:, 1])
    cell, pad = 12, 50
    width, height = pad + cell * len(m1) + 20, pad + cell * len(m2) + 40
    lo, hi = float(np.min(diagram.values)), float(np.max(diagram.values))
    span = hi - lo if hi > lo else 1.0
    idx1 = {v: i for i, v in enumerate(m1)}
    idx2 = {v: i for i, v in enumerate(m2)}
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<text x="{pad}" y="20" font-family="sans-serif" font-size="12">{title or diagram.source}: '
        f"probe u(0.5), range [{lo:.4g}, {hi:.4g}]</text>",
    ]
    for (a, b), v, ok in zip(diagram.params, diagram.values, diagram.converged):
        x = pad + cell * idx1[a]
        y = pad + cell * (len(m2) - 1 - idx2[b])
        fill = _color((v - lo) / span) if ok else "#000000"
        parts.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}"/>')
    yb = pad + cell * len(m2) + 15
    parts.append(f'<text x="{pad}" y="{yb}" font-family="sans-serif" font-size="10">mu1 {m1[0]:.3g} .. {m1[-1]:.3g}</text>')
    parts.append(
        f'<text x="12" y="{pad + cell * len(m2)}" font-family="sans-serif" font-size="10" '
        f'transform="rotate(-90 12 {pad + cell * len(m2)})">mu2 {m2[0]:.3g} .. {m2[-1]:.3g}</text>'
    )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
