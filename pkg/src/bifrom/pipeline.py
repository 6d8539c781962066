"""Offline/online stage orchestration on top of a Workspace.

Each ``ensure_*`` function returns the stage's product, building it (and any
missing upstream stage) only when its manifest flag is unset.
"""

from __future__ import annotations

import logging
import time

from .config import PipelineConfig
from .errors import ConfigError
from .evaluation import LocalRomMethod, MethodReport, compare_methods
from .fom import assemble_operators, generate_snapshots
from .podnn import build_podnn
from .projection import GlobalRom, LocalRoms
from .selection import Criterion, build_error_table, error_table, make_criterion, oracle_selection
from .workspace import Workspace

log = logging.getLogger(__name__)

# evaluation order of compare; local tags are filtered by what has been built
METHOD_ORDER = ["global"] + [f"local-{c.value}" for c in Criterion] + [f"local-{c.value}-nooverlap" for c in Criterion] + ["podnn"]


def _timed(label: str):
    class _T:
        def __enter__(self):
            self.t0 = time.perf_counter()

        def __exit__(self, *exc):
            if exc[0] is None:
                log.info("%s done in %.1fs", label, time.perf_counter() - self.t0)

    return _T()


def ensure_snapshots(ws: Workspace, name: str = "snapshots"):
    if ws.has(name):
        return ws.load_snapshots(name)
    cfg = ws.cfg
    n1, n2 = (cfg.snap_n1, cfg.snap_n2) if name == "snapshots" else (cfg.ref_n1, cfg.ref_n2)
    with _timed(f"{name} {n1}x{n2}"):
        snaps = generate_snapshots(ws.fom, n1, n2, cfg.seed)
    ws.save_snapshots(name, snaps)
    return snaps


def ensure_reference(ws: Workspace):
    return ensure_snapshots(ws, "reference")


def ensure_global(ws: Workspace) -> GlobalRom:
    if ws.has("global"):
        return ws.load_global()
    snaps = ensure_snapshots(ws)
    with _timed("global ROM"):
        rom = GlobalRom.build(ws.fom, snaps, ws.cfg.global_tol)
    log.info("global basis size %d", rom.basis.size)
    ws.save_global(rom)
    return rom


def ensure_local(ws: Workspace, overlap: bool = True):
    if ws.has(Workspace.local_stage(overlap)):
        return ws.load_local(overlap)
    snaps = ensure_snapshots(ws)
    cfg = ws.cfg
    clustering = None
    other = Workspace.local_stage(not overlap)
    if ws.has(other):
        # share the clustering so overlap on/off differ only by enrichment
        clustering = ws.load_local(not overlap)[0].clustering
    with _timed(f"local ROMs ({'overlap' if overlap else 'no overlap'})"):
        local = LocalRoms.build(
            ws.fom, snaps, cfg.k, cfg.tol1, cfg.tol2, overlap, cfg.seed, cfg.restarts, assemble_operators(ws.fom), clustering
        )
        table = build_error_table(local)
    log.info("local basis sizes %s", [b.size for b in local.bases.bases])
    ws.save_local(local, table)
    return local, table


def ensure_criterion(ws: Workspace, kind, overlap: bool = True):
    kind = Criterion(kind)
    local, table = ensure_local(ws, overlap)
    stage = Workspace.criterion_stage(kind, overlap)
    if ws.has(stage):
        return local, ws.load_criterion(kind, local, table)
    reference = labels = None
    if kind is Criterion.ORACLE:
        reference = ensure_reference(ws)
        with _timed("oracle labels"):
            labels = oracle_selection(local, reference, error_table(local, reference.params, reference.snapshots))
    cfg = ws.cfg
    with _timed(f"criterion {kind.value}"):
        crit = make_criterion(
            kind, local, table=table, hidden=cfg.hidden, train_cfg=cfg.train(), reference=reference, oracle_labels=labels
        )
    if kind is Criterion.CLASSIFIER_ANN and not crit.info.get("perfect_match", True):
        log.warning("classifier did not reach 100%% training accuracy (%.4f)", crit.info["accuracy"])
    ws.save_criterion(crit, overlap)
    return local, crit


def ensure_podnn(ws: Workspace):
    if ws.has("podnn"):
        return ws.load_podnn()
    snaps = ensure_snapshots(ws)
    cfg = ws.cfg
    with _timed("POD-NN"):
        model = build_podnn(ws.fom, snaps, cfg.podnn_tol, cfg.hidden, cfg.train("mse"))
    ws.save_podnn(model)
    return model


def parse_tag(tag: str) -> tuple[str, Criterion | None, bool]:
    """Split a method tag into (method, criterion, overlap)."""
    if tag in ("global", "podnn"):
        return tag, None, True
    if tag.startswith("local-"):
        rest = tag[len("local-") :]
        overlap = not rest.endswith("-nooverlap")
        if not overlap:
            rest = rest[: -len("-nooverlap")]
        try:
            return "local", Criterion(rest), overlap
        except ValueError:
            pass
    raise ConfigError(f"unknown method tag {tag!r}")


def make_tag(method: str, criterion=None, overlap: bool = True) -> str:
    if method != "local":
        return method
    return f"local-{Criterion(criterion).value}" + ("" if overlap else "-nooverlap")


def built_tags(ws: Workspace) -> list[str]:
    out = []
    for tag in METHOD_ORDER:
        method, crit, overlap = parse_tag(tag)
        if method == "local":
            stage = Workspace.criterion_stage(crit, overlap)
        else:
            stage = method
        if ws.has(stage):
            out.append(tag)
    return out


def build_method(ws: Workspace, tag: str):
    """Build (if needed) and return the evaluable object behind ``tag``."""
    method, crit, overlap = parse_tag(tag)
    if method == "global":
        return ensure_global(ws)
    if method == "podnn":
        return ensure_podnn(ws)
    local, criterion = ensure_criterion(ws, crit, overlap)
    return LocalRomMethod(local, criterion)


def load_method(ws: Workspace, tag: str):
    """Load a built method; raises MissingArtifactError if any stage is unset."""
    method, crit, overlap = parse_tag(tag)
    if method == "global":
        return ws.load_global()
    if method == "podnn":
        return ws.load_podnn()
    local, table = ws.load_local(overlap)
    return LocalRomMethod(local, ws.load_criterion(crit, local, table))


def compare(ws: Workspace, tags: list[str]) -> list[MethodReport]:
    reference = ws.load_snapshots("reference")
    methods = [load_method(ws, t) for t in tags]
    # local methods sharing a LocalRoms object reuse its solve memo
    shared: dict[bool, object] = {}
    for m in methods:
        if isinstance(m, LocalRomMethod):
            m.local = shared.setdefault(m.local.bases.overlap, m.local)
    return compare_methods(methods, reference)


def run_all(ws: Workspace, *, nooverlap_criteria=("centroid", "snapshot", "classifier", "oracle")) -> list[str]:
    """Build every method of the comparison; returns their tags."""
    ensure_snapshots(ws)
    ensure_reference(ws)
    tags = ["global"]
    ensure_global(ws)
    for kind in Criterion:
        ensure_criterion(ws, kind, True)
        tags.append(make_tag("local", kind, True))
    for kind in nooverlap_criteria:
        ensure_criterion(ws, kind, False)
        tags.append(make_tag("local", kind, False))
    ensure_podnn(ws)
    tags.append("podnn")
    order = {t: i for i, t in enumerate(METHOD_ORDER)}
    return sorted(tags, key=order.__getitem__)


def config_for_tests(**overrides) -> PipelineConfig:
    """Desk-scale configuration with small networks."""
    base = dict(hidden=(64, 32))
    base.update(overrides)
    return PipelineConfig(**base)

