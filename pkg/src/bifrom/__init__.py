"""Local reduced-order models with cluster selection for a pitchfork-bifurcating reaction-diffusion system."""

from .cluster import Clustering, LocalBasisSet, enrich_overlap, kmeans
from .config import PipelineConfig, load_config, parse_config
from .evaluation import BifurcationDiagram, MethodReport, bifurcation_diagram, compare_methods, evaluate_method
from .fom import FomConfig, SnapshotSet, critical_mu1, generate_snapshots, newton_solve, probe, steady_solve
from .matrixio import load_matrix, save_matrix
from .pod import Basis, compute_pod
from .podnn import PodNnModel, build_podnn
from .projection import GlobalRom, LocalRoms
from .rom import ReducedOperators, assemble_reduced, rom_solve
from .selection import Criterion, SelectionCriterion, make_criterion
from .workspace import Workspace

__all__ = [
    "Basis",
    "BifurcationDiagram",
    "Clustering",
    "Criterion",
    "FomConfig",
    "GlobalRom",
    "LocalBasisSet",
    "LocalRoms",
    "MethodReport",
    "PipelineConfig",
    "PodNnModel",
    "ReducedOperators",
    "SelectionCriterion",
    "SnapshotSet",
    "Workspace",
    "assemble_reduced",
    "bifurcation_diagram",
    "build_podnn",
    "compare_methods",
    "compute_pod",
    "critical_mu1",
    "enrich_overlap",
    "evaluate_method",
    "generate_snapshots",
    "kmeans",
    "load_config",
    "load_matrix",
    "make_criterion",
    "newton_solve",
    "parse_config",
    "probe",
    "rom_solve",
    "save_matrix",
    "steady_solve",
]
