"""Action-map completion: discretized scenes, kernel side-information, and
graph-regularized weighted NMF, plus the evaluation and localization tooling
built on top of them."""

from actionmaps.scene import (
    ActivityVocabulary,
    Demonstration,
    GlobalIndex,
    GridPose,
    SceneGrid,
    SceneStats,
    create_scene,
    stack_scenes,
)
from actionmaps.sideinfo import KernelConfig, LocationFeatures, build_gram_matrix
from actionmaps.solver import ActionMatrixBundle, FactorPair, SolverParams, fit, predict

__all__ = [
    "ActivityVocabulary",
    "Demonstration",
    "GlobalIndex",
    "GridPose",
    "SceneGrid",
    "SceneStats",
    "create_scene",
    "stack_scenes",
    "KernelConfig",
    "LocationFeatures",
    "build_gram_matrix",
    "ActionMatrixBundle",
    "FactorPair",
    "SolverParams",
    "fit",
    "predict",
]

__version__ = "0.1.0"
