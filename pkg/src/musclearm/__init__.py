"""Muscle-arm simulator, goal babbling IK learning, and motor abundance tools."""

__version__ = "0.1.0"

from .plant import Plant, PlantConfig
from .goalspace import ConvexHull, GoalGrid, convex_hull, grid_intersect, remove_outliers, sample_empirical
from .invmodel import InverseModel
from .babble import BabbleConfig, evaluate, feedback_reach, run_session
from .cmaes import CmaConfig, CmaEs, optimize
from .gmm import GaussianMixture, fit_gmm, select_components
from .abundance import AbundanceConfig, PostureSet, abundance_report, query_abundance

__all__ = [
    "Plant",
    "PlantConfig",
    "ConvexHull",
    "GoalGrid",
    "convex_hull",
    "grid_intersect",
    "remove_outliers",
    "sample_empirical",
    "InverseModel",
    "BabbleConfig",
    "evaluate",
    "feedback_reach",
    "run_session",
    "CmaConfig",
    "CmaEs",
    "optimize",
    "GaussianMixture",
    "fit_gmm",
    "select_components",
    "AbundanceConfig",
    "PostureSet",
    "abundance_report",
    "query_abundance",
]
