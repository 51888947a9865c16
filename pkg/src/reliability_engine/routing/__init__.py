"""Routing: ACM-Tabellen, semantischer kNN-Router und gelernte Router."""

from .acm_router import pilot_estimate, run_acm, run_soft_acm, select_profile
from .embeddings import Embedder, HashEmbedder, HttpEmbedder
from .learned_router import fit_logit_router, fit_ridge_router, load_router, predict, save_router
from .routing_models import CacheEntry, McsProfile, McsTable, RouterWeights, TechniqueOutcome
from .semknn_router import lambda_sweep, semknn_dispatch, semknn_scores

__all__ = [
    "CacheEntry",
    "Embedder",
    "HashEmbedder",
    "HttpEmbedder",
    "McsProfile",
    "McsTable",
    "RouterWeights",
    "TechniqueOutcome",
    "fit_logit_router",
    "fit_ridge_router",
    "lambda_sweep",
    "load_router",
    "pilot_estimate",
    "predict",
    "run_acm",
    "run_soft_acm",
    "save_router",
    "select_profile",
    "semknn_dispatch",
    "semknn_scores",
]
