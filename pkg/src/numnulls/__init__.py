"""Query answering over bag databases with numerical marked nulls."""

__version__ = "0.1.0"

from .approx import Estimate, LikelihoodQuery, ThresholdResult, like_apx, threshold
from .condworld import ConditionalWorld, check_trivial_extension, instantiate, lift, prune, validate_world
from .errors import NumNullsError
from .evaluate import evaluate
from .model import Bag, Exponential, IncompleteDatabase, Normal, Null, Uniform, load_database
from .oracle import likelihood as oracle_likelihood
from .parser import parse, to_text
from .rewrite import build_apx_query, build_compute_query
from .rng import BACKEND

__all__ = [
    "BACKEND",
    "Bag",
    "ConditionalWorld",
    "Estimate",
    "Exponential",
    "IncompleteDatabase",
    "LikelihoodQuery",
    "Normal",
    "Null",
    "NumNullsError",
    "ThresholdResult",
    "Uniform",
    "build_apx_query",
    "build_compute_query",
    "check_trivial_extension",
    "evaluate",
    "instantiate",
    "like_apx",
    "lift",
    "load_database",
    "oracle_likelihood",
    "parse",
    "prune",
    "threshold",
    "to_text",
    "validate_world",
]
