"""Simulation preorders for Markov chains and probabilistic automata."""

from .models import BOT, Distribution, Kind, Model, ModelError, RateFunction, Relation, parse_model, serialize_model
from .probsim import simrel_prob
from .stats import Stats
from .strongsim import simrel_basic, simrel_fps, simrel_pa, simrel_strong
from .weaksim import simrel_w

__all__ = [
    "BOT",
    "Distribution",
    "Kind",
    "Model",
    "ModelError",
    "RateFunction",
    "Relation",
    "Stats",
    "parse_model",
    "serialize_model",
    "simrel_basic",
    "simrel_fps",
    "simrel_pa",
    "simrel_prob",
    "simrel_strong",
    "simrel_w",
]
