"""Wireless association trace analytics: sessions, user metrics, location
similarity, encounters and friendship, encounter-graph metrics,
distribution fitting, epidemic diffusion and a synthetic trace generator."""

__version__ = "0.1.0"

from .diffusion import EpidemicDiffusion
from .encounters import FriendshipIndex
from .ergraph import SmallWorldAnalyzer
from .ingest import PollReconstructor
from .similarity import NetworkSimilarity
from .statfit import BiParetoFit, ExponentialFit
from .synthgen import CampusSpec, generate
from .trace_model import AssociationRecord, Interval, build_timelines
from .user_metrics import UserMetrics

__all__ = [
    "AssociationRecord",
    "BiParetoFit",
    "CampusSpec",
    "EpidemicDiffusion",
    "ExponentialFit",
    "FriendshipIndex",
    "Interval",
    "NetworkSimilarity",
    "PollReconstructor",
    "SmallWorldAnalyzer",
    "UserMetrics",
    "build_timelines",
    "generate",
]
