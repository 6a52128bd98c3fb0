"""Just-in-time packet scheduling simulator for wireless sensor networks."""

from .channel import BACKEND
from .config import ExperimentConfig, SimConfig
from .engine import Engine, seconds
from .network import RunResult, Simulation, simulate

__all__ = [
    "BACKEND", "Engine", "ExperimentConfig", "RunResult", "SimConfig", "Simulation",
    "seconds", "simulate",
]
