"""Simulator and experiment harness for decentralised, hierarchical and hybrid swarm coordination."""
from .config import ExperimentConfig, from_flat, square_world
from .forest import PolicyConfig, PolicyKind
from .kernels import BACKEND
from .sim import Simulation, run_replicate
from .swarm import SensingModel

__all__ = [
    "BACKEND",
    "ExperimentConfig",
    "PolicyConfig",
    "PolicyKind",
    "SensingModel",
    "Simulation",
    "from_flat",
    "run_replicate",
    "square_world",
]
__version__ = "0.1.0"
