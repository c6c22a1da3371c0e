"""Deterministic simulator and coordination server for lift-equipped
furniture-moving robot swarms keeping a virtual scene physically in sync."""

__version__ = "0.1.0"

from .engine import Engine, EventError
from .scenario import ScenarioError, load_scenario
from .world import World

__all__ = ["Engine", "EventError", "ScenarioError", "World", "load_scenario", "__version__"]
