"""Multi-agent persistent coverage simulation with descriptor functions."""
from .runner import run
from .scenario import load_scenario, save_scenario

__all__ = ["load_scenario", "run", "save_scenario"]
__version__ = "0.1.0"
