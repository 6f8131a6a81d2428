"""Secure cell-free ISAC with finite-capacity fronthaul: channel model,
closed-form evaluators, MM/SDR joint design, detection and experiments."""

from .model import Budgets, DesignPoint, check_feasibility, secrecy_rate, sensing_sinr
from .optimizer import MMSettings, MMTrace, TransformedPoint, mm_optimize
from .scenario import ChannelSet, ScenarioConfig, Square, draw_channels

__all__ = [
    "Budgets", "ChannelSet", "DesignPoint", "MMSettings", "MMTrace", "ScenarioConfig",
    "Square", "TransformedPoint", "check_feasibility", "draw_channels", "mm_optimize",
    "secrecy_rate", "sensing_sinr",
]
__version__ = "0.1.0"
