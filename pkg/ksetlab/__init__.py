"""ksetlab – a deterministic lab for k-set agreement under Byzantine and crash failures."""

from __future__ import annotations

__all__ = [
    "Protocol",
    "SystemConfig",
    "Value",
    "compute_k_bound",
    "evaluate",
    "main",
    "run_scenario",
    "__version__",
]

__version__ = "0.1.0"

from .checker import evaluate  # noqa: E402
from .cli import main  # noqa: E402  (re-export for convenience)
from .model import Protocol, SystemConfig, Value, compute_k_bound  # noqa: E402
from .scenarios import run_scenario  # noqa: E402
