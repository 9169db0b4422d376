from .config import (
    ConfigError,
    LiveSource,
    ReplaySource,
    SessionConfig,
    SimSource,
    load_config,
)
from .core import ScriptOutcome, SessionCore, TurnResult, run_script
from .estimators import ModelEstimator, SimTargets, SlidingEstimator
from .service import Session, SessionError, serve
from .ws import ReaderServer, serve_ui

__all__ = [
    "ConfigError",
    "LiveSource",
    "ModelEstimator",
    "ReaderServer",
    "ReplaySource",
    "ScriptOutcome",
    "Session",
    "SessionConfig",
    "SessionCore",
    "SessionError",
    "SimSource",
    "SimTargets",
    "SlidingEstimator",
    "TurnResult",
    "load_config",
    "run_script",
    "serve",
    "serve_ui",
]
