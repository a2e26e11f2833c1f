"""Test-time adaptation of a frozen detector with learnable class prototypes
and nearest-feature calibration."""

from .engine import AdaptationEngine, EvaluationReport, StrategyConfig, run_stream
from .metrics import acc, auc, eer

__version__ = "0.1.0"

__all__ = ["AdaptationEngine", "EvaluationReport", "StrategyConfig", "run_stream", "acc", "auc", "eer"]
