"""Physiological interactive fiction engine.

A branching-story runtime whose branch selection can be driven by features
extracted from streamed physiological signals, plus the training and
evaluation pipeline that turns raw signals into reader-state estimates.
"""

__version__ = "0.1.0"
