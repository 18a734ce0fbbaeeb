"""Which order-book levels carry predictive information?

Level-granular wrapper feature selection (backward elimination and a binary
particle swarm) around small numpy classifiers of mid-price movement.
"""
from .lob_data import Dataset, LobEvent, MovementLabel, SampleWindow, build_windows, parse_events, split_dataset
from .masking import LevelMask, apply_mask, mask_matrix
from .synthgen import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "LevelMask",
    "LobEvent",
    "MovementLabel",
    "SampleWindow",
    "SynthConfig",
    "apply_mask",
    "build_windows",
    "generate",
    "mask_matrix",
    "parse_events",
    "split_dataset",
]
