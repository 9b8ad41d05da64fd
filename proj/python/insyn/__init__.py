"""Interaction-aware pedestrian trajectory prediction.

Thin wrapper around the compiled _insyn extension; see the package README for
the pipeline (ingest / synth / preprocess / train / eval / predict).
"""

try:
    from ._insyn import *  # noqa: F401,F403
    from ._insyn import __doc__ as _doc
except ImportError:  # running against a plain CMake build via PYTHONPATH
    from _insyn import *  # noqa: F401,F403
    from _insyn import __doc__ as _doc

__all__ = [
    "Scene",
    "SampleWindow",
    "FeatureStats",
    "Models",
    "read_scene",
    "write_scene",
    "ingest",
    "generate_scene",
    "verify_scenario_labels",
    "region_of",
    "walking_states",
    "window_scene",
    "rotate_window",
    "scale_window",
    "distance_feature",
    "fit_stats",
    "apply_stats",
    "normalize_windows",
    "ade",
    "fde",
    "ide",
    "best_of_k",
    "train",
    "load",
    "OBS_STEPS",
    "FUTURE_STEPS",
    "LARGE_DISTANCE",
]
