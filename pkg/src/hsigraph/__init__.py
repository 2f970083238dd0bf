"""Superpixel multi-feature graph learning for semi-supervised hyperspectral classification."""
from .data_io import (
    ClassPalette,
    GroundTruth,
    HsiCube,
    generate_synthetic_scene,
    load_cube,
    load_ground_truth,
    render_label_map,
    save_cube,
)
from .evaluation import TrialReport, confusion_matrix, metrics, run_trials, sample_training_labels
from .kernels import BACKEND
from .pipelines import PipelineConfig, builtin_config, load_config, run_mgl, run_pmgl

__version__ = "0.1.0"
