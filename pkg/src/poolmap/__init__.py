"""Pool-based active learning with dataset-map diagnostics.

Synthetic pools with injected collective outliers, eight acquisition
strategies, training-dynamics cartography, and an ablation harness that
measures how sample efficiency recovers as outliers are pruned.
"""

__version__ = "0.1.0"

from .datagen import Dataset, GeneratorConfig, Group, generate_synthetic, load_csv, save_csv, split_seed_pool
from .models import Model, ModelSpec, TrainConfig, init_model, predict_proba, train

__all__ = [
    "Dataset",
    "GeneratorConfig",
    "Group",
    "Model",
    "ModelSpec",
    "TrainConfig",
    "generate_synthetic",
    "init_model",
    "load_csv",
    "predict_proba",
    "save_csv",
    "split_seed_pool",
    "train",
]
