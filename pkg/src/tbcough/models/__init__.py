"""Classifiers with probability outputs: LR, MLP, RF and AdaBoost."""

from .base import (FAMILIES, SCALED_FAMILIES, ModelSpec, Pipeline, TrainedModel, fit_pipeline,
                   hyperparameter_grid, load_pipeline, model_from_dict, model_to_dict,
                   pipeline_from_dict, pipeline_to_dict, predict_proba, save_pipeline, train)
from .adaboost import train_adaboost
from .forest import train_rf
from .logistic import train_lr
from .mlp import train_mlp

__all__ = [
    "FAMILIES", "SCALED_FAMILIES", "ModelSpec", "Pipeline", "TrainedModel", "fit_pipeline",
    "hyperparameter_grid", "load_pipeline", "model_from_dict", "model_to_dict",
    "pipeline_from_dict", "pipeline_to_dict", "predict_proba", "save_pipeline", "train",
    "train_adaboost", "train_lr", "train_mlp", "train_rf",
]
