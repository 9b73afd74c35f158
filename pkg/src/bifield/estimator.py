"""Scikit-learn style estimator facade over the trainable field.

`InstanceFieldReconstructor` wraps scene preparation, complementary
training, occupancy prediction and instance extraction behind the familiar
fit/predict surface, with hyperparameters exposed through get_params /
set_params so the reconstructor composes with model-selection tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .train import (
    Checkpoint,
    TrainConfig,
    TrainScene,
    extract_instances,
    field_on_points,
    train,
)
from .validation import as_points


class InstanceFieldReconstructor(BaseEstimator):
    """Two-channel occupancy reconstructor for interacting shape pairs.

    Parameters mirror `TrainConfig`; `fit` consumes prepared `TrainScene`
    objects (see `bifield.train.build_scene`), `predict` evaluates both
    occupancy channels at 3D points against a fitted scene, and
    `extract(scene_index)` returns the two instance meshes.
    """

    def __init__(
        self,
        learning_rate: float = 1e-4,
        batch_scenes: int = 4,
        points_per_scene: int = 6000,
        epochs: int = 10,
        steps_per_epoch: int = 100,
        mix_ratio: tuple = (1, 1),
        hidden: int = 128,
        depth: int = 4,
        n_freq: int = 4,
        feature_levels: int = 4,
        w_i: float = 1.0,
        w_u: float = 1.0,
        w_in: float = 1.0,
        seed: int = 0,
    ):
        self.learning_rate = learning_rate
        self.batch_scenes = batch_scenes
        self.points_per_scene = points_per_scene
        self.epochs = epochs
        self.steps_per_epoch = steps_per_epoch
        self.mix_ratio = mix_ratio
        self.hidden = hidden
        self.depth = depth
        self.n_freq = n_freq
        self.feature_levels = feature_levels
        self.w_i = w_i
        self.w_u = w_u
        self.w_in = w_in
        self.seed = seed

    def _config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_scenes=self.batch_scenes,
            points_per_scene=self.points_per_scene,
            epochs=self.epochs,
            steps_per_epoch=self.steps_per_epoch,
            mix_ratio=tuple(self.mix_ratio),
            hidden=self.hidden,
            depth=self.depth,
            n_freq=self.n_freq,
            feature_levels=self.feature_levels,
            w_i=self.w_i,
            w_u=self.w_u,
            w_in=self.w_in,
            seed=self.seed,
        )

    def fit(self, scenes: list[TrainScene], y=None, init: Checkpoint | None = None):
        """Train the field on the scene collection; returns self."""
        result = train(list(scenes), self._config(), init=init)
        self.scenes_ = list(scenes)
        self.checkpoint_ = result.checkpoint
        self.loss_log_ = result.log
        return self

    def _require_fitted(self):
        if not hasattr(self, "checkpoint_"):
            raise NotFittedError("fit the reconstructor before querying it")

    def predict(self, X, scene_index: int = 0) -> np.ndarray:
        """Occupancy of both channels at points X (n, 3) -> (n, 2)."""
        self._require_fitted()
        pts = as_points(X, "X")
        s_h, s_o = field_on_points(self.checkpoint_, self.scenes_[scene_index], pts)
        return np.stack([s_h, s_o], axis=1)

    def extract(self, scene_index: int = 0, resolution: int = 128, iso: float = 0.5):
        """Marching-cubes instance meshes (human, object) for a fitted scene."""
        self._require_fitted()
        return extract_instances(
            self.checkpoint_, self.scenes_[scene_index], resolution=resolution, iso=iso
        )
