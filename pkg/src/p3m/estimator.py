"""scikit-learn style wrappers.

``P3MMatting`` trains and runs P3M-Net on in-memory arrays so it can sit in
pipelines or be cloned by model-selection utilities. ``TrimapTransformer``
turns alpha mattes into trimap label maps.
"""

import tempfile

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .core import DEFAULT_DILATION_RADIUS, generate_trimap
from .data import ArrayDataset
from .metrics import sad
from .network import P3MNetConfig
from .objective import LossWeights
from .training import TrainConfig, build_model, load_model, predict, train
from .validation import check_alpha, check_image


class P3MMatting(RegressorMixin, BaseEstimator):
    """Trimap-free portrait matting estimator.

    ``X`` is a sequence of (H, W, 3) images and ``y`` a sequence of (H, W)
    alpha mattes, both in [0, 1] (uint8 is accepted and scaled).
    """

    def __init__(self, channels=(64, 64, 128, 256, 512, 512), blocks=(3, 4, 6, 3, 2),
                 integration=True, lr=1e-5, batch_size=8, epochs=150, max_steps=None,
                 crop_sizes=(512, 768, 1024), target_size=512, flip_prob=0.5,
                 dilation_radius=25, lambda_m=2.0, lambda_s=1.0 / 6.0, lambda_f=1.0,
                 seed=0, work_dir=None):
        self.channels = channels
        self.blocks = blocks
        self.integration = integration
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.max_steps = max_steps
        self.crop_sizes = crop_sizes
        self.target_size = target_size
        self.flip_prob = flip_prob
        self.dilation_radius = dilation_radius
        self.lambda_m = lambda_m
        self.lambda_s = lambda_s
        self.lambda_f = lambda_f
        self.seed = seed
        self.work_dir = work_dir

    def _train_config(self):
        return TrainConfig(
            crop_sizes=self.crop_sizes, target_size=self.target_size, flip_prob=self.flip_prob,
            lr=self.lr, batch_size=self.batch_size, epochs=self.epochs,
            max_steps=self.max_steps, seed=self.seed,
            loss_weights=LossWeights(self.lambda_m, self.lambda_s, self.lambda_f),
            network=P3MNetConfig(
                channels=self.channels, blocks=self.blocks, integration=self.integration,
                dilation_radius=self.dilation_radius,
            ),
        )

    def fit(self, X, y):
        dataset = ArrayDataset(list(X), list(y))
        config = self._train_config()
        if self.work_dir is None:
            with tempfile.TemporaryDirectory() as tmp:
                ckpt = train(dataset, config, tmp)
                self.model_, _ = load_model(ckpt)
        else:
            self.checkpoint_path_ = train(dataset, config, self.work_dir)
            self.model_, _ = load_model(self.checkpoint_path_)
        self.n_train_ = len(dataset)
        return self

    def init_model(self):
        """Set up an untrained network, e.g. to inspect outputs at initialization."""
        self.model_ = build_model(self._train_config()).eval()
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("P3MMatting is not fitted yet; call fit first")

    def predict(self, X):
        """List of (H, W) alpha mattes, one per image."""
        self._check_fitted()
        return [predict(self.model_, check_image(im, min_side=0))[0] for im in X]

    def predict_segmentation(self, X):
        self._check_fitted()
        return [predict(self.model_, check_image(im, min_side=0))[1] for im in X]

    def score(self, X, y, sample_weight=None):
        """Negative mean SAD (thousands); higher is better."""
        preds = self.predict(X)
        errors = np.array([sad(p, check_alpha(t)) for p, t in zip(preds, y)])
        return -float(np.average(errors, weights=sample_weight))


class TrimapTransformer(TransformerMixin, BaseEstimator):
    """Map alpha mattes to trimap label arrays (0 BG, 1 transition, 2 FG)."""

    def __init__(self, dilation_radius=DEFAULT_DILATION_RADIUS):
        self.dilation_radius = dilation_radius

    def fit(self, X, y=None):
        if self.dilation_radius < 0:
            raise ValueError("dilation_radius must be >= 0")
        return self

    def transform(self, X):
        return [generate_trimap(a, self.dilation_radius).labels for a in X]
