"""Privacy-preserving portrait matting: P3M-Net, face anonymization,
matting metrics and the blurred/normal train-test protocols."""

from .anonymize import LandmarkSet, anonymize, blur_face, exclude_transition, face_mask_from_landmarks
from .core import BG, FG, TRANSITION, Trimap, composite, generate_trimap, transition_mask
from .estimator import P3MMatting, TrimapTransformer
from .metrics import MetricReport, evaluate
from .network import P3MNet, P3MNetConfig, fuse_predictions
from .objective import LossWeights, total_loss
from .protocol import Protocol, run_protocol
from .training import TrainConfig, predict, train

__all__ = [
    "BG", "FG", "TRANSITION", "Trimap", "composite", "generate_trimap", "transition_mask",
    "LandmarkSet", "anonymize", "blur_face", "exclude_transition", "face_mask_from_landmarks",
    "P3MNet", "P3MNetConfig", "fuse_predictions",
    "LossWeights", "total_loss",
    "MetricReport", "evaluate",
    "Protocol", "run_protocol",
    "TrainConfig", "predict", "train",
    "P3MMatting", "TrimapTransformer",
]
