"""Training loop, checkpoints and inference for P3M-Net.

A checkpoint is a ``torch.save`` archive holding::

    format        "p3m-checkpoint/1"
    model         network state dict (names listed by checkpoint_manifest)
    optimizer     Adam state dict
    epoch, step   completed epochs / optimizer steps
    order, cursor sample order of the current epoch and next batch index
    config        TrainConfig as a plain dict, config_hash its sha256
    numpy_rng     augmentation generator state
    torch_rng     torch CPU generator state
    train_variant "blurred" / "normal" when trained from a manifest

A ``checkpoint.json`` sidecar records the hash, step and parameter shapes.
The per-step loss log is ``loss_log.jsonl`` next to the checkpoint.
"""

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import torch

from .core import generate_trimap
from .data import DatasetManifest, augment
from .metrics import sad
from .network import P3MNet, P3MNetConfig
from .objective import LossWeights, total_loss
from .validation import check_image

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "p3m-checkpoint/1"
CHECKPOINT_NAME = "checkpoint.pt"
LOG_NAME = "loss_log.jsonl"


@dataclass
class TrainConfig:
    crop_sizes: tuple = (512, 768, 1024)
    target_size: int = 512
    flip_prob: float = 0.5
    lr: float = 1e-5
    batch_size: int = 8
    epochs: int = 150
    max_steps: int = None
    subset: int = None
    seed: int = 0
    optimizer: str = "adam"
    betas: tuple = (0.9, 0.999)
    weight_decay: float = 0.0
    checkpoint_every: int = 100
    normalize_ce: bool = True
    loss_weights: LossWeights = field(default_factory=LossWeights)
    network: P3MNetConfig = field(default_factory=P3MNetConfig)

    def __post_init__(self):
        if isinstance(self.loss_weights, dict):
            self.loss_weights = LossWeights(**self.loss_weights)
        if isinstance(self.network, dict):
            self.network = P3MNetConfig(**self.network)
        self.crop_sizes = tuple(int(c) for c in self.crop_sizes)
        self.betas = tuple(self.betas)
        if self.optimizer != "adam":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")

    def to_dict(self):
        return json.loads(json.dumps(asdict(self)))

    @property
    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path, **overrides):
        data = json.loads(Path(path).read_text()) if path else {}
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)


# small-scale preset for CI and laptop runs
DESK_PRESET = {"epochs": 2, "subset": 64}


def _make_optimizer(model, config):
    return torch.optim.Adam(
        model.parameters(), lr=config.lr, betas=config.betas, weight_decay=config.weight_decay
    )


def build_model(config, seed=None):
    torch.manual_seed(config.seed if seed is None else seed)
    return P3MNet(config.network)


def to_tensor_batch(images, alphas):
    x = torch.from_numpy(np.stack(images).transpose(0, 3, 1, 2).astype(np.float32))
    y = torch.from_numpy(np.stack(alphas)[:, None].astype(np.float32))
    return x, y


def make_batch(dataset, indices, rng, config):
    images, alphas, labels = [], [], []
    for i in indices:
        _, image, alpha = dataset[int(i)]
        image, alpha = augment(
            image, alpha, rng, config.crop_sizes, config.target_size, config.flip_prob
        )
        images.append(image)
        alphas.append(alpha)
        labels.append(generate_trimap(alpha, config.network.dilation_radius).labels)
    x, y = to_tensor_batch(images, alphas)
    return x, y, torch.from_numpy(np.stack(labels).astype(np.int64))


def save_checkpoint(path, state):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    torch.save(state, tmp)
    tmp.replace(path)
    sidecar = {
        "format": state["format"],
        "config_hash": state["config_hash"],
        "epoch": state["epoch"],
        "step": state["step"],
        "parameters": {k: list(v.shape) for k, v in state["model"].items()},
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=1))
    return path


def load_checkpoint(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint {path} not found")
    try:
        state = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise OSError(f"unreadable checkpoint {path}: {exc}") from exc
    if not isinstance(state, dict) or state.get("format") != CHECKPOINT_FORMAT:
        raise OSError(f"{path} is not a {CHECKPOINT_FORMAT} checkpoint")
    return state


def load_model(checkpoint):
    """Model in eval mode plus its TrainConfig, from a path or state dict."""
    state = checkpoint if isinstance(checkpoint, dict) else load_checkpoint(checkpoint)
    config = TrainConfig.from_dict(state["config"])
    model = P3MNet(config.network)
    model.load_state_dict(state["model"])
    return model.eval(), config


def _truncate_log(log_path, last_step):
    if not log_path.exists():
        return
    kept = [
        line for line in log_path.read_text().splitlines()
        if line.strip() and json.loads(line)["step"] <= last_step
    ]
    log_path.write_text("".join(line + "\n" for line in kept))


def train(dataset, config, out_dir, resume=False):
    """Train P3M-Net and write ``checkpoint.pt`` plus the loss log to ``out_dir``.

    ``dataset`` is a DatasetManifest or any sequence of (name, image, alpha).
    With ``resume`` the run continues from an existing checkpoint in
    ``out_dir``; log lines written after that checkpoint are discarded so
    the step sequence has no gaps or repeats.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / CHECKPOINT_NAME
    log_path = out_dir / LOG_NAME
    if config.subset:
        dataset = dataset.subset(config.subset)
    n = len(dataset)
    if n == 0:
        raise ValueError("empty training set")
    variant = getattr(dataset, "variant", None)
    if isinstance(dataset, DatasetManifest) and dataset.split != "train":
        raise ValueError(f"training needs a train split manifest, got {dataset.split!r}")

    model = build_model(config)
    optimizer = _make_optimizer(model, config)
    rng = np.random.default_rng(config.seed)
    epoch, step, cursor, order = 0, 0, 0, None

    if resume and ckpt_path.exists():
        state = load_checkpoint(ckpt_path)
        if state["config_hash"] != config.config_hash:
            log.warning("resuming with a different config (hash %s -> %s)",
                        state["config_hash"][:12], config.config_hash[:12])
        model.load_state_dict(state["model"])
        optimizer.load_state_dict(state["optimizer"])
        epoch, step, cursor = state["epoch"], state["step"], state["cursor"]
        order = np.asarray(state["order"]) if state["order"] is not None else None
        rng.bit_generator.state = state["numpy_rng"]
        torch.set_rng_state(state["torch_rng"])
        _truncate_log(log_path, step)
    elif log_path.exists():
        log_path.unlink()

    def snapshot():
        return {
            "format": CHECKPOINT_FORMAT,
            "model": model.state_dict(),
            "optimizer": optimizer.state_dict(),
            "epoch": epoch,
            "step": step,
            "cursor": cursor,
            "order": None if order is None else [int(i) for i in order],
            "config": config.to_dict(),
            "config_hash": config.config_hash,
            "numpy_rng": rng.bit_generator.state,
            "torch_rng": torch.get_rng_state(),
            "train_variant": variant,
        }

    batches_per_epoch = math.ceil(n / config.batch_size)
    model.train()
    with open(log_path, "a") as log_file:
        while epoch < config.epochs and (config.max_steps is None or step < config.max_steps):
            if cursor == 0:
                order = rng.permutation(n)
            idx = order[cursor * config.batch_size : (cursor + 1) * config.batch_size]
            x, y, labels = make_batch(dataset, idx, rng, config)
            output = model(x)
            report = total_loss(output, y, labels, x, config.loss_weights, config.normalize_ce)
            if not torch.isfinite(report.total):
                raise FloatingPointError(
                    f"non-finite loss at step {step + 1} (epoch {epoch}): {report.as_dict()}"
                )
            optimizer.zero_grad()
            report.total.backward()
            optimizer.step()

            step += 1
            cursor += 1
            if cursor == batches_per_epoch:
                cursor, epoch = 0, epoch + 1
            log_file.write(json.dumps({"step": step, "epoch": epoch, **report.as_dict()}) + "\n")
            log_file.flush()
            if config.checkpoint_every and step % config.checkpoint_every == 0:
                save_checkpoint(ckpt_path, snapshot())

    save_checkpoint(ckpt_path, snapshot())
    return ckpt_path


def read_loss_log(path):
    path = Path(path)
    if path.is_dir():
        path = path / LOG_NAME
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def _pad_to(image, divisor):
    h, w = image.shape[:2]
    ph, pw = (-h) % divisor, (-w) % divisor
    if ph or pw:
        mode = "reflect" if ph < h and pw < w else "edge"
        image = np.pad(image, ((0, ph), (0, pw), (0, 0)), mode=mode)
    return image


@torch.no_grad()
def predict(model, image):
    """Alpha matte and trimap-style segmentation view for one image.

    The image is padded on the bottom/right to a multiple of 32 and the
    outputs are cropped back to the original size. The segmentation view
    is uint8 with 0 / 128 / 255 for background / transition / foreground.
    """
    if not isinstance(model, torch.nn.Module):
        model, _ = load_model(model)
    image = check_image(image, min_side=0)
    h, w = image.shape[:2]
    padded = _pad_to(image, model.config.divisor)
    was_training = model.training
    model.eval()
    x = torch.from_numpy(padded.transpose(2, 0, 1)[None].astype(np.float32))
    out = model(x)
    model.train(was_training)
    alpha = out.alpha_final[0, 0, :h, :w].double().numpy()
    classes = out.seg_probs[0, :, :h, :w].argmax(dim=0).numpy()
    seg_view = np.array([0, 128, 255], dtype=np.uint8)[classes]
    return np.clip(alpha, 0.0, 1.0), seg_view


def dataset_sad(model, dataset):
    """Summed SAD (thousands) of the model's alpha over a dataset."""
    return sum(sad(predict(model, image)[0], alpha) for _, image, alpha in dataset)
