"""The four train/test protocols: B:B, B:N, N:B and N:N.

B stands for face-blurred images and N for normal ones. The first letter is
the training variant, the second the test variant.
"""

from dataclasses import dataclass
from pathlib import Path

from . import io
from .core import generate_trimap
from .metrics import evaluate, mean_report, write_csv
from .training import load_checkpoint, load_model, predict

VARIANT_CODES = {"B": "blurred", "N": "normal"}


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class Protocol:
    train_variant: str
    test_variant: str

    def __post_init__(self):
        for v in (self.train_variant, self.test_variant):
            if v not in VARIANT_CODES:
                raise ProtocolError(f"protocol variants must be 'B' or 'N', got {v!r}")

    @property
    def id(self):
        return f"{self.train_variant}:{self.test_variant}"

    @classmethod
    def parse(cls, text):
        parts = text.upper().replace("-", ":").split(":")
        if len(parts) != 2:
            raise ProtocolError(f"protocol must look like 'B:N', got {text!r}")
        return cls(*parts)


ALL_PROTOCOLS = tuple(Protocol(a, b) for a in "BN" for b in "BN")


@dataclass
class ProtocolResult:
    protocol: str
    rows: list  # (name, MetricReport)

    @property
    def mean(self):
        return mean_report([r for _, r in self.rows])

    def to_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_csv(path, self.rows)
        return path


def check_protocol(train_manifest, test_manifest, protocol, train_variant=None):
    expected_train = VARIANT_CODES[protocol.train_variant]
    expected_test = VARIANT_CODES[protocol.test_variant]
    if train_manifest is not None and train_manifest.variant != expected_train:
        raise ProtocolError(
            f"protocol {protocol.id} trains on {expected_train} images but the "
            f"training manifest is {train_manifest.variant!r}"
        )
    if train_variant is not None and train_variant != expected_train:
        raise ProtocolError(
            f"protocol {protocol.id} needs a model trained on {expected_train} "
            f"images, checkpoint was trained on {train_variant!r}"
        )
    if test_manifest.variant != expected_test:
        raise ProtocolError(
            f"protocol {protocol.id} tests on {expected_test} images but the "
            f"test manifest is {test_manifest.variant!r}"
        )


def run_protocol(train_manifest, test_manifest, protocol, checkpoint, out_csv=None):
    """Evaluate a trained checkpoint on ``test_manifest`` under ``protocol``.

    Raises ``ProtocolError`` when either manifest (or the variant recorded in
    the checkpoint) disagrees with the protocol.
    """
    if isinstance(protocol, str):
        protocol = Protocol.parse(protocol)
    state = load_checkpoint(checkpoint)
    check_protocol(train_manifest, test_manifest, protocol, state.get("train_variant"))
    model, config = load_model(state)

    rows = []
    for rec in test_manifest.records:
        image, gt = io.read_image(rec.image), io.read_alpha(rec.alpha)
        if rec.trimap:
            trimap = io.read_trimap(rec.trimap)
        else:
            trimap = generate_trimap(gt, config.network.dilation_radius)
        alpha, _ = predict(model, image)
        rows.append((rec.name, evaluate(alpha, gt, trimap)))
    result = ProtocolResult(protocol.id, rows)
    if out_csv is not None:
        result.to_csv(out_csv)
    return result
