"""Training losses for P3M-Net.

Tensors follow the (N, C, H, W) layout; alpha-like inputs are (N, 1, H, W).
All distances are L1 averaged over the pixels of the given region, and a
loss over an empty region is exactly 0.
"""

from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

from .core import TRANSITION

PROB_CLAMP = 1e-8
LAPLACIAN_LEVELS = 5

_BINOMIAL = torch.tensor([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


@dataclass
class LossWeights:
    lambda_m: float = 2.0
    lambda_s: float = 1.0 / 6.0
    lambda_f: float = 1.0

    def __post_init__(self):
        if min(self.lambda_m, self.lambda_s, self.lambda_f) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class LossReport:
    alpha_m: torch.Tensor
    lap_m: torch.Tensor
    ce_side: list = field(default_factory=list)
    ce_seg: torch.Tensor = None
    alpha: torch.Tensor = None
    lap: torch.Tensor = None
    comp: torch.Tensor = None
    total: torch.Tensor = None

    def as_dict(self):
        row = {"alpha_m": _scalar(self.alpha_m), "lap_m": _scalar(self.lap_m)}
        for i, term in enumerate(self.ce_side, start=1):
            row[f"ce_side{i}"] = _scalar(term)
        row.update(
            ce_seg=_scalar(self.ce_seg),
            alpha=_scalar(self.alpha),
            lap=_scalar(self.lap),
            comp=_scalar(self.comp),
            total=_scalar(self.total),
        )
        return row


def _scalar(t):
    return float(t.detach()) if isinstance(t, torch.Tensor) else float(t)


def _as_nchw(t):
    t = torch.as_tensor(t)
    if t.dim() == 2:
        return t[None, None]
    if t.dim() == 3:
        return t[None]
    return t


def _region(region, like):
    if region is None:
        return None
    region = _as_nchw(region).to(like.dtype)
    if region.shape[-2:] != like.shape[-2:]:
        raise ValueError(f"region size {tuple(region.shape[-2:])} != {tuple(like.shape[-2:])}")
    return region.expand_as(like)


def _check_pair(pred, gt):
    if pred.shape != gt.shape:
        raise ValueError(f"size mismatch: pred {tuple(pred.shape)} vs gt {tuple(gt.shape)}")


def alpha_loss(pred, gt, region=None):
    """Mean absolute alpha error over ``region`` (whole image if None)."""
    pred, gt = _as_nchw(pred), _as_nchw(gt).to(pred.dtype)
    _check_pair(pred, gt)
    diff = (pred - gt).abs()
    region = _region(region, diff)
    if region is None:
        return diff.mean()
    count = region.sum()
    if count == 0:
        return diff.sum() * 0.0
    return (diff * region).sum() / count


def _blur(x):
    k = _BINOMIAL.to(x.dtype)
    c = x.shape[1]
    x = F.pad(x, (2, 2, 2, 2), mode="replicate")
    x = F.conv2d(x, k.view(1, 1, 1, 5).repeat(c, 1, 1, 1), groups=c)
    return F.conv2d(x, k.view(1, 1, 5, 1).repeat(c, 1, 1, 1), groups=c)


def _down(x):
    return _blur(x)[..., ::2, ::2]


def _up(x):
    return _blur(x.repeat_interleave(2, dim=-2).repeat_interleave(2, dim=-1))


def laplacian_pyramid(x, levels=LAPLACIAN_LEVELS):
    """``levels`` band-pass maps followed by the low-pass residual."""
    bands = []
    current = x
    for _ in range(levels):
        low = _down(current)
        bands.append(current - _up(low))
        current = low
    bands.append(current)
    return bands


def laplacian_loss(pred, gt, region=None, levels=LAPLACIAN_LEVELS):
    """L1 distance between Laplacian pyramids of the masked mattes.

    Level l (the residual being level ``levels``) is weighted by 2**l and
    averaged over the region's pixel count at that level's resolution.
    """
    pred, gt = _as_nchw(pred), _as_nchw(gt).to(pred.dtype)
    _check_pair(pred, gt)
    h, w = pred.shape[-2:]
    if h % 2**levels or w % 2**levels:
        raise ValueError(f"size {h}x{w} must be divisible by {2 ** levels}")
    region = _region(region, pred)
    if region is None:
        count = pred.new_tensor(float(pred.numel()))
    else:
        count = region.sum()
        if count == 0:
            return pred.sum() * 0.0
        pred, gt = pred * region, gt * region
    loss = pred.new_zeros(())
    for level, (a, b) in enumerate(zip(laplacian_pyramid(pred, levels), laplacian_pyramid(gt, levels))):
        loss = loss + 2.0**level * (a - b).abs().sum() * 4.0**level / count
    return loss


def composition_loss(pred, gt, image):
    """Mean absolute difference between pred * image and gt * image.

    Natural training photos have no separate foreground/background plates,
    so the alpha-weighted foreground stands in for the composite.
    """
    pred, gt = _as_nchw(pred), _as_nchw(gt).to(pred.dtype)
    _check_pair(pred, gt)
    image = torch.as_tensor(image).to(pred.dtype)
    if image.dim() == 3:
        image = image.permute(2, 0, 1)[None] if image.shape[-1] == 3 else image[None]
    if image.shape[-2:] != pred.shape[-2:]:
        raise ValueError(f"image size {tuple(image.shape[-2:])} != {tuple(pred.shape[-2:])}")
    return (pred * image - gt * image).abs().mean()


def one_hot_labels(labels, dtype=torch.float32):
    labels = torch.as_tensor(labels).long()
    if labels.dim() == 2:
        labels = labels[None]
    return F.one_hot(labels, 3).permute(0, 3, 1, 2).to(dtype)


def cross_entropy_loss(probs, target, normalize=True, validate=True):
    """Cross-entropy between per-pixel class probabilities and a trimap.

    ``target`` is either a (N, 3, H, W) one-hot array or (N, H, W) labels.
    With ``normalize`` the pixel sum is divided by the number of pixels;
    without it the raw sum is returned. ``validate`` checks that ``probs``
    sums to 1 per pixel.
    """
    probs = _as_nchw(probs)
    if probs.shape[-3] != 3:
        raise ValueError(f"probs must have 3 channels, got {tuple(probs.shape)}")
    if validate:
        if (probs < 0).any() or not torch.allclose(
            probs.detach().sum(dim=-3), torch.ones((), dtype=probs.dtype), atol=1e-4
        ):
            raise ValueError("probs must be a per-pixel probability simplex")
    target = torch.as_tensor(target)
    if not target.is_floating_point():
        target = one_hot_labels(target, probs.dtype)
    target = _as_nchw(target).to(probs.dtype)
    if target.shape != probs.shape:
        raise ValueError(f"target shape {tuple(target.shape)} != probs {tuple(probs.shape)}")
    total = -(target * probs.clamp_min(PROB_CLAMP).log()).sum()
    if normalize:
        n, _, h, w = probs.shape
        total = total / (n * h * w)
    return total


def total_loss(output, gt_alpha, trimap_labels, image, weights=None, normalize_ce=True):
    """Weighted sum of every training term.

    lambda_m * (matting alpha + matting laplacian, transition region only)
    + lambda_s * (sum of side CE + 3 * final CE)
    + lambda_f * (2 * alpha + 2 * laplacian + composition, whole image).
    """
    w = weights or LossWeights()
    if len(output.side_seg) != 3:
        raise ValueError(f"expected 3 side segmentation maps, got {len(output.side_seg)}")
    labels = torch.as_tensor(trimap_labels)
    if labels.dim() == 2:
        labels = labels[None]
    region = (labels == TRANSITION)[:, None]
    gt = _as_nchw(gt_alpha)

    alpha_m = alpha_loss(output.matting_detail, gt, region)
    lap_m = laplacian_loss(output.matting_detail, gt, region)
    ce_side = [cross_entropy_loss(p, labels, normalize_ce) for p in output.side_seg]
    ce_seg = cross_entropy_loss(output.seg_probs, labels, normalize_ce)
    a = alpha_loss(output.alpha_final, gt)
    lap = laplacian_loss(output.alpha_final, gt)
    comp = composition_loss(output.alpha_final, gt, image)

    total = (
        w.lambda_m * (alpha_m + lap_m)
        + w.lambda_s * (sum(ce_side) + 3.0 * ce_seg)
        + w.lambda_f * (2.0 * a + 2.0 * lap + comp)
    )
    return LossReport(alpha_m, lap_m, ce_side, ce_seg, a, lap, comp, total)
