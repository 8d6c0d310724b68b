"""Alpha matte error metrics.

SAD, Grad and Conn are reported in thousands (raw sum / 1000); MSE and MAD
are plain means. ``*_t`` variants are restricted to the trimap's
transition class.
"""

import csv
import warnings
from dataclasses import asdict, dataclass

import cv2
import numpy as np
from scipy import ndimage

from .core import transition_mask
from .validation import check_alpha, check_same_size

GRAD_SIGMA = 1.4
CONN_STEP = 0.1
CONN_MIN_DIFF = 0.15

CSV_COLUMNS = ["name", "SAD", "MSE", "MAD", "SAD-T", "MSE-T", "MAD-T", "GRAD", "CONN"]


@dataclass
class MetricReport:
    sad: float
    mse: float
    mad: float
    grad: float
    conn: float
    sad_t: float
    mse_t: float
    mad_t: float

    def as_row(self, name):
        return {
            "name": name,
            "SAD": self.sad,
            "MSE": self.mse,
            "MAD": self.mad,
            "SAD-T": self.sad_t,
            "MSE-T": self.mse_t,
            "MAD-T": self.mad_t,
            "GRAD": self.grad,
            "CONN": self.conn,
        }

    def as_dict(self):
        return asdict(self)


def _pair(pred, gt):
    pred, gt = check_alpha(pred, "pred"), check_alpha(gt, "gt")
    check_same_size(pred, gt, names=["pred", "gt"])
    return pred, gt


def _region(region, shape):
    if region is None:
        return np.ones(shape, dtype=bool)
    region = np.asarray(region, dtype=bool)
    if region.shape != shape:
        raise ValueError(f"region shape {region.shape} != {shape}")
    return region


def sad(pred, gt, region=None):
    pred, gt = _pair(pred, gt)
    region = _region(region, gt.shape)
    return float(np.abs(pred - gt)[region].sum() / 1000.0)


def mse(pred, gt, region=None):
    pred, gt = _pair(pred, gt)
    region = _region(region, gt.shape)
    if not region.any():
        return 0.0
    return float(((pred - gt) ** 2)[region].mean())


def mad(pred, gt, region=None):
    pred, gt = _pair(pred, gt)
    region = _region(region, gt.shape)
    if not region.any():
        return 0.0
    return float(np.abs(pred - gt)[region].mean())


def gaussian_derivative_kernel(sigma=GRAD_SIGMA, epsilon=1e-2):
    """x-derivative-of-Gaussian filter, unit L2 norm.

    The half width is where the Gaussian density drops to ``epsilon``, as in
    the reference gradient-error code.
    """
    half = int(np.ceil(sigma * np.sqrt(-2.0 * np.log(np.sqrt(2 * np.pi) * sigma * epsilon))))
    u = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(u**2) / (2 * sigma**2)) / (sigma * np.sqrt(2 * np.pi))
    dg = -u * g / sigma**2
    kernel = np.outer(g, dg)
    return kernel / np.sqrt((kernel**2).sum())


def gradient_magnitude(alpha, sigma=GRAD_SIGMA):
    hx = gaussian_derivative_kernel(sigma)
    gx = ndimage.convolve(alpha, hx, mode="nearest")
    gy = ndimage.convolve(alpha, hx.T, mode="nearest")
    return np.sqrt(gx**2 + gy**2)


def grad(pred, gt, sigma=GRAD_SIGMA):
    pred, gt = _pair(pred, gt)
    diff = gradient_magnitude(pred, sigma) - gradient_magnitude(gt, sigma)
    return float((diff**2).sum() / 1000.0)


def _largest_component(binary, connectivity):
    structure = ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)
    labels, n = ndimage.label(binary, structure=structure)
    if n == 0:
        return np.zeros_like(binary, dtype=bool)
    sizes = np.bincount(labels.ravel())[1:]
    return labels == (np.argmax(sizes) + 1)


def conn(pred, gt, step=CONN_STEP, connectivity=4):
    """Connectivity error.

    For each pixel, ``level`` is the last threshold at which it still
    belonged to the largest component shared by both mattes. The penalty
    compares how far each matte rises above that level (ignoring rises
    under 0.15).
    """
    pred, gt = _pair(pred, gt)
    n_steps = int(round(1.0 / step))
    thresholds = np.arange(n_steps + 1) / n_steps
    level = np.full(gt.shape, -1.0)
    for i in range(1, len(thresholds)):
        omega = _largest_component((pred >= thresholds[i]) & (gt >= thresholds[i]), connectivity)
        lost = (level == -1) & ~omega
        level[lost] = thresholds[i - 1]
    level[level == -1] = 1.0
    pred_d = pred - level
    gt_d = gt - level
    pred_phi = 1.0 - pred_d * (pred_d >= CONN_MIN_DIFF)
    gt_phi = 1.0 - gt_d * (gt_d >= CONN_MIN_DIFF)
    return float(np.abs(pred_phi - gt_phi).sum() / 1000.0)


def match_size(pred, gt_shape):
    """Resize ``pred`` bilinearly to the ground-truth size, with a warning."""
    pred = np.asarray(pred, dtype=np.float64)
    if pred.shape == tuple(gt_shape):
        return pred
    warnings.warn(
        f"resizing prediction {pred.shape} to ground truth {tuple(gt_shape)}", stacklevel=2
    )
    h, w = gt_shape
    return np.clip(cv2.resize(pred, (w, h), interpolation=cv2.INTER_LINEAR), 0.0, 1.0)


def evaluate(pred, gt, trimap=None, connectivity=4):
    """Whole-image metrics plus transition-region SAD/MSE/MAD.

    Without a trimap the transition metrics are 0.
    """
    gt = check_alpha(gt, "gt")
    pred = check_alpha(match_size(pred, gt.shape), "pred")
    if trimap is None:
        tmask = np.zeros(gt.shape, dtype=bool)
    else:
        tmask = transition_mask(trimap)
        if tmask.shape != gt.shape:
            raise ValueError(f"trimap shape {tmask.shape} != gt {gt.shape}")
    return MetricReport(
        sad=sad(pred, gt),
        mse=mse(pred, gt),
        mad=mad(pred, gt),
        grad=grad(pred, gt),
        conn=conn(pred, gt, connectivity=connectivity),
        sad_t=sad(pred, gt, tmask),
        mse_t=mse(pred, gt, tmask),
        mad_t=mad(pred, gt, tmask),
    )


def mean_report(reports):
    if not reports:
        raise ValueError("no reports to average")
    keys = asdict(reports[0]).keys()
    return MetricReport(**{k: float(np.mean([getattr(r, k) for r in reports])) for k in keys})


def write_csv(path, named_reports):
    """Write per-image rows plus a final MEAN row."""
    reports = [r for _, r in named_reports]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for name, report in named_reports:
            writer.writerow(report.as_row(name))
        writer.writerow(mean_report(reports).as_row("MEAN"))
