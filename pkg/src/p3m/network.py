"""P3M-Net: a shared encoder feeding a segmentation decoder and a matting
decoder, connected by tripartite (TFI) and bipartite (sBFI, dBFI) feature
integration blocks.

Pyramid layout for an H x W input (``channels`` default shown)::

    E0  64  x H    x W        stem, full resolution
    E1  64  x H/2  x W/2      max-pool + 3 basic blocks
    E2  128 x H/4  x W/4      max-pool + 4 basic blocks
    E3  256 x H/8  x W/8      max-pool + 6 basic blocks
    E4  512 x H/16 x W/16     max-pool + 3 basic blocks
    E5  512 x H/32 x W/32     max-pool + 2 basic blocks

Decoder level i produces maps at scale 1/2**i with the channels of E_i, so
TFI at level i can consume E_i directly and the matting decoder can unpool
with the indices recorded when E_i was pooled.
"""

from dataclasses import asdict, dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .core import FG, TRANSITION

DEPTH = 5
TFI_LEVELS = (1, 2, 3, 4)
SBFI_LEVELS = (1, 2, 3)
DBFI_LEVELS = (1, 2, 3)


@dataclass
class P3MNetConfig:
    channels: tuple = (64, 64, 128, 256, 512, 512)
    blocks: tuple = (3, 4, 6, 3, 2)
    stem_kernel: int = 7
    integration: bool = True
    dilation_radius: int = 25
    divisor: int = 32

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        self.blocks = tuple(int(b) for b in self.blocks)
        if len(self.channels) != DEPTH + 1 or len(self.blocks) != DEPTH:
            raise ValueError("channels needs 6 entries and blocks 5")
        if any(c % 2 for c in self.channels[1:5]):
            raise ValueError("decoder channels must be even for C/2 projections")
        if self.divisor != 2**DEPTH:
            raise ValueError(f"divisor must be {2 ** DEPTH}")

    def to_dict(self):
        return asdict(self)


@dataclass
class EncoderFeatures:
    maps: list  # E0 .. E5
    pool_indices: list  # indices[k] were recorded pooling E_k into level k+1

    @property
    def deepest(self):
        return self.maps[-1]


@dataclass
class P3MNetOutput:
    alpha_final: torch.Tensor  # (N, 1, H, W)
    seg_probs: torch.Tensor  # (N, 3, H, W)
    side_seg: list = field(default_factory=list)  # 3 x (N, 3, H, W), levels 1..3
    matting_detail: torch.Tensor = None  # (N, 1, H, W)


def conv_bn_relu(in_ch, out_ch, kernel=3):
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, kernel, padding=kernel // 2, bias=False),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(inplace=True),
    )


class BasicBlock(nn.Module):
    def __init__(self, in_ch, out_ch):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)
        self.shortcut = None
        if in_ch != out_ch:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, bias=False), nn.BatchNorm2d(out_ch)
            )

    def forward(self, x):
        identity = x if self.shortcut is None else self.shortcut(x)
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + identity)


class Encoder(nn.Module):
    """ResNet-34 layout where every strided stage is replaced by a 2x2 max
    pool whose argmax indices are kept for unpooling."""

    def __init__(self, config):
        super().__init__()
        ch, k = config.channels, config.stem_kernel
        self.stem = conv_bn_relu(3, ch[0], k)
        self.stages = nn.ModuleList(
            nn.Sequential(
                *[BasicBlock(ch[s] if b == 0 else ch[s + 1], ch[s + 1]) for b in range(n)]
            )
            for s, n in enumerate(config.blocks)
        )

    def forward(self, x):
        maps = [self.stem(x)]
        indices = []
        for stage in self.stages:
            pooled, idx = F.max_pool2d(maps[-1], 2, 2, return_indices=True)
            indices.append(idx)
            maps.append(stage(pooled))
        return EncoderFeatures(maps, indices)


class TFI(nn.Module):
    """Fuse matting-decoder, segmentation-decoder and encoder maps:
    C(concat(P(Fm), P(Fs), P(Fe)))."""

    def __init__(self, channels):
        super().__init__()
        half = channels // 2
        self.proj_m = nn.Conv2d(channels, half, 1)
        self.proj_s = nn.Conv2d(channels, half, 1)
        self.proj_e = nn.Conv2d(channels, half, 1)
        self.fuse = conv_bn_relu(3 * half, channels)

    def forward(self, fm, fs, fe):
        if not fm.shape == fs.shape == fe.shape:
            raise ValueError(
                f"TFI inputs must share shape, got {tuple(fm.shape)}, "
                f"{tuple(fs.shape)}, {tuple(fe.shape)}"
            )
        return self.fuse(
            torch.cat([self.proj_m(fm), self.proj_s(fs), self.proj_e(fe)], dim=1)
        )


class _BipartiteFusion(nn.Module):
    def __init__(self, channels, guide_channels):
        super().__init__()
        half = channels // 2
        self.proj_guide = nn.Conv2d(guide_channels, half, 1)
        self.proj_feat = nn.Conv2d(channels, half, 1)
        self.fuse = conv_bn_relu(2 * half, channels)

    def _residual(self, feat, guide):
        return self.fuse(torch.cat([self.proj_guide(guide), self.proj_feat(feat)], dim=1))

    def zero_(self):
        """Zero every fusion parameter, turning the block into an identity."""
        with torch.no_grad():
            for p in self.parameters():
                p.zero_()
        return self


class SBFI(_BipartiteFusion):
    """Refine a matting-decoder map with the max-pooled full-resolution
    encoder map E0: Fm + C(concat(P(MP(E0)), P(Fm)))."""

    def forward(self, fm, e0):
        ratio = e0.shape[-1] // fm.shape[-1]
        if ratio not in (2, 4, 8) or e0.shape[-2] != fm.shape[-2] * ratio:
            raise ValueError(
                f"sBFI supports scale ratios 2, 4, 8; got {tuple(e0.shape[-2:])} "
                f"-> {tuple(fm.shape[-2:])}"
            )
        return fm + self._residual(fm, F.max_pool2d(e0, ratio, ratio))


class DBFI(_BipartiteFusion):
    """Refine a segmentation-decoder map with the upsampled deepest encoder
    map: Fs + C(concat(P(UP(E_deep)), P(Fs)))."""

    def forward(self, fs, e_deep):
        ratio = fs.shape[-1] // e_deep.shape[-1]
        if ratio not in (4, 8, 16) or fs.shape[-2] != e_deep.shape[-2] * ratio:
            raise ValueError(
                f"dBFI supports feature scales 1/2, 1/4, 1/8; got deep map "
                f"{tuple(e_deep.shape[-2:])} vs {tuple(fs.shape[-2:])}"
            )
        up = F.interpolate(e_deep, scale_factor=ratio, mode="bilinear", align_corners=False)
        return fs + self._residual(fs, up)


class DecoderBlock(nn.Module):
    """Three 3x3 conv layers around a 2x upsampling step: one before it
    (changing channels) and two after it."""

    def __init__(self, in_ch, out_ch, unpool):
        super().__init__()
        self.unpool = unpool
        self.pre = conv_bn_relu(in_ch, out_ch)
        self.post = nn.Sequential(conv_bn_relu(out_ch, out_ch), conv_bn_relu(out_ch, out_ch))

    def forward(self, x, indices=None):
        x = self.pre(x)
        if self.unpool:
            x = F.max_unpool2d(x, indices, 2, 2)
        else:
            x = F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)
        return self.post(x)


class _SkipConcat(nn.Module):
    """Plain encoder skip used in place of TFI when integration is disabled."""

    def __init__(self, channels):
        super().__init__()
        self.fuse = conv_bn_relu(2 * channels, channels)

    def forward(self, fm, fs, fe):
        return self.fuse(torch.cat([fm, fe], dim=1))


class P3MNet(nn.Module):
    def __init__(self, config=None):
        super().__init__()
        self.config = config = config or P3MNetConfig()
        ch = config.channels
        self.encoder = Encoder(config)
        # decoder block k maps level k -> level k-1; stored in order k = 5 .. 1
        self.seg_blocks = nn.ModuleList(
            DecoderBlock(ch[k], ch[k - 1], unpool=False) for k in range(DEPTH, 0, -1)
        )
        self.mat_blocks = nn.ModuleList(
            DecoderBlock(ch[k], ch[k - 1], unpool=True) for k in range(DEPTH, 0, -1)
        )
        if config.integration:
            self.tfi = nn.ModuleDict({str(i): TFI(ch[i]) for i in TFI_LEVELS})
            self.sbfi = nn.ModuleDict({str(i): SBFI(ch[i], ch[0]) for i in SBFI_LEVELS})
            self.dbfi = nn.ModuleDict({str(i): DBFI(ch[i], ch[DEPTH]) for i in DBFI_LEVELS})
        else:
            self.tfi = nn.ModuleDict({str(i): _SkipConcat(ch[i]) for i in TFI_LEVELS})
            self.sbfi = nn.ModuleDict()
            self.dbfi = nn.ModuleDict()
        self.side_heads = nn.ModuleDict(
            {str(i): nn.Conv2d(ch[i], 3, 3, padding=1) for i in DBFI_LEVELS}
        )
        self.seg_head = nn.Conv2d(ch[0], 3, 3, padding=1)
        self.mat_head = nn.Conv2d(ch[0], 1, 3, padding=1)
        self.reset_parameters()

    def reset_parameters(self):
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, mode="fan_out", nonlinearity="relu")
                if m.bias is not None:
                    nn.init.zeros_(m.bias)
            elif isinstance(m, nn.BatchNorm2d):
                nn.init.ones_(m.weight)
                nn.init.zeros_(m.bias)

    def zero_fusion_(self):
        for block in list(self.sbfi.values()) + list(self.dbfi.values()):
            block.zero_()
        return self

    def encode(self, x):
        h, w = x.shape[-2:]
        div = self.config.divisor
        if h % div or w % div:
            raise ValueError(f"input size {h}x{w} must be divisible by {div}")
        return self.encoder(x)

    def forward(self, x):
        size = x.shape[-2:]
        enc = self.encode(x)
        e0, e_deep = enc.maps[0], enc.deepest

        seg_feats = {}
        side = []
        s = e_deep
        for k, block in zip(range(DEPTH, 0, -1), self.seg_blocks):
            s = block(s)
            level = k - 1
            if str(level) in self.dbfi:
                s = self.dbfi[str(level)](s, e_deep)
            if str(level) in self.side_heads:
                logits = F.interpolate(
                    self.side_heads[str(level)](s), size=size, mode="bilinear",
                    align_corners=False,
                )
                side.append(logits.softmax(dim=1))
            seg_feats[level] = s
        seg_probs = self.seg_head(s).softmax(dim=1)
        # deep supervision list is ordered by level 1, 2, 3
        side = side[::-1]

        m = e_deep
        for k, block in zip(range(DEPTH, 0, -1), self.mat_blocks):
            m = block(m, enc.pool_indices[k - 1])
            level = k - 1
            if str(level) in self.tfi:
                m = self.tfi[str(level)](m, seg_feats[level], enc.maps[level])
            if str(level) in self.sbfi:
                m = self.sbfi[str(level)](m, e0)
        detail = torch.sigmoid(self.mat_head(m))

        return P3MNetOutput(
            alpha_final=fuse_predictions(seg_probs, detail),
            seg_probs=seg_probs,
            side_seg=side,
            matting_detail=detail,
        )


def fuse_predictions(seg_probs, matting_detail):
    """Collaborative fusion: argmax class decides FG (1) and BG (0); the
    matting detail fills the transition class.

    Works on (N, 3, H, W)/(N, 1, H, W) tensors or (3, H, W)/(H, W) arrays.
    """
    if isinstance(seg_probs, torch.Tensor):
        cls = seg_probs.argmax(dim=-3, keepdim=True)
        if matting_detail.dim() == cls.dim() - 1:
            matting_detail = matting_detail.unsqueeze(-3)
        fg = (cls == FG).to(matting_detail.dtype)
        tr = (cls == TRANSITION).to(matting_detail.dtype)
        return fg + tr * matting_detail
    seg_probs = np.asarray(seg_probs)
    detail = np.asarray(matting_detail, dtype=np.float64)
    if seg_probs.shape[-2:] != detail.shape[-2:]:
        raise ValueError("seg_probs and matting_detail differ in size")
    cls = seg_probs.argmax(axis=-3)
    return np.where(cls == FG, 1.0, np.where(cls == TRANSITION, detail, 0.0))


def checkpoint_manifest(model):
    """Stable parameter/buffer name -> shape listing of a model."""
    return {name: list(t.shape) for name, t in model.state_dict().items()}
