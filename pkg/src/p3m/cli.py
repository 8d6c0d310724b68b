"""Command line entry point: ``p3m <subcommand> ...``."""

import argparse
import logging
import sys
from pathlib import Path

import cv2
import numpy as np
import torch

from . import io
from .anonymize import DEFAULT_FEATHER, anonymize, load_landmarks
from .core import DEFAULT_DILATION_RADIUS, generate_trimap
from .data import VARIANTS, SPLITS, build_manifest, load_manifest
from .metrics import evaluate, write_csv
from .protocol import run_protocol
from .training import DESK_PRESET, TrainConfig, load_model, predict, train

log = logging.getLogger("p3m")


def _pair_by_stem(primary, other, suffixes=None):
    """Map each file in ``primary`` to the same-stem file under ``other``."""
    files = io.list_images(primary)
    if other is None:
        return {f: None for f in files}
    other = Path(other)
    if other.is_file():
        if len(files) != 1:
            raise SystemExit(f"{other} is a single file but {primary} holds {len(files)} images")
        return {files[0]: other}
    candidates = {}
    for p in sorted(other.iterdir()):
        if suffixes is None or p.suffix.lower() in suffixes:
            candidates.setdefault(p.stem, p)
    missing = [f.name for f in files if f.stem not in candidates]
    if missing:
        raise SystemExit(f"no match in {other} for {missing[:5]}")
    return {f: candidates[f.stem] for f in files}


def cmd_anonymize(args):
    images = io.list_images(args.image)
    landmarks = _pair_by_stem(args.image, args.landmarks, (".txt", ".json"))
    alphas = _pair_by_stem(args.image, args.alpha)
    masks = _pair_by_stem(args.image, args.mask)
    out = Path(args.out)
    for path in images:
        rgb = cv2.cvtColor(cv2.imread(str(path), cv2.IMREAD_COLOR), cv2.COLOR_BGR2RGB)
        alpha = io.read_alpha(alphas[path])
        mask = io.read_mask(masks[path]) if masks[path] else None
        lms = load_landmarks(landmarks[path]) if landmarks[path] else None
        blurred, adjusted = anonymize(rgb, lms, alpha, args.sigma, args.feather, mask)
        io.write_image(out / f"{path.stem}.png", blurred)
        io.write_mask(out / "masks" / f"{path.stem}.png", adjusted)
        log.info("%s: blurred %d pixels", path.name, int(adjusted.sum()))


def cmd_trimap(args):
    for path in io.list_images(args.alpha):
        trimap = generate_trimap(io.read_alpha(path), args.radius)
        io.write_trimap(Path(args.out) / f"{path.stem}.png", trimap)


def cmd_manifest(args):
    manifest = build_manifest(args.images, args.alphas, args.split, args.variant,
                              args.trimaps, args.landmarks, args.masks)
    manifest.validate()
    manifest.save(args.out)
    log.info("wrote %d records to %s", len(manifest), args.out)


def cmd_train(args):
    overrides = dict(DESK_PRESET) if args.desk else {}
    overrides.update(
        seed=args.seed, epochs=args.epochs, max_steps=args.max_steps, lr=args.lr,
        batch_size=args.batch_size, subset=args.subset,
    )
    config = TrainConfig.from_file(args.config, **overrides)
    manifest = load_manifest(args.manifest)
    log.info("config hash %s", config.config_hash)
    path = train(manifest, config, args.out, resume=args.resume)
    log.info("checkpoint written to %s", path)


def cmd_predict(args):
    model, _ = load_model(args.checkpoint)
    out = Path(args.out)
    for path in io.list_images(args.image):
        alpha, seg = predict(model, io.read_image(path))
        io.write_alpha(out / f"{path.stem}.png", alpha)
        io.write_alpha(out / "seg" / f"{path.stem}.png", seg)


def cmd_eval(args):
    train_manifest = load_manifest(args.train_manifest, validate=False) if args.train_manifest else None
    test_manifest = load_manifest(args.test_manifest)
    result = run_protocol(train_manifest, test_manifest, args.protocol, args.checkpoint, args.out)
    mean = result.mean
    print(f"{result.protocol}: SAD {mean.sad:.4f} MSE {mean.mse:.5f} MAD {mean.mad:.5f}")


def cmd_metrics(args):
    gts = _pair_by_stem(args.pred, args.gt)
    trimaps = _pair_by_stem(args.pred, args.trimap)
    rows = []
    for pred_path, gt_path in gts.items():
        gt = io.read_alpha(gt_path)
        if trimaps[pred_path]:
            trimap = io.read_trimap(trimaps[pred_path])
        else:
            trimap = generate_trimap(gt, args.radius)
        rows.append((pred_path.stem, evaluate(io.read_alpha(pred_path), gt, trimap)))
    write_csv(args.out, rows)


def build_parser():
    parser = argparse.ArgumentParser(prog="p3m", description="Privacy-preserving portrait matting")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("anonymize", help="blur faces outside the matte transition")
    p.add_argument("--image", required=True)
    p.add_argument("--landmarks")
    p.add_argument("--alpha", required=True)
    p.add_argument("--mask", help="manual face mask(s), bypassing landmarks")
    p.add_argument("--sigma", type=float)
    p.add_argument("--feather", type=int, default=DEFAULT_FEATHER)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_anonymize)

    p = sub.add_parser("trimap", help="generate trimaps from alpha mattes")
    p.add_argument("--alpha", required=True)
    p.add_argument("--radius", type=int, default=DEFAULT_DILATION_RADIUS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_trimap)

    p = sub.add_parser("manifest", help="pair image/alpha directories into a manifest CSV")
    p.add_argument("--images", required=True)
    p.add_argument("--alphas", required=True)
    p.add_argument("--trimaps")
    p.add_argument("--landmarks")
    p.add_argument("--masks")
    p.add_argument("--split", choices=SPLITS, default="train")
    p.add_argument("--variant", choices=VARIANTS, default="blurred")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_manifest)

    p = sub.add_parser("train", help="train P3M-Net")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--subset", type=int)
    p.add_argument("--desk", action="store_true", help="small preset: 2 epochs, 64 images")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict alpha mattes")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="run one B/N train/test protocol")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--train-manifest")
    p.add_argument("--test-manifest", required=True)
    p.add_argument("--protocol", required=True, help="B:B, B:N, N:B or N:N")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("metrics", help="score predicted mattes against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--trimap")
    p.add_argument("--radius", type=int, default=DEFAULT_DILATION_RADIUS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    seed = getattr(args, "seed", None)
    if seed is not None:
        np.random.seed(seed)
        torch.manual_seed(seed)
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
