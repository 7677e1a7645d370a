"""Command-line surface: degrade, learn-prior, superres, evaluate, sweep.

Every command echoes its resolved configuration and the tool version into
its JSON outputs, exits nonzero on error with a machine-parsable
``ERROR:<code>:`` prefix, and produces byte-identical outputs when re-run
on the same inputs. REFESR_THREADS caps parallelism; results never depend
on it.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ensemble import super_resolve
from .errors import EmptyDatasetError, InvalidParameterError, RefESRError
from .image import Image, ImageMeta, load_image, rgb_to_luma, rgb_to_ycbcr, save_image, ycbcr_to_rgb
from .metrics import compare
from .parallel import ordered_map
from .prior import (
    DEFAULT_RHO,
    PSNR_CAP_DB,
    RHO_MODES,
    build_score_table,
    read_prior,
    reference_weights,
    weight_entropy,
    write_prior,
)
from .resample import DegradationModel, add_gaussian_noise, downsample, upsample_bicubic
from .resolvers import load_resolver_config

IMAGE_SUFFIXES = (".png", ".pgm", ".ppm")


def _tool_dict() -> dict:
    return {"name": "refesr", "version": __version__}


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _list_images(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise EmptyDatasetError(f"not a directory: {directory}")
    paths = sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise EmptyDatasetError(f"no images (png/pgm/ppm) found in {directory}")
    return paths


def _load_dir(directory: Path) -> list[tuple[str, Image, ImageMeta]]:
    out = []
    for path in _list_images(directory):
        img, meta = load_image(path)
        out.append((path.stem, img, meta))
    return out


def _crop_multiple(img: Image, multiple: int) -> Image:
    ch = (img.height // multiple) * multiple
    cw = (img.width // multiple) * multiple
    if ch < 1 or cw < 1:
        raise InvalidParameterError(
            f"image {img.width}x{img.height} smaller than the crop multiple {multiple}"
        )
    if ch == img.height and cw == img.width:
        return img
    return Image(img.data[:ch, :cw])


def _luma(img: Image) -> Image:
    return rgb_to_luma(img) if img.channels == 3 else img


def _strip_scale_suffix(stem: str) -> str:
    if "_x" in stem:
        head, _, tail = stem.rpartition("_x")
        if tail.isdigit():
            return head
    return stem


def _fmt6(value: float) -> str:
    return f"{value:.6g}"


# ---------------------------------------------------------------------------
# degrade


def cmd_degrade(args) -> int:
    hr_dir, out_dir = Path(args.hr_dir), Path(args.out_dir)
    scale = args.scale
    model = DegradationModel(scale)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = {
        "command": "degrade",
        "hr_dir": str(hr_dir),
        "out_dir": str(out_dir),
        "scale": scale,
        "noise_sigma": args.noise_sigma,
        "seed": args.seed,
    }
    entries = []
    images = _load_dir(hr_dir)

    def work(item):
        index, (stem, img, meta) = item
        cropped = _crop_multiple(img, scale)
        lr = downsample(cropped, model)
        if args.noise_sigma > 0:
            lr = add_gaussian_noise(lr, args.noise_sigma, args.seed + index)
        return stem, meta, cropped, lr

    for stem, meta, cropped, lr in ordered_map(work, list(enumerate(images))):
        lr_path = out_dir / f"{stem}.png"
        save_image(lr, lr_path, bit_depth=meta.bit_depth)
        entries.append(
            {
                "stem": stem,
                "source": meta.source_path,
                "lr": lr_path.name,
                "hr_size": [cropped.width, cropped.height],
                "lr_size": [lr.width, lr.height],
                "bit_depth": meta.bit_depth,
            }
        )
        print(f"degrade {stem}: {cropped.width}x{cropped.height} -> {lr.width}x{lr.height}")
    _write_json(out_dir / "manifest.json", {"tool": _tool_dict(), "config": config, "images": entries})
    return 0


# ---------------------------------------------------------------------------
# learn-prior


def cmd_learn_prior(args) -> int:
    resolvers = load_resolver_config(args.resolvers)
    refs = [(stem, img) for stem, img, _ in _load_dir(Path(args.ref_dir))]
    table = build_score_table(refs, resolvers)
    rho, rho_mode = args.rho, args.rho_mode
    if args.rho_relative is not None:
        rho, rho_mode = args.rho_relative, "relative"
    weights = reference_weights(table, rho=rho, rho_mode=rho_mode)
    config = {
        "command": "learn-prior",
        "ref_dir": str(args.ref_dir),
        "resolvers": str(args.resolvers),
        "rho": rho,
        "rho_mode": rho_mode,
    }
    write_prior(args.out, table, weights, rho, rho_mode, config)
    for rid, w in zip(weights.resolver_ids, weights.weights):
        print(f"learn-prior {rid}: score={table.score(rid):.6g} weight={w:.6g}")
    print(f"learn-prior wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# superres


def _superres_one(lr: Image, stem: str, resolvers, model, weights, lam, self_ensemble):
    if lr.channels == 3:
        y, cb, cr = rgb_to_ycbcr(lr)
        solution = super_resolve(
            Image(y), resolvers, model, weights, lam, stem=stem, self_ensemble=self_ensemble
        )
        cb_hr = upsample_bicubic(Image(cb), model.scale).plane()
        cr_hr = upsample_bicubic(Image(cr), model.scale).plane()
        hr = ycbcr_to_rgb(solution.hr.plane(), cb_hr, cr_hr)
        return solution, hr
    solution = super_resolve(
        lr, resolvers, model, weights, lam, stem=stem, self_ensemble=self_ensemble
    )
    return solution, solution.hr


def cmd_superres(args) -> int:
    resolvers = load_resolver_config(args.resolvers)
    _, weights, _ = read_prior(args.prior)
    model = DegradationModel(args.scale)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    input_path = Path(args.input)
    if input_path.is_dir():
        inputs = [(p.stem, *load_image(p)) for p in _list_images(input_path)]
    else:
        img, meta = load_image(input_path)
        inputs = [(input_path.stem, img, meta)]
    config = {
        "command": "superres",
        "input": str(input_path),
        "prior": str(args.prior),
        "resolvers": str(args.resolvers),
        "scale": args.scale,
        "lambda": args.lam,
        "self_ensemble": args.self_ensemble,
        "out_dir": str(out_dir),
    }

    def work(item):
        stem, lr, meta = item
        solution, hr = _superres_one(
            lr, stem, resolvers, model, weights, args.lam, args.self_ensemble
        )
        return stem, meta, solution, hr

    for stem, meta, solution, hr in ordered_map(work, inputs):
        hr_path = out_dir / f"{stem}_x{args.scale}.png"
        save_image(hr, hr_path, bit_depth=meta.bit_depth)
        sidecar = {
            "tool": _tool_dict(),
            "config": config,
            "image": stem,
            "output": hr_path.name,
            "solution": solution.to_json_dict(resolvers.ids),
        }
        _write_json(out_dir / f"{stem}_x{args.scale}.json", sidecar)
        print(f"superres {stem}: -> {hr_path.name} (recon residual {solution.residual_recon:.6g})")
    return 0


# ---------------------------------------------------------------------------
# evaluate


def cmd_evaluate(args) -> int:
    gt_dir = Path(args.ground_truth)
    gt_images = {stem: img for stem, img, _ in _load_dir(gt_dir)}
    candidates = []
    for spec in args.candidate:
        if "=" not in spec:
            raise InvalidParameterError(f"--candidate wants LABEL=DIR, got {spec!r}")
        label, _, directory = spec.partition("=")
        candidates.append((label, Path(directory)))

    rows = []
    for label, directory in candidates:
        for path in _list_images(directory):
            stem = _strip_scale_suffix(path.stem)
            if stem not in gt_images:
                raise EmptyDatasetError(
                    f"candidate {path.name} (image {stem!r}) has no ground-truth match in {gt_dir}"
                )
            cand, _ = load_image(path)
            gt = gt_images[stem]
            cand_l, gt_l = _luma(cand), _luma(gt)
            if gt_l.height < cand_l.height or gt_l.width < cand_l.width:
                raise InvalidParameterError(
                    f"ground truth for {stem!r} is smaller than the candidate image"
                )
            gt_l = Image(gt_l.data[: cand_l.height, : cand_l.width])
            report = compare(cand_l, gt_l, shave=args.shave)
            rows.append({"image": stem, "resolver": label, **report.to_json_dict()})
    rows.sort(key=lambda r: (r["image"], r["resolver"]))

    header = f"{'image':<20} {'resolver':<16} {'psnr_db':>10} {'ssim':>8}"
    print(header)
    print("-" * len(header))
    for row in rows:
        p = "inf" if row["identical"] else f"{row['psnr_db']:.4f}"
        print(f"{row['image']:<20} {row['resolver']:<16} {p:>10} {row['ssim']:>8.4f}")

    config = {
        "command": "evaluate",
        "ground_truth": str(gt_dir),
        "candidates": [f"{label}={directory}" for label, directory in candidates],
        "shave": args.shave,
    }
    _write_json(Path(args.json_out), {"tool": _tool_dict(), "config": config, "rows": rows})
    return 0


# ---------------------------------------------------------------------------
# sweep


def _parse_grid(text: str, name: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise InvalidParameterError(f"{name} must be comma-separated numbers, got {text!r}") from exc
    if not values:
        raise InvalidParameterError(f"{name} grid is empty")
    return values


def cmd_sweep(args) -> int:
    resolvers = load_resolver_config(args.resolvers)
    rho_grid = _parse_grid(args.rho_grid, "--rho-grid")
    lambda_grid = _parse_grid(args.lambda_grid, "--lambda-grid")
    scale = args.scale
    model = DegradationModel(scale)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    refs = [(stem, img) for stem, img, _ in _load_dir(Path(args.ref_dir))]
    table = build_score_table(refs, resolvers)

    tests = []
    for stem, img, _ in _load_dir(Path(args.test_dir)):
        hr = _crop_multiple(_luma(img), scale)
        tests.append((stem, hr, downsample(hr, model)))

    config = {
        "command": "sweep",
        "ref_dir": str(args.ref_dir),
        "test_dir": str(args.test_dir),
        "resolvers": str(args.resolvers),
        "scale": scale,
        "rho_grid": rho_grid,
        "lambda_grid": lambda_grid,
        "rho_mode": args.rho_mode,
        "out_dir": str(out_dir),
    }

    rows = []
    per_image = []
    for rho in rho_grid:
        weights = reference_weights(table, rho=rho, rho_mode=args.rho_mode)
        for lam in lambda_grid:

            def work(item):
                stem, hr, lr = item
                solution = super_resolve(lr, resolvers, model, weights, lam, stem=stem)
                report = compare(solution.hr, hr, shave=scale)
                capped = min(report.psnr, PSNR_CAP_DB)
                return stem, capped, report.ssim, weight_entropy(solution.weights)

            results = ordered_map(work, tests)
            for stem, p, s, ent in results:
                per_image.append(
                    {"rho": rho, "lambda": lam, "image": stem, "psnr_db": p, "ssim": s, "weight_entropy": ent}
                )
            mean_psnr = sum(r[1] for r in results) / len(results)
            mean_ssim = sum(r[2] for r in results) / len(results)
            mean_ent = sum(r[3] for r in results) / len(results)
            rows.append(
                {
                    "rho": rho,
                    "lambda": lam,
                    "mean_psnr_db": mean_psnr,
                    "mean_ssim": mean_ssim,
                    "mean_weight_entropy": mean_ent,
                }
            )
            print(
                f"sweep rho={_fmt6(rho)} lambda={_fmt6(lam)}: "
                f"psnr={mean_psnr:.4f} ssim={mean_ssim:.4f} entropy={mean_ent:.4f}"
            )

    csv_lines = ["rho,lambda,mean_psnr_db,mean_ssim,mean_weight_entropy"]
    for row in rows:
        csv_lines.append(
            ",".join(
                _fmt6(row[key])
                for key in ("rho", "lambda", "mean_psnr_db", "mean_ssim", "mean_weight_entropy")
            )
        )
    (out_dir / "sweep.csv").write_text("\n".join(csv_lines) + "\n")
    _write_json(
        out_dir / "sweep.json",
        {"tool": _tool_dict(), "config": config, "rows": rows, "per_image": per_image},
    )
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refesr",
        description="Reference-guided ensemble super-resolution pipeline.",
    )
    parser.add_argument("--version", action="version", version=f"refesr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", help="generate LR images from an HR directory")
    p.add_argument("--hr-dir", required=True)
    p.add_argument("--scale", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--noise-sigma", type=float, default=0.0, help="Gaussian noise sigma on the 0-255 scale")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("learn-prior", help="score resolvers on a reference set and derive prior weights")
    p.add_argument("--ref-dir", required=True)
    p.add_argument("--resolvers", required=True, help="resolver config (JSON or TOML)")
    p.add_argument("--rho", type=float, default=DEFAULT_RHO)
    p.add_argument("--rho-mode", choices=RHO_MODES, default="relative")
    p.add_argument(
        "--rho-relative",
        type=float,
        default=None,
        help="shorthand: bandwidth as a fraction of the score range (overrides --rho/--rho-mode)",
    )
    p.add_argument("--out", required=True, help="output prior JSON path")
    p.set_defaults(func=cmd_learn_prior)

    p = sub.add_parser("superres", help="ensemble super-resolve LR images")
    p.add_argument("--input", required=True, help="LR image or directory")
    p.add_argument("--prior", required=True)
    p.add_argument("--resolvers", required=True)
    p.add_argument("--scale", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.8)
    p.add_argument("--self-ensemble", action="store_true", help="average resolvers over the 8 dihedral transforms")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_superres)

    p = sub.add_parser("evaluate", help="PSNR/SSIM of candidate images against ground truth")
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--candidate", action="append", required=True, help="LABEL=DIR, repeatable")
    p.add_argument("--shave", type=int, default=0)
    p.add_argument("--json-out", default="evaluation.json")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="grid sweep over rho and lambda")
    p.add_argument("--ref-dir", required=True)
    p.add_argument("--test-dir", required=True)
    p.add_argument("--resolvers", required=True)
    p.add_argument("--scale", type=int, required=True)
    p.add_argument("--rho-grid", required=True)
    p.add_argument("--lambda-grid", required=True)
    p.add_argument("--rho-mode", choices=RHO_MODES, default="relative")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RefESRError as exc:
        print(f"ERROR:{exc.code}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ERROR:io-failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
