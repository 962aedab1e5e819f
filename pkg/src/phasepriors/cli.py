"""Command-line interface: reconstruct, sweep, verify."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import SweepSpec, load_image, run_instance, run_sweep


def _add_common(parser):
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON config; explicit flags override its fields")
    parser.add_argument("--bridge", default=None,
                        help="bridge endpoint: cmd:<command> or socket:[host:]port")
    parser.add_argument("--out", type=Path, default=Path("results"),
                        help="output directory")


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fp:
        return json.load(fp)


def _cmd_reconstruct(args) -> int:
    cfg = _load_config(args.config)
    image = args.image or cfg.get("image")
    if image is None:
        print("reconstruct: an --image is required", file=sys.stderr)
        return 2
    method = args.method or cfg.get("method", "tv")
    alpha = args.alpha if args.alpha is not None else cfg.get("alpha", 1.0)
    sigma_n = args.sigma_n if args.sigma_n is not None else cfg.get("sigma_n", 0.0)
    seed = args.seed if args.seed is not None else cfg.get("seed", 101)
    crop = args.size if args.size is not None else cfg.get("crop_size", 64)

    plane = load_image(image, crop)
    report = run_instance(
        plane,
        image_id=Path(image).stem,
        method=method,
        alpha=alpha,
        sigma_n=sigma_n,
        diffuser_seed=seed,
        solver_overrides=cfg.get("solver", {}),
        bridge_endpoint=args.bridge,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    out_path = args.out / f"{report.image_id}_{method}_seed{seed}.json"
    report.save(out_path)
    print(f"psnr_db={report.psnr_db:.3f} cosine={report.cosine:.6f} "
          f"iters={report.trace_summary['iterations']} -> {out_path}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    images = [str(p) for p in args.images] or cfg.get("images", [])
    if not images:
        print("sweep: at least one image is required", file=sys.stderr)
        return 2
    spec = SweepSpec(
        images=images,
        method=args.method or cfg.get("method", "tv"),
        alphas=args.alphas or cfg.get("alphas", [1.0]),
        noise_levels=args.sigma_n or cfg.get("noise_levels", [0.0]),
        diffuser_seeds=args.seeds or cfg.get("diffuser_seeds", [101, 202, 303]),
        crop_size=args.size if args.size is not None else cfg.get("crop_size", 64),
        solver=cfg.get("solver", {}),
    )
    reports = run_sweep(
        spec,
        args.out,
        sequential=args.sequential,
        bridge_endpoint=args.bridge,
    )
    print(f"{len(reports)} runs finished; CSVs in {args.out}")
    return 0


def _cmd_verify(args) -> int:
    from .verify import run_property_suites

    failures = run_property_suites(seed=args.seed)
    print(f"{len(_checks()) - failures}/{len(_checks())} checks passed")
    return 1 if failures else 0


def _checks():
    from .verify import CHECKS

    return CHECKS


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="phasepriors",
        description="Phase retrieval from diffused Fourier amplitudes with image priors",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    rec = sub.add_parser("reconstruct", help="reconstruct a single instance")
    rec.add_argument("--image", type=Path)
    rec.add_argument("--method", choices=["tv", "continuation-plugin", "pnp", "plain-gd"])
    rec.add_argument("--alpha", type=float)
    rec.add_argument("--sigma-n", dest="sigma_n", type=float)
    rec.add_argument("--seed", type=int)
    rec.add_argument("--size", type=int)
    _add_common(rec)
    rec.set_defaults(fn=_cmd_reconstruct)

    sw = sub.add_parser("sweep", help="run a benchmark grid")
    sw.add_argument("--images", type=Path, nargs="*", default=[])
    sw.add_argument("--method", choices=["tv", "continuation-plugin", "pnp", "plain-gd"])
    sw.add_argument("--alphas", type=float, nargs="*")
    sw.add_argument("--sigma-n", dest="sigma_n", type=float, nargs="*")
    sw.add_argument("--seeds", type=int, nargs="*")
    sw.add_argument("--size", type=int)
    sw.add_argument("--sequential", action="store_true",
                    help="fixed order, zeroed wall-clock columns, byte-identical CSVs")
    _add_common(sw)
    sw.set_defaults(fn=_cmd_sweep)

    ver = sub.add_parser("verify", help="run the property suites")
    ver.add_argument("--seed", type=int, default=7)
    ver.set_defaults(fn=_cmd_verify)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
