"""Command-line entry point: ``blindsr {degrade,solve,eval,gaussian8,bench}``.

Exit codes: 0 success, 1 I/O or data error, 2 usage error, 3 divergence or
failed benchmark cases.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .degrade import Aniso, DegradationSpec, Iso, degrade, gaussian8, gaussian8_sigmas
from .harness import BenchmarkSpec, run_benchmark, solver_config_from_dict
from .imgcore import (ImageFormatError, KernelFormatError, center_crop, load_image,
                      read_kernel, save_image, write_kernel)
from .metrics import evaluate
from .solver import DivergenceError, run

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3

log = logging.getLogger("blindsr")


class UsageError(Exception):
    pass


def _stem_paths(output: Path):
    stem = output.with_suffix("")
    return stem.with_name(stem.name + ".kernel.txt"), stem.with_name(stem.name + ".json"), \
        stem.with_name(stem.name + ".hr.png")


def cmd_degrade(args) -> int:
    if args.setting2:
        if args.l1 is None or args.l2 is None:
            raise UsageError("--setting2 needs --l1 and --l2")
        params = Aniso(args.l1, args.l2, args.theta)
    else:
        if args.l1 is not None or args.l2 is not None:
            raise UsageError("--l1/--l2 are only valid with --setting2")
        params = Iso(args.sigma)
    try:
        spec = DegradationSpec(scale=args.scale, kernel_size=args.kernel_size, params=params,
                               noise=args.noise, seed=args.seed, boundary=args.boundary)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    hr_full = load_image(args.input)
    hr = center_crop(hr_full, args.scale)
    y, k = degrade(hr, spec)
    out = Path(args.output)
    kpath, sidecar, hrpath = _stem_paths(out)
    save_image(y, out)
    write_kernel(k, kpath)
    save_image(hr, hrpath)
    meta = {"input": str(args.input), "input_shape": list(hr_full.shape),
            "cropped_shape": list(hr.shape), "lr": str(out), "kernel": str(kpath),
            "hr": str(hrpath), "degradation": spec.to_dict()}
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out} ({y.shape[0]}x{y.shape[1]}), {kpath}, {sidecar}")
    return EXIT_OK


def _solver_config(args):
    d = {}
    if args.config:
        d = json.loads(Path(args.config).read_text(encoding="utf-8"))
    for key, val in (("stages", args.stages), ("scale", args.scale),
                     ("kernel_size", args.kernel_size), ("delta_k", args.delta_k),
                     ("delta_x", args.delta_x), ("boundary", args.boundary),
                     ("init_sigma", args.init_sigma)):
        if val is not None:
            d[key] = val
    if args.prox is not None or args.tau is not None or args.inner_iters is not None:
        prox = dict(d.get("image_prox", {}))
        if args.prox is not None:
            prox["name"] = args.prox
        if args.tau is not None:
            prox["tau"] = args.tau
        if args.inner_iters is not None:
            prox["inner_iters"] = args.inner_iters
        d["image_prox"] = prox
    try:
        return solver_config_from_dict(d)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad solver config: {exc}") from None


def cmd_solve(args) -> int:
    cfg = _solver_config(args)
    y = load_image(args.input)
    gt_x = load_image(args.gt_image) if args.gt_image else None
    gt_k = read_kernel(args.gt_kernel) if args.gt_kernel else None
    gt = (gt_x, gt_k) if (gt_x is not None or gt_k is not None) else None
    try:
        state = run(y, cfg, ground_truth=gt)
    except DivergenceError as exc:
        print(f"error: solver diverged at stage {exc.stage}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    out = Path(args.output)
    save_image(np.clip(state.x, 0.0, 1.0), out)
    kpath = Path(args.kernel_out) if args.kernel_out else out.with_suffix(".kernel.txt")
    tpath = Path(args.trace) if args.trace else out.with_suffix(".trace.csv")
    write_kernel(state.k, kpath)
    fields = ["stage", "fidelity", "kernel_change"]
    if gt_x is not None:
        fields.append("psnr")
    if gt_k is not None:
        fields.append("kernel_l1")
    with open(tpath, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in state.trace:
            writer.writerow([_fmt(row[f]) for f in fields])
    last = state.trace[-1]
    msg = f"wrote {out}, {kpath}, {tpath}; stages={state.t} fidelity={last['fidelity']:.6g}"
    if "psnr" in last:
        msg += f" psnr={_fmt(last['psnr'])}"
    if "kernel_l1" in last:
        msg += f" kernel_l1={last['kernel_l1']:.6g}"
    print(msg)
    return EXIT_OK


def _fmt(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def cmd_eval(args) -> int:
    sr = load_image(args.sr)
    gt = load_image(args.gt)
    k_est = read_kernel(args.k_est) if args.k_est else None
    k_gt = read_kernel(args.k_gt) if args.k_gt else None
    report = evaluate(sr, gt, border=args.border, k_est=k_est, k_gt=k_gt)
    text = report.to_csv()
    sys.stdout.write(text)
    if args.csv:
        Path(args.csv).write_text(text, encoding="utf-8")
    if args.json:
        Path(args.json).write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_gaussian8(args) -> int:
    try:
        sigmas = gaussian8_sigmas(args.scale)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    kernels = gaussian8(args.scale, args.kernel_size)
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        for i, k in enumerate(kernels):
            write_kernel(k, out / f"gaussian8_x{args.scale}_{i}.txt")
    for i, sig in enumerate(sigmas):
        print(f"{i} {sig:.6f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    d = {}
    if args.config:
        d = json.loads(Path(args.config).read_text(encoding="utf-8"))
    for key, val in (("images", args.images), ("setting", args.setting), ("scale", args.scale),
                     ("noise_levels", args.noise), ("out_dir", args.out),
                     ("master_seed", args.seed), ("workers", args.workers),
                     ("border", args.border), ("kernel_size", args.kernel_size)):
        if val is not None:
            d[key] = val
    if args.kernel_files:
        d["kernels"] = args.kernel_files
    solver = dict(d.get("solver", {}))
    if args.stages is not None:
        solver["stages"] = args.stages
    if args.prox is not None:
        solver.setdefault("image_prox", {})["name"] = args.prox
    if args.tau is not None:
        solver.setdefault("image_prox", {})["tau"] = args.tau
    d["solver"] = solver
    try:
        spec = BenchmarkSpec.from_dict(d)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad benchmark config: {exc}") from None
    result = run_benchmark(spec)
    for row in result["summary"]:
        print(f"{row['method']:<45s} x{row['scale']} noise={row['noise']:g} "
              f"PSNR={row['psnr']:.2f} SSIM={row['ssim']:.4f} ({row['cases']} cases)")
    if result["failed"]:
        print(f"error: {result['failed']} case(s) failed", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _add_solver_flags(p):
    p.add_argument("--config", help="JSON solver config; flags override its values")
    p.add_argument("--stages", type=int)
    p.add_argument("--delta-k", type=float, help="fixed kernel step (default: backtracking)")
    p.add_argument("--delta-x", type=float, help="fixed image step (default: backtracking)")
    p.add_argument("--prox", choices=["identity", "tikhonov", "tv"])
    p.add_argument("--tau", type=float)
    p.add_argument("--inner-iters", type=int)
    p.add_argument("--init-sigma", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blindsr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", help="synthesize an LR observation from an HR image")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="LR image path (.png/.pgm/.ppm)")
    p.add_argument("--scale", type=int, default=2)
    p.add_argument("--kernel-size", type=int, default=21)
    p.add_argument("--sigma", type=float, default=1.2, help="isotropic kernel width")
    p.add_argument("--setting2", action="store_true", help="anisotropic kernel from --l1/--l2/--theta")
    p.add_argument("--l1", type=float)
    p.add_argument("--l2", type=float)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.0, help="noise level on the 0-255 scale")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--boundary", choices=["replicate", "circular", "zero"], default="replicate")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("solve", help="estimate kernel and HR image from an LR image")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="SR image path")
    p.add_argument("--kernel-out")
    p.add_argument("--trace", help="per-stage trace CSV path")
    p.add_argument("--scale", type=int)
    p.add_argument("--kernel-size", type=int)
    p.add_argument("--boundary", choices=["replicate", "circular", "zero"])
    p.add_argument("--gt-image")
    p.add_argument("--gt-kernel")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="PSNR/SSIM (luma) of an SR image against ground truth")
    p.add_argument("sr")
    p.add_argument("gt")
    p.add_argument("--border", type=int, default=0)
    p.add_argument("--k-est")
    p.add_argument("--k-gt")
    p.add_argument("--csv")
    p.add_argument("--json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gaussian8", help="list or write the Gaussian8 kernels for a scale")
    p.add_argument("--scale", type=int, default=2)
    p.add_argument("--kernel-size", type=int, default=21)
    p.add_argument("-o", "--output", help="directory for kernel files")
    p.set_defaults(func=cmd_gaussian8)

    p = sub.add_parser("bench", help="run the synthetic benchmark")
    p.add_argument("--config", help="JSON benchmark config; flags override its values")
    p.add_argument("--images", help="directory of HR images (default: built-in charts)")
    p.add_argument("--setting", choices=["setting1", "setting2"])
    p.add_argument("--scale", type=int)
    p.add_argument("--noise", type=float, nargs="+")
    p.add_argument("--kernel-files", nargs="+")
    p.add_argument("--kernel-size", type=int)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--border", type=int)
    p.add_argument("--stages", type=int)
    p.add_argument("--prox", choices=["identity", "tikhonov", "tv"])
    p.add_argument("--tau", type=float)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits on --help (0) and on bad flags (2); return the code
        # so that main() is callable in-process.
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ImageFormatError, KernelFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
