"""Batch benchmark over images x kernels x noise levels, and config-file handling.

Every case degrades a (centre-cropped) HR image with a per-case seed derived
from the master seed and the case indices, runs the solver and the bicubic
baseline, and scores both on the luma channel. Output files are a pure
function of the inputs, the spec and the master seed.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

import numpy as np

from . import charts
from .degrade import (DegradationSpec, Iso, SETTING2_KERNEL_SIZE, add_awgn, convolve2d,
                      degrade, downsample, gaussian8_sigmas, setting2_kernels)
from .imgcore import bicubic_resize, center_crop, load_image, read_kernel
from .metrics import kernel_l1, psnr, ssim
from .prox import make_image_prox
from .solver import DivergenceError, SolverConfig, run

__all__ = [
    "BenchmarkSpec",
    "case_seed",
    "solver_config_from_dict",
    "solver_config_to_dict",
    "load_images",
    "kernel_set",
    "run_benchmark",
    "calibrate_bicubic",
    "worker_count",
]

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".pgm", ".ppm")
DEFAULT_NOISE = {"setting1": [0.0], "setting2": [0.0, 15.0]}

CASE_FIELDS = [
    "image", "kernel", "kernel_desc", "noise", "seed", "status",
    "bicubic_psnr", "bicubic_ssim", "psnr", "ssim", "kernel_l1_init", "kernel_l1",
]
SUMMARY_FIELDS = ["method", "setting", "scale", "noise", "cases", "psnr", "ssim"]


def solver_config_to_dict(cfg: SolverConfig) -> dict:
    d = asdict(cfg)
    d["image_prox"] = {"name": cfg.image_prox.name, **cfg.image_prox.params()}
    return d


def solver_config_from_dict(d: dict, base: Optional[SolverConfig] = None) -> SolverConfig:
    """Build a :class:`SolverConfig` from a JSON-style dict layered over ``base``."""
    merged = solver_config_to_dict(base or SolverConfig())
    unknown = set(d) - set(merged)
    if unknown:
        raise ValueError(f"unknown solver config keys: {sorted(unknown)}")
    merged.update({k: v for k, v in d.items() if k != "image_prox"})
    prox = dict(merged["image_prox"])
    prox.update(d.get("image_prox", {}))
    merged["image_prox"] = make_image_prox(prox.get("name", "identity"),
                                           prox.get("tau", 0.0), prox.get("inner_iters", 50))
    return SolverConfig(**merged)


@dataclass
class BenchmarkSpec:
    """What to run. ``images=None`` uses the built-in procedural charts.

    ``kernels`` is ``"gaussian8"``, ``"setting2"`` or a list of kernel file
    paths. ``kernel_size=None`` picks 21 for Gaussian8 and 11/15/21 for the
    setting-2 grid at x2/x3/x4.
    """

    images: Optional[str] = None
    setting: str = "setting1"
    scale: int = 2
    noise_levels: Optional[list] = None
    kernels: object = None
    kernel_size: Optional[int] = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    out_dir: str = "bench_out"
    master_seed: int = 0
    workers: int = 1
    border: Optional[int] = None
    chart_size: int = 64

    def __post_init__(self):
        if self.setting not in ("setting1", "setting2"):
            raise ValueError(f"unknown setting {self.setting!r}")
        if self.noise_levels is None:
            self.noise_levels = list(DEFAULT_NOISE[self.setting])
        if self.kernels is None:
            self.kernels = "gaussian8" if self.setting == "setting1" else "setting2"
        if self.kernel_size is None:
            self.kernel_size = 21 if self.kernels == "gaussian8" else SETTING2_KERNEL_SIZE.get(self.scale, 21)
        if self.border is None:
            self.border = self.scale

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkSpec":
        d = dict(d)
        solver = solver_config_from_dict(d.pop("solver", {}))
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown benchmark config keys: {sorted(unknown)}")
        return cls(solver=solver, **d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["solver"] = solver_config_to_dict(self.solver)
        return d


def case_seed(master: int, image_idx: int, kernel_idx: int, noise_idx: int) -> int:
    """Stable 63-bit seed for one case; independent of how many cases exist."""
    ss = np.random.SeedSequence([int(master), int(image_idx), int(kernel_idx), int(noise_idx)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def worker_count(default: int = 1) -> int:
    env = os.environ.get("KX_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"KX_THREADS must be an integer, got {env!r}") from None
        return max(1, n)
    return max(1, int(default))


def load_images(spec: BenchmarkSpec) -> list:
    """``[(name, hr_image)]`` sorted by name, cropped to multiples of the scale."""
    if spec.images is None:
        items = sorted(charts.builtin_charts(spec.chart_size).items())
    else:
        root = Path(spec.images)
        files = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        items = [(p.name, load_image(p)) for p in files]
    if not items:
        raise ValueError(f"no images found in {spec.images!r}")
    return [(name, center_crop(img, spec.scale)) for name, img in items]


def kernel_set(spec: BenchmarkSpec) -> list:
    """``[(description, params_or_None, kernel)]`` for the spec's kernel source."""
    p = spec.kernel_size
    if spec.kernels == "gaussian8":
        return [(f"iso sigma={sig:.4f}", Iso(float(sig)), None) for sig in gaussian8_sigmas(spec.scale)]
    if spec.kernels == "setting2":
        return [(f"aniso l1={pr.l1} l2={pr.l2} theta={pr.theta:.4f}", pr, None)
                for pr, _ in setting2_kernels(spec.scale, p)]
    out = []
    for path in spec.kernels:
        k = read_kernel(path)
        out.append((f"file {Path(path).name}", None, k))
    return out


def _degrade_case(hr, desc, params, k_file, spec, noise, seed):
    if params is not None:
        dspec = DegradationSpec(scale=spec.scale, kernel_size=spec.kernel_size, params=params,
                                noise=noise, seed=seed, boundary=spec.solver.boundary)
        return degrade(hr, dspec)
    # Explicit kernel files bypass the Gaussian generator.
    y = add_awgn(downsample(convolve2d(hr, k_file, spec.solver.boundary), spec.scale), noise, seed)
    return y, k_file


def _run_case(spec: BenchmarkSpec, case):
    (ii, name, hr), (ki, desc, params, k_file), (ni, noise) = case
    seed = case_seed(spec.master_seed, ii, ki, ni)
    y, k_gt = _degrade_case(hr, desc, params, k_file, spec, noise, seed)
    s, border = spec.scale, spec.border
    bic = bicubic_resize(y, hr.shape[0], hr.shape[1])
    row = {"image": name, "kernel": ki, "kernel_desc": desc, "noise": noise, "seed": seed,
           "bicubic_psnr": psnr(bic, hr, border), "bicubic_ssim": ssim(bic, hr, border)}
    cfg = solver_config_from_dict({"scale": s, "kernel_size": k_gt.shape[0]}, spec.solver)
    try:
        state = run(y, cfg, ground_truth=(None, k_gt))
    except DivergenceError as exc:
        log.warning("case %s/%d/%s diverged: %s", name, ki, noise, exc)
        row.update(status=f"diverged at stage {exc.stage}", psnr=math.nan, ssim=math.nan,
                   kernel_l1_init=math.nan, kernel_l1=math.nan)
        return row
    row.update(status="ok", psnr=psnr(state.x, hr, border), ssim=ssim(state.x, hr, border),
               kernel_l1_init=state.trace[0]["kernel_l1"], kernel_l1=state.trace[-1]["kernel_l1"])
    return row


def _fmt(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _write_csv(path, fields, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for r in rows:
            writer.writerow([_fmt(r[f]) for f in fields])


def _summarize(spec, rows):
    out = []
    for ni, noise in enumerate(spec.noise_levels):
        sel = [r for r in rows if r["noise"] == noise]
        ok = [r for r in sel if r["status"] == "ok"]
        for method, pk, sk, src in (("Bicubic", "bicubic_psnr", "bicubic_ssim", sel),
                                    (_method_name(spec.solver), "psnr", "ssim", ok)):
            out.append({
                "method": method, "setting": spec.setting, "scale": spec.scale, "noise": noise,
                "cases": len(src),
                "psnr": float(np.mean([r[pk] for r in src])) if src else math.nan,
                "ssim": float(np.mean([r[sk] for r in src])) if src else math.nan,
            })
    return out


def _method_name(cfg: SolverConfig) -> str:
    params = ",".join(f"{k}={v:g}" for k, v in cfg.image_prox.params().items())
    prox = cfg.image_prox.name + (f"({params})" if params else "")
    return f"AltProxGrad T={cfg.stages} prox={prox}"


def run_benchmark(spec: BenchmarkSpec) -> dict:
    """Run every case and write ``cases.csv``, ``summary.csv`` and ``spec.json``.

    Returns ``{"cases": rows, "summary": rows, "failed": n_failed}``.
    """
    images = load_images(spec)
    kernels = kernel_set(spec)
    cases = [((ii, name, hr), (ki, *kern), (ni, float(noise)))
             for ii, (name, hr) in enumerate(images)
             for ki, kern in enumerate(kernels)
             for ni, noise in enumerate(spec.noise_levels)]
    workers = worker_count(spec.workers)
    log.info("running %d cases on %d worker(s)", len(cases), workers)
    if workers == 1:
        rows = [_run_case(spec, c) for c in cases]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda c: _run_case(spec, c), cases))
    rows.sort(key=lambda r: (r["image"], r["kernel"], r["noise"]))
    summary = _summarize(spec, rows)
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "cases.csv", CASE_FIELDS, rows)
    _write_csv(out / "summary.csv", SUMMARY_FIELDS, summary)
    with open(out / "spec.json", "w", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    failed = sum(r["status"] != "ok" for r in rows)
    return {"cases": rows, "summary": summary, "failed": failed}


def calibrate_bicubic(image_dir, scale: int = 2, borders=(None, 0)) -> dict:
    """Bicubic baseline under the Gaussian8 protocol on a folder of HR images.

    Returns mean luma PSNR/SSIM for each requested border (``None`` means
    ``scale``), keyed by the border actually used.
    """
    spec = BenchmarkSpec(images=str(image_dir), setting="setting1", scale=scale)
    images = load_images(spec)
    results = {}
    for border in borders:
        b = scale if border is None else border
        ps, ss = [], []
        for _, hr in images:
            for sig in gaussian8_sigmas(scale):
                y, _ = degrade(hr, DegradationSpec(scale=scale, kernel_size=21, params=Iso(float(sig))))
                bic = bicubic_resize(y, hr.shape[0], hr.shape[1])
                ps.append(psnr(bic, hr, b))
                ss.append(ssim(bic, hr, b))
        results[b] = {"psnr": float(np.mean(ps)), "ssim": float(np.mean(ss)), "cases": len(ps)}
    return results
