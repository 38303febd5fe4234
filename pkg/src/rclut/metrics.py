"""Luma-channel PSNR and SSIM plus the dataset evaluation driver.

Both metrics run on the uint8 Y channel with a border shave (default:
the upscaling factor), the usual protocol for super-resolution
benchmarks.  Identical images report the 100 dB cap instead of infinity.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .imagecore import Image, load_png, luma_plane, quantize_u8, resize_image

__all__ = [
    "PSNR_CAP",
    "EvalRecord",
    "EvalReport",
    "psnr_y",
    "ssim_y",
    "evaluate",
    "write_report_csv",
    "write_report_json",
]

PSNR_CAP = 100.0

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_K1, _K2, _L = 0.01, 0.03, 255.0


@dataclass(frozen=True)
class EvalRecord:
    name: str
    psnr: float
    ssim: float


@dataclass
class EvalReport:
    records: list = field(default_factory=list)

    @property
    def mean_psnr(self) -> float:
        return sum(r.psnr for r in self.records) / len(self.records)

    @property
    def mean_ssim(self) -> float:
        return sum(r.ssim for r in self.records) / len(self.records)


def _y_u8(image: Image) -> np.ndarray:
    return quantize_u8(luma_plane(image))


def _shave(plane: np.ndarray, crop: int) -> np.ndarray:
    if crop < 0:
        raise DataError("crop must be >= 0")
    if crop == 0:
        return plane
    if plane.shape[0] <= 2 * crop or plane.shape[1] <= 2 * crop:
        raise DataError(f"crop {crop} leaves no pixels of {plane.shape}")
    return plane[crop:-crop, crop:-crop]


def psnr_y(a: Image, b: Image, crop: int = 0) -> float:
    """Peak signal-to-noise ratio on the Y channel, in dB."""
    if (a.width, a.height) != (b.width, b.height):
        raise DataError(f"size mismatch: {a.width}x{a.height} vs {b.width}x{b.height}")
    ya = _shave(_y_u8(a), crop).astype(np.float64)
    yb = _shave(_y_u8(b), crop).astype(np.float64)
    mse = float(np.mean((ya - yb) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(10.0 * math.log10(255.0**2 / mse), PSNR_CAP)


def _gaussian_window(n: int, sigma: float) -> np.ndarray:
    x = np.arange(n) - (n - 1) / 2.0
    w = np.exp(-(x**2) / (2.0 * sigma**2))
    return w / w.sum()


def _filter_valid(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Separable valid-mode filtering with a 1D window along both axes."""
    t = np.lib.stride_tricks.sliding_window_view(x, w.size, axis=1) @ w
    return np.lib.stride_tricks.sliding_window_view(t, w.size, axis=0) @ w


def ssim_y(a: Image, b: Image, crop: int = 0) -> float:
    """Single-scale SSIM on the Y channel (11x11 Gaussian, sigma 1.5)."""
    if (a.width, a.height) != (b.width, b.height):
        raise DataError(f"size mismatch: {a.width}x{a.height} vs {b.width}x{b.height}")
    x = _shave(_y_u8(a), crop).astype(np.float64)
    y = _shave(_y_u8(b), crop).astype(np.float64)
    if x.shape[0] < _SSIM_WINDOW or x.shape[1] < _SSIM_WINDOW:
        raise DataError(f"SSIM needs at least {_SSIM_WINDOW}x{_SSIM_WINDOW} after crop")
    w = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    c1 = (_K1 * _L) ** 2
    c2 = (_K2 * _L) ** 2
    mu_x = _filter_valid(x, w)
    mu_y = _filter_valid(y, w)
    var_x = _filter_valid(x * x, w) - mu_x * mu_x
    var_y = _filter_valid(y * y, w) - mu_y * mu_y
    cov = _filter_valid(x * y, w) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def evaluate(sr_fn, dataset_dir, r: int, crop: int | None = None) -> EvalReport:
    """Run the benchmark protocol over a directory of HR PNGs.

    Each image is center-cropped to a multiple of r, reduced to an LR
    image by bicubic, upscaled by ``sr_fn`` (LR Image -> SR Image), and
    scored against the original.  ``sr_fn=None`` scores the ground truth
    against itself (the passthrough sanity mode).
    """
    files = sorted(Path(dataset_dir).glob("*.png"))
    if not files:
        raise DataError(f"no PNG files in {dataset_dir}")
    shave = r if crop is None else crop
    report = EvalReport()
    for path in files:
        hr = load_png(path)
        data = hr.data
        ch, cw = hr.height - hr.height % r, hr.width - hr.width % r
        if ch == 0 or cw == 0:
            raise DataError(f"{path.name}: smaller than the scale factor")
        oy, ox = (hr.height - ch) // 2, (hr.width - cw) // 2
        hr = Image(hr.colorspace, np.ascontiguousarray(data[oy : oy + ch, ox : ox + cw]))
        if sr_fn is None:
            sr = hr
        else:
            lr = resize_image(hr, cw // r, ch // r)
            sr = sr_fn(lr)
        report.records.append(
            EvalRecord(
                name=path.stem,
                psnr=psnr_y(sr, hr, crop=shave),
                ssim=ssim_y(sr, hr, crop=shave),
            )
        )
    return report


def write_report_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "psnr_db", "ssim"])
        for rec in report.records:
            writer.writerow([rec.name, f"{rec.psnr:.6f}", f"{rec.ssim:.6f}"])
        writer.writerow(["mean", f"{report.mean_psnr:.6f}", f"{report.mean_ssim:.6f}"])


def write_report_json(report: EvalReport, path) -> None:
    doc = {
        "images": [
            {"name": r.name, "psnr_db": r.psnr, "ssim": r.ssim} for r in report.records
        ],
        "mean_psnr_db": report.mean_psnr,
        "mean_ssim": report.mean_ssim,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
