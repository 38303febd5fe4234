"""Deterministic synthetic image generator for desk-scale experiments.

Produces small RGB PNGs dominated by the structures a 4x upscaler feeds
on: mosaic cells with crisp boundaries, line gratings, thick strokes,
disks and checker patches.  Bicubic interpolation blurs such content
badly, which gives a trained model measurable headroom even on a
laptop-sized dataset.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .imagecore import Colorspace, Image, save_png

__all__ = ["synth_image", "write_dataset"]


def _mosaic(rng, h, w):
    """Random flat-colored cells (nearest-seed labeling): edges everywhere."""
    n_cells = int(rng.integers(25, 60))
    sy = rng.uniform(0, h, n_cells)
    sx = rng.uniform(0, w, n_cells)
    colors = rng.uniform(0.05, 0.95, (n_cells, 3))
    yy, xx = np.mgrid[0:h, 0:w]
    d = (yy[:, :, None] - sy) ** 2 + (xx[:, :, None] - sx) ** 2
    return colors[np.argmin(d, axis=2)]


def _grating(rng, h, w):
    """Oriented stripe pattern with a random period."""
    theta = rng.uniform(0, np.pi)
    period = rng.uniform(4.0, 12.0)
    phase = rng.uniform(0, 2 * np.pi)
    yy, xx = np.mgrid[0:h, 0:w]
    wave = np.sin((np.cos(theta) * xx + np.sin(theta) * yy) * 2 * np.pi / period + phase)
    c0 = rng.uniform(0.0, 0.45, 3)
    c1 = rng.uniform(0.55, 1.0, 3)
    mask = (wave > 0)[:, :, None]
    return np.where(mask, c1, c0)


def synth_image(seed: int, size: int = 128) -> Image:
    """One reproducible RGB test card, edge-dense by construction."""
    rng = np.random.default_rng(seed)
    if rng.uniform() < 0.25:
        img = _grating(rng, size, size)
    else:
        img = _mosaic(rng, size, size)
    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(int(rng.integers(6, 12))):
        color = rng.uniform(0.0, 1.0, size=3)
        kind = int(rng.integers(4))
        if kind == 0:  # rectangle
            x0, y0 = rng.integers(0, size - 8, size=2)
            wdt, hgt = rng.integers(6, size // 2, size=2)
            img[y0 : y0 + hgt, x0 : x0 + wdt] = color
        elif kind == 1:  # disk
            cx, cy = rng.integers(8, size - 8, size=2)
            rad = int(rng.integers(4, size // 4))
            mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= rad * rad
            img[mask] = color
        elif kind == 2:  # thick stroke
            x0, y0 = rng.integers(0, size, size=2)
            x1, y1 = rng.integers(0, size, size=2)
            thick = int(rng.integers(1, 4))
            ts = np.linspace(0.0, 1.0, 2 * size)
            pxs = np.clip((x0 + (x1 - x0) * ts).astype(int), 0, size - 1)
            pys = np.clip((y0 + (y1 - y0) * ts).astype(int), 0, size - 1)
            for px, py in zip(pxs, pys):
                img[max(py - thick, 0) : py + thick, max(px - thick, 0) : px + thick] = color
        else:  # checker patch
            x0, y0 = rng.integers(0, size - 16, size=2)
            side = int(rng.integers(12, size // 3))
            cell = int(rng.integers(3, 8))
            sub = ((xx[y0 : y0 + side, x0 : x0 + side] // cell)
                   + (yy[y0 : y0 + side, x0 : x0 + side] // cell)) % 2
            other = rng.uniform(0.0, 1.0, size=3)
            patch = np.where(sub[:, :, None] == 0, color, other)
            img[y0 : y0 + side, x0 : x0 + side] = patch
    # gentle global shading so flat cells are not exactly constant
    shade = 0.9 + 0.1 * (xx + yy) / (2.0 * size)
    img = img * shade[:, :, None]
    data = np.clip(np.floor(img * 255.0 + 0.5), 0, 255).astype(np.uint8)
    return Image(Colorspace.RGB, data)


def write_dataset(directory, count: int, seed: int = 0, size: int = 128) -> list:
    """Write ``count`` synthetic PNGs; returns the file paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        path = directory / f"synth_{seed:03d}_{i:03d}.png"
        save_png(synth_image(seed * 1000 + i, size=size), path)
        paths.append(path)
    return paths
