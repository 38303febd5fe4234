"""Dataset ingestion and the MSE/Adam training loops.

Two loops live here: ``train`` fits the float reference network, and
``lut_aware_finetune`` adjusts already-cached table entries through the
inference engine's own interpolation weights.  Both are fully
deterministic given (seed, data, config): batches come from one
``numpy.random.Generator`` and gradients accumulate in a fixed order.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .imagecore import (
    Colorspace,
    Image,
    bicubic_resize,
    load_png,
    luma_plane,
    quantize_u8,
    save_png,
    to_unit,
)
from .lutengine import LutSim
from .lutpack import LutPack
from .refnet import (
    NetworkConfig,
    NetworkParams,
    init_params,
    load_checkpoint,
    named_arrays,
    network_backward,
    network_forward_cached,
    save_checkpoint,
    zero_grads,
)

log = logging.getLogger(__name__)

__all__ = [
    "DatasetSpec",
    "TrainConfig",
    "TrainState",
    "prepare_pairs",
    "sample_batch",
    "mse_loss",
    "adam_step",
    "train",
    "lut_aware_finetune",
    "write_loss_csv",
    "save_state",
    "load_state",
]


@dataclass(frozen=True)
class DatasetSpec:
    hr_dir: str
    scale: int
    cache_dir: str


@dataclass
class TrainConfig:
    iterations: int = 200_000
    batch_size: int = 32
    lr: float = 1e-4
    lr_patch: int = 24  # LR-side crop; the HR crop is lr_patch * scale
    seed: int = 0
    augment: bool = True
    checkpoint_every: int = 1000
    log_every: int = 50


@dataclass
class TrainState:
    net: NetworkParams
    m: dict
    v: dict
    iteration: int
    rng: np.random.Generator
    loss_log: list = field(default_factory=list)  # (iteration, loss, wall_ms)


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------


def _center_crop_multiple(arr: np.ndarray, r: int) -> np.ndarray:
    h, w = arr.shape[:2]
    ch, cw = h - h % r, w - w % r
    if ch == 0 or cw == 0:
        raise DataError(f"image {w}x{h} too small for scale {r}")
    oy, ox = (h - ch) // 2, (w - cw) // 2
    return arr[oy : oy + ch, ox : ox + cw]


def prepare_pairs(spec: DatasetSpec):
    """Build (LR plane, HR plane) luma pairs, caching them as gray PNGs.

    HR images are center-cropped to a multiple of the scale and reduced
    to their Y channel; the LR side is bicubic at 1/scale, quantized to
    the 8-bit grid the cached pipeline actually consumes.  A warm cache
    reloads byte-identical planes without resampling.
    """
    hr_dir = Path(spec.hr_dir)
    files = sorted(hr_dir.glob("*.png"))
    if not files:
        raise DataError(f"no PNG files in {hr_dir}")
    cache_dir = Path(spec.cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    r = spec.scale
    pairs = []
    skipped = 0
    for path in files:
        hr_cache = cache_dir / f"{path.stem}__hr.png"
        lr_cache = cache_dir / f"{path.stem}__lr_x{r}.png"
        if hr_cache.exists() and lr_cache.exists():
            hr_u8 = load_png(hr_cache).data[:, :, 0]
            lr_u8 = load_png(lr_cache).data[:, :, 0]
        else:
            try:
                img = load_png(path)
            except DataError as exc:
                log.warning("skipping %s: %s", path.name, exc)
                skipped += 1
                continue
            hr_u8 = _center_crop_multiple(quantize_u8(luma_plane(img)), r)
            h, w = hr_u8.shape
            lr_u8 = quantize_u8(bicubic_resize(to_unit(hr_u8), w // r, h // r))
            save_png(Image(Colorspace.GRAY, hr_u8[:, :, None]), hr_cache)
            save_png(Image(Colorspace.GRAY, lr_u8[:, :, None]), lr_cache)
        pairs.append((to_unit(lr_u8), to_unit(hr_u8)))
    if skipped:
        log.warning("skipped %d undecodable file(s) in %s", skipped, hr_dir)
    if not pairs:
        raise DataError(f"no decodable PNG files in {hr_dir}")
    return pairs


def _dihedral(plane: np.ndarray, t: int) -> np.ndarray:
    out = np.rot90(plane, t & 3)
    if t & 4:
        out = out[:, ::-1]
    return out


def sample_batch(pairs, cfg: TrainConfig, rng: np.random.Generator):
    """Aligned LR/HR crops; augmentation applies one of the 8 dihedral
    transforms identically to both members."""
    p = cfg.lr_patch
    batch = []
    for _ in range(cfg.batch_size):
        idx = int(rng.integers(len(pairs)))
        lr, hr = pairs[idx]
        lh, lw = lr.shape
        if p > lh or p > lw:
            raise DataError(f"patch {p} exceeds LR image {lw}x{lh}")
        scale = hr.shape[0] // lh
        oy = int(rng.integers(lh - p + 1))
        ox = int(rng.integers(lw - p + 1))
        lp = lr[oy : oy + p, ox : ox + p]
        hp = hr[oy * scale : (oy + p) * scale, ox * scale : (ox + p) * scale]
        if cfg.augment:
            t = int(rng.integers(8))
            lp = _dihedral(lp, t)
            hp = _dihedral(hp, t)
        batch.append((np.ascontiguousarray(lp), np.ascontiguousarray(hp)))
    return batch


# ---------------------------------------------------------------------------
# optimization
# ---------------------------------------------------------------------------


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Mean squared error and its gradient w.r.t. the prediction."""
    if pred.shape != target.shape:
        raise DataError(f"loss shapes differ: {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    return loss, 2.0 * diff / diff.size


def _adam_update(arrays: dict, grads: dict, m: dict, v: dict, t: int, lr: float,
                 beta1=0.9, beta2=0.999, eps=1e-8):
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, arr in arrays.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise DataError(f"non-finite gradient in {name} at step {t}")
        m[name] = beta1 * m[name] + (1.0 - beta1) * g
        v[name] = beta2 * v[name] + (1.0 - beta2) * (g * g)
        arr -= lr * (m[name] / bc1) / (np.sqrt(v[name] / bc2) + eps)


def adam_step(state: TrainState, grads: dict, lr: float) -> TrainState:
    """One bias-corrected Adam update over every parameter, in place."""
    arrays = dict(named_arrays(state.net))
    state.iteration += 1
    _adam_update(arrays, grads, state.m, state.v, state.iteration, lr)
    return state


# ---------------------------------------------------------------------------
# training loops
# ---------------------------------------------------------------------------


def train(config: NetworkConfig, tcfg: TrainConfig, spec: DatasetSpec,
          checkpoint_dir=None) -> TrainState:
    """Fit the reference network: sample -> forward -> MSE -> backward -> Adam."""
    pairs = prepare_pairs(spec)
    min_hr = min(min(hr.shape) for _, hr in pairs)
    if tcfg.lr_patch * spec.scale > min_hr:
        raise DataError(
            f"lr_patch {tcfg.lr_patch} x scale {spec.scale} exceeds the "
            f"smallest HR dimension {min_hr}"
        )
    rng = np.random.default_rng(tcfg.seed)
    net = init_params(config, rng)
    state = TrainState(
        net=net,
        m={name: np.zeros_like(a) for name, a in named_arrays(net)},
        v={name: np.zeros_like(a) for name, a in named_arrays(net)},
        iteration=0,
        rng=rng,
    )
    if checkpoint_dir is not None:
        Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
    for it in range(tcfg.iterations):
        t0 = time.perf_counter()
        batch = sample_batch(pairs, tcfg, rng)
        # whole batch as one stacked pass: equal-size crops, one GEMM chain
        lr_stack = np.stack([b[0] for b in batch])
        hr_stack = np.stack([b[1] for b in batch])
        out, cache = network_forward_cached(lr_stack, net)
        loss, g = mse_loss(out, hr_stack)
        grads = zero_grads(net)
        network_backward(g, net, cache, grads)
        adam_step(state, grads, tcfg.lr)
        wall_ms = (time.perf_counter() - t0) * 1000.0
        if it % tcfg.log_every == 0 or it == tcfg.iterations - 1:
            state.loss_log.append((it, loss, wall_ms))
        if checkpoint_dir is not None and (it + 1) % tcfg.checkpoint_every == 0:
            save_state(state, Path(checkpoint_dir) / f"ckpt_{it + 1:07d}.rckp")
    return state


def lut_aware_finetune(pack: LutPack, spec: DatasetSpec, tcfg: TrainConfig) -> LutPack:
    """Optimize cached table entries directly through the engine's weights.

    Entries live in the 0..255 domain, so ``tcfg.lr`` is in level units
    here (a fraction of a level per step is typical).  After the loop the
    entries are re-quantized to uint8 storage.
    """
    pairs = prepare_pairs(spec)
    sim = LutSim(pack)
    rng = np.random.default_rng(tcfg.seed)
    m = {k: np.zeros_like(a) for k, a in sim.params.items()}
    v = {k: np.zeros_like(a) for k, a in sim.params.items()}
    for it in range(tcfg.iterations):
        batch = sample_batch(pairs, tcfg, rng)
        grads = {k: np.zeros_like(a) for k, a in sim.params.items()}
        inv_b = 1.0 / len(batch)
        for lr_plane, hr_plane in batch:
            out, cache = sim.forward(quantize_u8(lr_plane))
            _, g = mse_loss(out, hr_plane)
            for key, val in sim.backward(g * inv_b, cache).items():
                grads[key] += val
        _adam_update(sim.params, grads, m, v, it + 1, tcfg.lr)
    return sim.to_pack()


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def write_loss_csv(loss_log, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,loss,wall_ms\n")
        for it, loss, wall in loss_log:
            fh.write(f"{it},{loss:.10g},{wall:.3f}\n")


def save_state(state: TrainState, path) -> None:
    extra = {f"adam.m.{k}": a for k, a in state.m.items()}
    extra.update({f"adam.v.{k}": a for k, a in state.v.items()})
    meta = {
        "iteration": state.iteration,
        "rng_state": state.rng.bit_generator.state,
    }
    save_checkpoint(path, state.net, extra_arrays=extra, meta=meta)


def load_state(path) -> TrainState:
    net, extra, meta = load_checkpoint(path)
    m = {k[len("adam.m."):]: a for k, a in extra.items() if k.startswith("adam.m.")}
    v = {k[len("adam.v."):]: a for k, a in extra.items() if k.startswith("adam.v.")}
    rng = np.random.default_rng(0)
    if "rng_state" in meta:
        rng.bit_generator.state = meta["rng_state"]
    return TrainState(
        net=net,
        m=m or {name: np.zeros_like(a) for name, a in named_arrays(net)},
        v=v or {name: np.zeros_like(a) for name, a in named_arrays(net)},
        iteration=int(meta.get("iteration", 0)),
        rng=rng,
    )
