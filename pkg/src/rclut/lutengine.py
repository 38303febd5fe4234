"""LUT-only inference: the deployable fast path.

Everything here is integer arithmetic.  Interpolation weights are
sixteenths; every weighted sum ends in ``(x + 8) >> 4`` and every average
in a round-half-up integer divide, so output bytes are identical across
platforms, runs, and thread counts.

Sampled tables store levels 0, 16, ..., 240 and a final entry cached at
input 255.  Inputs in [240, 255] interpolate between the last two entries
with the usual denominator of 16 - a deliberate (documented) shortcut in
the top sixteenth of the range.

``LutSim`` at the bottom is the float twin of the engine used for
finetuning table entries: same geometry, same interpolation weights,
gradients flowing to entries, straight-through where the engine rounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, EmptyImageError
from .imagecore import (
    Colorspace,
    Image,
    bicubic_resize,
    quantize_u8,
    rgb_to_ycbcr,
    rotate90,
    to_unit,
    ycbcr_to_rgb,
)
from .lutpack import SAMPLE_LEVELS, BranchTables, Lut1D, Lut1Input, Lut4D, LutPack
from .refnet import pixel_shuffle, pixel_unshuffle

__all__ = [
    "lut1d_eval",
    "SimplexWeights",
    "simplex_weights",
    "lut4d_eval",
    "engine_stage",
    "upscale",
    "LutSim",
]

_STRIDES = np.array([17**3, 17**2, 17, 1], dtype=np.int64)


def _rh_div(acc: np.ndarray, divisor: int) -> np.ndarray:
    """Integer divide with round half up."""
    return (2 * acc + divisor) // (2 * divisor)


def _interp_1d_values(values: np.ndarray, entries: np.ndarray) -> np.ndarray:
    """Vectorized sampled-table lookup; exact at multiples of 16."""
    if entries.shape[0] == 256:
        return entries[values].astype(np.int64)
    v = values.astype(np.int64)
    j = v >> 4
    f = v & 15
    e = entries.astype(np.int64)
    return ((16 - f) * e[j] + f * e[j + 1] + 8) >> 4


def lut1d_eval(window, tables) -> int:
    """Average the per-offset lookups over one window (round half up)."""
    window = np.asarray(window, dtype=np.int64).ravel()
    if window.shape[0] != len(tables):
        raise DataError(f"window has {window.shape[0]} values for {len(tables)} tables")
    total = 0
    for v, table in zip(window, tables):
        total += int(_interp_1d_values(np.asarray([v]), table.entries)[0])
    n2 = len(tables)
    return int((2 * total + n2) // (2 * n2))


@dataclass(frozen=True)
class SimplexWeights:
    """A point's enclosing simplex inside the 4D cell, in sixteenths.

    ``vertices[0]`` is the base corner, each next vertex adds one axis in
    descending-fraction order, ``vertices[4]`` is the opposite corner.
    The five weights are non-negative and always sum to 16.
    """

    vertices: np.ndarray  # (5, 4) 0/1 corner offsets
    weights: np.ndarray  # (5,) integers


def simplex_weights(fractions) -> SimplexWeights:
    """Pick the simplex by sorting fractions (ties broken by axis order)."""
    f = np.asarray(fractions, dtype=np.int64)
    if f.shape != (4,) or (f < 0).any() or (f > 15).any():
        raise DataError("fractions must be four integers in 0..15")
    order = np.argsort(-f, kind="stable")
    fs = f[order]
    weights = np.array(
        [16 - fs[0], fs[0] - fs[1], fs[1] - fs[2], fs[2] - fs[3], fs[3]], dtype=np.int64
    )
    vertices = np.zeros((5, 4), dtype=np.int64)
    for step in range(4):
        vertices[step + 1] = vertices[step]
        vertices[step + 1, order[step]] += 1
    return SimplexWeights(vertices=vertices, weights=weights)


def lut4d_eval(i0: int, i1: int, i2: int, i3: int, table: Lut4D) -> np.ndarray:
    """Interpolated 4D lookup for one window; returns out_channels uint8."""
    idx = np.array([i0, i1, i2, i3], dtype=np.int64)
    j = idx >> 4
    sw = simplex_weights(idx & 15)
    entries = table.entries.astype(np.int64)
    acc = np.zeros(table.out_channels, dtype=np.int64)
    for w, v in zip(sw.weights, sw.vertices):
        c = j + v
        acc += w * entries[c[0], c[1], c[2], c[3]]
    return ((acc + 8) >> 4).astype(np.uint8)


def _lut4d_planes(w00, w01, w10, w11, table: Lut4D) -> np.ndarray:
    """Vectorized lut4d_eval over aligned index planes -> (H, W, C) uint8."""
    shape = w00.shape
    idx = np.stack(
        [w.ravel().astype(np.int64) for w in (w00, w01, w10, w11)], axis=1
    )  # (P, 4)
    j = idx >> 4
    f = idx & 15
    order = np.argsort(-f, axis=1, kind="stable")  # (P, 4)
    fs = np.take_along_axis(f, order, axis=1)
    weights = np.empty((idx.shape[0], 5), dtype=np.int64)
    weights[:, 0] = 16 - fs[:, 0]
    weights[:, 1] = fs[:, 0] - fs[:, 1]
    weights[:, 2] = fs[:, 1] - fs[:, 2]
    weights[:, 3] = fs[:, 2] - fs[:, 3]
    weights[:, 4] = fs[:, 3]
    flat = np.empty((idx.shape[0], 5), dtype=np.int64)
    flat[:, 0] = j @ _STRIDES
    steps = _STRIDES[order]  # (P, 4) stride added at each walk step
    np.cumsum(steps, axis=1, out=steps)
    flat[:, 1:] = flat[:, :1] + steps
    entries = table.entries.reshape(-1, table.out_channels).astype(np.int64)
    gathered = entries[flat]  # (P, 5, C)
    acc = (weights[:, :, None] * gathered).sum(axis=1)
    return (((acc + 8) >> 4).astype(np.uint8)).reshape(*shape, table.out_channels)


def _pad_split(rc_kernel, window):
    n = rc_kernel or 1
    total = (n - 1) + (window - 1)
    before = total // 2
    return before, total - before


def _pad_edge_u8(plane: np.ndarray, before: int, after: int) -> np.ndarray:
    return np.pad(plane, ((before, after), (before, after)), mode="edge")


def _branch_tables_eval(plane: np.ndarray, bt) -> np.ndarray:
    """plane (uint8) -> block output (H, W, C) uint8 for one branch."""
    window = 1 if isinstance(bt.block, Lut1Input) else 2
    before, after = _pad_split(bt.rc_kernel if bt.rc else None, window)
    padded = _pad_edge_u8(plane, before, after)
    if bt.rc:
        n = bt.rc_kernel
        oh, ow = padded.shape[0] - n + 1, padded.shape[1] - n + 1
        acc = np.zeros((oh, ow), dtype=np.int64)
        for k, table in enumerate(bt.rc):
            i, j = divmod(k, n)
            acc += _interp_1d_values(padded[i : i + oh, j : j + ow], table.entries)
        v = _rh_div(acc, n * n).astype(np.uint8)
    else:
        v = padded
    if window == 1:
        return bt.block.entries[v]
    return _lut4d_planes(v[:-1, :-1], v[:-1, 1:], v[1:, :-1], v[1:, 1:], bt.block)


def engine_stage(plane: np.ndarray, stage_tables, *, scale, final, rotation_ensemble=True) -> np.ndarray:
    """One cascaded stage in the quantized domain.

    All (rotation, branch) results are summed in wide integers and
    rounded once per stage, which keeps the 4-rotation ensemble exactly
    equivariant: rotating the input only permutes the summands.
    """
    if plane.dtype != np.uint8 or plane.ndim != 2:
        raise DataError("engine planes are 2D uint8")
    rotations = (0, 1, 2, 3) if rotation_ensemble else (0,)
    acc = None
    for k in rotations:
        rp = np.ascontiguousarray(rotate90(plane, k))
        for bt in stage_tables:
            out = _branch_tables_eval(rp, bt)
            if final:
                hr = rotate90(pixel_shuffle(out, scale), -k)
            else:
                hr = rotate90(out[:, :, 0], -k)
            hr = hr.astype(np.int64)
            acc = hr if acc is None else acc + hr
    return _rh_div(acc, len(rotations) * len(stage_tables)).astype(np.uint8)


def _run_pipeline(y: np.ndarray, pack: LutPack, rotation_ensemble=True) -> np.ndarray:
    x = y
    last = len(pack.stages) - 1
    for si, stage in enumerate(pack.stages):
        x = engine_stage(
            x, stage, scale=pack.scale, final=si == last, rotation_ensemble=rotation_ensemble
        )
    return x


def upscale(image: Image, pack: LutPack) -> Image:
    """Full LUT inference: luma through the tables, chroma by bicubic."""
    if image.width == 0 or image.height == 0:
        raise EmptyImageError("cannot upscale an empty image")
    r = pack.scale
    if image.colorspace is Colorspace.GRAY:
        sr = _run_pipeline(image.data[:, :, 0], pack)
        return Image(Colorspace.GRAY, sr[:, :, None])
    if image.colorspace is not Colorspace.RGB:
        raise DataError("upscale expects an RGB or Gray image")
    ycc = rgb_to_ycbcr(image)
    y_sr = _run_pipeline(ycc.data[:, :, 0], pack)
    out_h, out_w = y_sr.shape
    chroma = [
        quantize_u8(bicubic_resize(to_unit(ycc.data[:, :, c]), out_w, out_h)) for c in (1, 2)
    ]
    merged = np.stack([y_sr, chroma[0], chroma[1]], axis=2)
    return ycbcr_to_rgb(Image(Colorspace.YCBCR, merged))


# ---------------------------------------------------------------------------
# float twin for entry finetuning
# ---------------------------------------------------------------------------


def _ste_round(x: np.ndarray) -> np.ndarray:
    """Round half up in float; callers treat the gradient as identity."""
    return np.floor(x + 0.5)


class LutSim:
    """Differentiable float replica of the engine over a pack's entries.

    Entries become float64 parameters in the 0..255 domain.  The forward
    pass quantizes entries and intermediate planes exactly like the
    engine (straight-through for gradients), so the interpolation weights
    match deployment; only the per-lookup ``+8 >> 4`` rounding is left
    out.  ``grads`` keys match ``LutPack.table_items`` ids.
    """

    def __init__(self, pack: LutPack):
        self.scale = pack.scale
        self.stages = []
        self.params = {}
        for si, stage in enumerate(pack.stages):
            branches = []
            for bi, bt in enumerate(stage):
                rc_ids = None
                if bt.rc is not None:
                    rc_ids = []
                    for t in bt.rc:
                        tid = f"s{si}.b{bi}.rc{bt.rc_kernel}.o{t.offset_index:02d}"
                        self.params[tid] = t.entries.astype(np.float64)
                        rc_ids.append(tid)
                block_id = f"s{si}.b{bi}.block"
                if isinstance(bt.block, Lut4D):
                    self.params[block_id] = bt.block.entries.reshape(
                        -1, bt.block.out_channels
                    ).astype(np.float64)
                    block_kind = "4d"
                else:
                    self.params[block_id] = bt.block.entries.astype(np.float64)
                    block_kind = "1in"
                branches.append(
                    {
                        "rc_kernel": bt.rc_kernel if bt.rc is not None else None,
                        "rc_ids": rc_ids,
                        "block_id": block_id,
                        "block_kind": block_kind,
                        "out_channels": bt.block.out_channels,
                    }
                )
            self.stages.append(branches)

    def _quantized(self, tid):
        return np.clip(_ste_round(self.params[tid]), 0.0, 255.0)

    def to_pack(self) -> LutPack:
        """Re-quantize the float entries back into a deployable pack."""
        pack = LutPack(scale=self.scale)
        s = SAMPLE_LEVELS
        for branches in self.stages:
            stage = []
            for br in branches:
                rc_tables = None
                if br["rc_ids"]:
                    rc_tables = [
                        Lut1D(
                            offset_index=k,
                            entries=self._quantized(tid).astype(np.uint8),
                        )
                        for k, tid in enumerate(br["rc_ids"])
                    ]
                e = self._quantized(br["block_id"]).astype(np.uint8)
                if br["block_kind"] == "4d":
                    block = Lut4D(entries=e.reshape(s, s, s, s, br["out_channels"]))
                else:
                    block = Lut1Input(entries=e.reshape(256, br["out_channels"]))
                stage.append(
                    BranchTables(rc_kernel=br["rc_kernel"], rc=rc_tables, block=block)
                )
            pack.stages.append(stage)
        return pack

    # -- forward ------------------------------------------------------

    def forward(self, plane_u8: np.ndarray):
        """uint8 LR plane -> (HR plane in [0,1], cache for backward)."""
        x = plane_u8.astype(np.float64)
        stage_caches = []
        last = len(self.stages) - 1
        for si, branches in enumerate(self.stages):
            x, cache = self._stage_forward(x, branches, final=si == last)
            stage_caches.append(cache)
        return x / 255.0, stage_caches

    def _stage_forward(self, x, branches, *, final):
        acc = None
        per_rot_branch = []
        for k in range(4):
            rp = rotate90(x, k)
            for br in branches:
                out, cache = self._branch_forward(rp, br)
                if final:
                    hr = rotate90(pixel_shuffle(out, self.scale), -k)
                else:
                    hr = rotate90(out[:, :, 0], -k)
                acc = hr if acc is None else acc + hr
                per_rot_branch.append(cache)
        mean = acc / (4 * len(branches))
        if final:
            return mean, (per_rot_branch, x.shape, None)
        quant = _ste_round(mean)
        return quant, (per_rot_branch, x.shape, quant)

    def _branch_forward(self, rp, br):
        window = 1 if br["block_kind"] == "1in" else 2
        before, after = _pad_split(br["rc_kernel"], window)
        rot_shape = rp.shape
        padded = np.pad(rp, ((before, after), (before, after)), mode="edge")
        rc_cache = None
        if br["rc_kernel"] is not None:
            n = br["rc_kernel"]
            oh, ow = padded.shape[0] - n + 1, padded.shape[1] - n + 1
            total = np.zeros((oh, ow))
            offsets = []
            for k, tid in enumerate(br["rc_ids"]):
                i, j = divmod(k, n)
                v = padded[i : i + oh, j : j + ow]
                jq = np.minimum(np.floor(v / 16.0), 15.0).astype(np.int64)
                f = v - 16.0 * jq
                e = self._quantized(tid)
                total += ((16.0 - f) * e[jq] + f * e[jq + 1]) / 16.0
                offsets.append((jq, f))
            v_plane = _ste_round(total / (n * n))
            rc_cache = offsets
        else:
            v_plane = padded
        if br["block_kind"] == "1in":
            vi = v_plane.astype(np.int64)
            e = self._quantized(br["block_id"])
            out = e[vi]
            block_cache = ("1in", vi)
        else:
            w00, w01 = v_plane[:-1, :-1], v_plane[:-1, 1:]
            w10, w11 = v_plane[1:, :-1], v_plane[1:, 1:]
            idx = np.stack(
                [w.ravel().astype(np.int64) for w in (w00, w01, w10, w11)], axis=1
            )
            j = idx >> 4
            f = idx & 15
            order = np.argsort(-f, axis=1, kind="stable")
            fs = np.take_along_axis(f, order, axis=1)
            weights = np.empty((idx.shape[0], 5))
            weights[:, 0] = 16 - fs[:, 0]
            weights[:, 1] = fs[:, 0] - fs[:, 1]
            weights[:, 2] = fs[:, 1] - fs[:, 2]
            weights[:, 3] = fs[:, 2] - fs[:, 3]
            weights[:, 4] = fs[:, 3]
            flat = np.empty((idx.shape[0], 5), dtype=np.int64)
            flat[:, 0] = j @ _STRIDES
            steps = _STRIDES[order]
            np.cumsum(steps, axis=1, out=steps)
            flat[:, 1:] = flat[:, :1] + steps
            e = self._quantized(br["block_id"])
            gathered = e[flat]  # (P, 5, C)
            out_flat = (weights[:, :, None] * gathered).sum(axis=1) / 16.0
            out = out_flat.reshape(w00.shape[0], w00.shape[1], br["out_channels"])
            block_cache = ("4d", flat, weights, order, w00.shape)
        return out, (rot_shape, padded.shape, before, rc_cache, v_plane, block_cache)

    # -- backward -----------------------------------------------------

    def backward(self, upstream_unit: np.ndarray, stage_caches):
        """Gradients of a scalar loss w.r.t. every entry array."""
        grads = {tid: np.zeros_like(arr) for tid, arr in self.params.items()}
        g = upstream_unit / 255.0
        last = len(self.stages) - 1
        for si in range(last, -1, -1):
            need_input = si > 0
            g = self._stage_backward(g, self.stages[si], stage_caches[si], grads,
                                     final=si == last, need_input=need_input)
        return grads

    def _stage_backward(self, g_out, branches, cache, grads, *, final, need_input):
        per_rot_branch, in_shape, _ = cache
        share = 1.0 / (4 * len(branches))
        g_in = np.zeros(in_shape) if need_input else None
        ci = 0
        for k in range(4):
            for br in branches:
                g_hr = rotate90(g_out, k) * share
                if final:
                    g_blk = pixel_unshuffle(g_hr, self.scale)
                else:
                    g_blk = g_hr[:, :, None]
                g_rp = self._branch_backward(g_blk, br, per_rot_branch[ci], grads, need_input)
                if need_input:
                    g_in += rotate90(g_rp, -k)
                ci += 1
        return g_in

    def _branch_backward(self, g_blk, br, cache, grads, need_input):
        rot_shape, padded_shape, before, rc_cache, v_plane, block_cache = cache
        out_c = br["out_channels"]
        if block_cache[0] == "1in":
            _, vi = block_cache
            gf = g_blk.reshape(-1, out_c)
            np.add.at(grads[br["block_id"]], vi.ravel(), gf)
            if need_input or rc_cache is not None:
                e = self._quantized(br["block_id"])
                lo = np.maximum(vi - 1, 0)
                hi = np.minimum(vi + 1, 255)
                span = np.maximum(hi - lo, 1).astype(np.float64)
                slope = (e[hi] - e[lo]) / span[:, :, None]
                g_v = (slope * g_blk).sum(axis=2)
            else:
                g_v = None
        else:
            _, flat, weights, order, out_hw = block_cache
            gf = g_blk.reshape(-1, out_c)
            gtab = grads[br["block_id"]]
            for i in range(5):
                np.add.at(gtab, flat[:, i], (weights[:, i : i + 1] / 16.0) * gf)
            if need_input or rc_cache is not None:
                e = self._quantized(br["block_id"])
                gathered = e[flat]  # (P, 5, C)
                # slope along each walk step goes to the axis added there
                g_axis_sorted = np.empty((flat.shape[0], 4))
                for step in range(4):
                    diff = gathered[:, step + 1] - gathered[:, step]
                    g_axis_sorted[:, step] = (diff * gf).sum(axis=1) / 16.0
                g_axis = np.zeros_like(g_axis_sorted)
                np.put_along_axis(g_axis, order, g_axis_sorted, axis=1)
                oh, ow = out_hw
                g_v = np.zeros(v_plane.shape)
                g4 = g_axis.reshape(oh, ow, 4)
                g_v[:-1, :-1] += g4[:, :, 0]
                g_v[:-1, 1:] += g4[:, :, 1]
                g_v[1:, :-1] += g4[:, :, 2]
                g_v[1:, 1:] += g4[:, :, 3]
            else:
                g_v = None
        if rc_cache is not None:
            n = br["rc_kernel"]
            n2 = n * n
            oh = padded_shape[0] - n + 1
            ow = padded_shape[1] - n + 1
            g_padded = np.zeros(padded_shape) if need_input else None
            for k, tid in enumerate(br["rc_ids"]):
                jq, f = rc_cache[k]
                gk = g_v / n2
                gtab = grads[tid]
                np.add.at(gtab, jq.ravel(), ((16.0 - f) / 16.0 * gk).ravel())
                np.add.at(gtab, (jq + 1).ravel(), (f / 16.0 * gk).ravel())
                if need_input:
                    e = self._quantized(tid)
                    slope = (e[jq + 1] - e[jq]) / 16.0
                    i, j = divmod(k, n)
                    g_padded[i : i + oh, j : j + ow] += slope * gk
            if not need_input:
                return None
        else:
            if not need_input:
                return None
            g_padded = g_v
        return _fold_pad_sim(g_padded, before, rot_shape)


def _fold_pad_sim(g_padded: np.ndarray, before: int, out_shape):
    """Adjoint of edge padding: fold border gradients onto edge pixels."""
    rows = np.clip(np.arange(g_padded.shape[0]) - before, 0, out_shape[0] - 1)
    cols = np.clip(np.arange(g_padded.shape[1]) - before, 0, out_shape[1] - 1)
    folded = np.zeros(out_shape)
    np.add.at(folded, (rows[:, None], cols[None, :]), g_padded)
    return folded
