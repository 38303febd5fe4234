"""Float-precision reference network that the LUT caches are baked from.

The network is built from two unit types, both deliberately tiny so every
unit can later be tabulated:

* a "per-offset map" unit (``RcParams``): each of the N x N window
  positions owns an independent scalar->scalar channel map (1 -> C -> 1
  linear pair), the N^2 clamped results are averaged.  Because no two
  window pixels interact before the average, each position caches into a
  single 1D table.
* a dense "mixing block" (``BlockParams``): a small MLP over a 2x2 window
  (or a single pixel) that restores spatial/channel interaction; a 2x2
  block caches into one 4D table, a 1-input block into a 256-row table.

Stages run several parallel branches, average them, and (optionally) run
the whole thing under a 4-way rotation ensemble, which doubles the
effective receptive field.  All forward/backward passes are hand-written
numpy; there is no autodiff anywhere.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, CorruptPackError, DataError
from .imagecore import pad_replicate, rotate90

__all__ = [
    "BlockKind",
    "RcParams",
    "BlockParams",
    "BranchConfig",
    "BranchParams",
    "NetworkConfig",
    "NetworkParams",
    "init_params",
    "rc_forward",
    "rc_backward",
    "block_apply",
    "convblock_forward",
    "convblock_backward",
    "pixel_shuffle",
    "pixel_unshuffle",
    "quantize_sim",
    "stage_forward",
    "network_forward",
    "network_forward_cached",
    "network_backward",
    "receptive_field",
    "named_arrays",
    "save_checkpoint",
    "load_checkpoint",
]


class BlockKind(Enum):
    IN4_OUT1 = "in4out1"
    IN1_OUT4 = "in1out4"
    IN4_HEAD = "in4outhead"

    @property
    def window(self) -> int:
        """Spatial input footprint per output site (2x2 or 1x1)."""
        return 1 if self is BlockKind.IN1_OUT4 else 2


@dataclass
class RcParams:
    """Per-offset channel maps for one N x N window.

    Arrays are indexed by flattened offset k = i * N + j (row-major over
    the window).  ``w_up``/``b_up`` lift the scalar pixel to ``hidden``
    channels, ``w_down``/``b_down`` project back to a scalar.
    """

    kernel_size: int
    w_up: np.ndarray  # (N^2, C)
    b_up: np.ndarray  # (N^2, C)
    w_down: np.ndarray  # (N^2, C)
    b_down: np.ndarray  # (N^2,)

    def __post_init__(self):
        n2 = self.kernel_size**2
        if self.w_up.shape[0] != n2 or self.b_down.shape != (n2,):
            raise ConfigError("per-offset parameter groups must number N^2")
        if not (self.w_up.shape == self.b_up.shape == self.w_down.shape):
            raise ConfigError("w_up/b_up/w_down must agree in shape")

    @property
    def hidden(self) -> int:
        return self.w_up.shape[1]

    def curves(self):
        """Collapse each offset's map to scalar slope/intercept.

        z_k(x) = slope_k * x + intercept_k before the clamp; exact because
        the lift/project pair is affine in the pixel value.
        """
        slope = np.einsum("kc,kc->k", self.w_up, self.w_down)
        intercept = np.einsum("kc,kc->k", self.b_up, self.w_down) + self.b_down
        return slope, intercept


@dataclass
class BlockParams:
    """Dense mixing block: affine layers with ReLU between, clamp at the end.

    ``weights[i]`` has shape (fan_in, fan_out); layer 0 consumes the
    flattened window (4 values for 2x2 kinds, 1 otherwise).
    """

    kind: BlockKind
    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)

    @property
    def in_size(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_channels(self) -> int:
        return self.weights[-1].shape[1]


@dataclass(frozen=True)
class BranchConfig:
    rc_kernel: int | None  # None: the block sees the stage input directly
    block_kind: BlockKind
    head_channels: int


@dataclass(frozen=True)
class NetworkConfig:
    stages: tuple  # tuple of tuples of BranchConfig
    scale: int = 4
    rc_hidden: int = 64
    hidden_width: int = 64
    hidden_depth: int = 3
    quantize_between_stages: bool = True
    rotation_ensemble: bool = True

    def validate(self) -> "NetworkConfig":
        if self.scale < 1:
            raise ConfigError("scale must be >= 1")
        if len(self.stages) < 1:
            raise ConfigError("need at least one stage")
        for si, stage in enumerate(self.stages):
            if len(stage) < 1:
                raise ConfigError(f"stage {si} has no branches")
            final = si == len(self.stages) - 1
            for bi, br in enumerate(stage):
                if br.rc_kernel is not None and br.rc_kernel < 1:
                    raise ConfigError(f"stage {si} branch {bi}: bad rc kernel")
                want = self.scale**2 if final else 1
                if br.head_channels != want:
                    raise ConfigError(
                        f"stage {si} branch {bi}: head_channels must be {want} "
                        f"({'r^2 on the final stage' if final else 'one plane between stages'})"
                    )
        return self

    def to_dict(self) -> dict:
        return {
            "scale": self.scale,
            "rc_hidden": self.rc_hidden,
            "hidden_width": self.hidden_width,
            "hidden_depth": self.hidden_depth,
            "quantize_between_stages": self.quantize_between_stages,
            "rotation_ensemble": self.rotation_ensemble,
            "stages": [
                [
                    {
                        "rc": br.rc_kernel,
                        "block": br.block_kind.value,
                        "head": br.head_channels,
                    }
                    for br in stage
                ]
                for stage in self.stages
            ],
        }

    @staticmethod
    def from_dict(doc: dict) -> "NetworkConfig":
        try:
            stages = tuple(
                tuple(
                    BranchConfig(
                        rc_kernel=br.get("rc"),
                        block_kind=BlockKind(br["block"]),
                        head_channels=int(br["head"]),
                    )
                    for br in stage
                )
                for stage in doc["stages"]
            )
            cfg = NetworkConfig(
                stages=stages,
                scale=int(doc.get("scale", 4)),
                rc_hidden=int(doc.get("rc_hidden", 64)),
                hidden_width=int(doc.get("hidden_width", 64)),
                hidden_depth=int(doc.get("hidden_depth", 3)),
                quantize_between_stages=bool(doc.get("quantize_between_stages", True)),
                rotation_ensemble=bool(doc.get("rotation_ensemble", True)),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad network config document: {exc}") from exc
        return cfg.validate()


@dataclass
class BranchParams:
    rc: RcParams | None
    block: BlockParams


@dataclass
class NetworkParams:
    config: NetworkConfig
    stages: list  # list of lists of BranchParams


def _uniform(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _init_block(rng, kind: BlockKind, in_size, hidden, depth, out_channels) -> BlockParams:
    dims = [in_size, out_channels] if depth == 0 else [in_size] + [hidden] * (depth + 1) + [out_channels]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(_uniform(rng, fan_in, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    biases[-1][:] = 0.5  # untrained output sits at mid-gray
    return BlockParams(kind=kind, weights=weights, biases=biases)


def init_params(config: NetworkConfig, rng: np.random.Generator) -> NetworkParams:
    """Fan-in-scaled uniform init; per-offset intercepts start at mid-gray."""
    config.validate()
    stages = []
    for stage in config.stages:
        branches = []
        for br in stage:
            rc = None
            if br.rc_kernel is not None:
                n2, c = br.rc_kernel**2, config.rc_hidden
                rc = RcParams(
                    kernel_size=br.rc_kernel,
                    w_up=rng.uniform(-1.0, 1.0, size=(n2, c)),
                    b_up=np.zeros((n2, c)),
                    w_down=_uniform(rng, c, (n2, c)),
                    b_down=np.full(n2, 0.5),
                )
            block = _init_block(
                rng,
                br.block_kind,
                in_size=br.block_kind.window ** 2,
                hidden=config.hidden_width,
                depth=config.hidden_depth,
                out_channels=br.head_channels,
            )
            branches.append(BranchParams(rc=rc, block=block))
        stages.append(branches)
    return NetworkParams(config=config, stages=stages)


def named_arrays(net: NetworkParams):
    """Deterministic (name, array) walk over every parameter tensor."""
    for si, stage in enumerate(net.stages):
        for bi, br in enumerate(stage):
            prefix = f"stage{si}.branch{bi}"
            if br.rc is not None:
                yield f"{prefix}.rc.w_up", br.rc.w_up
                yield f"{prefix}.rc.b_up", br.rc.b_up
                yield f"{prefix}.rc.w_down", br.rc.w_down
                yield f"{prefix}.rc.b_down", br.rc.b_down
            for li in range(len(br.block.weights)):
                yield f"{prefix}.block.w{li}", br.block.weights[li]
                yield f"{prefix}.block.b{li}", br.block.biases[li]


# ---------------------------------------------------------------------------
# per-offset map unit
# ---------------------------------------------------------------------------


def _offset_windows(plane: np.ndarray, n: int) -> np.ndarray:
    """(N^2, ..., H-N+1, W-N+1) view, one slice per window offset.

    The plane may carry leading batch axes; windows slide over the
    trailing two.
    """
    view = np.lib.stride_tricks.sliding_window_view(plane, (n, n), axis=(-2, -1))
    stacked = view.reshape(view.shape[:-2] + (n * n,))
    return np.moveaxis(stacked, -1, 0)


def _rc_eval(plane: np.ndarray, params: RcParams):
    n = params.kernel_size
    if plane.shape[-2] < n or plane.shape[-1] < n:
        raise DataError(f"plane {plane.shape} smaller than the {n}x{n} window")
    slope, intercept = params.curves()
    wins = _offset_windows(plane, n)
    bshape = (-1,) + (1,) * plane.ndim
    z_raw = slope.reshape(bshape) * wins + intercept.reshape(bshape)
    out = np.clip(z_raw, 0.0, 1.0).mean(axis=0)
    return out, (wins, z_raw)


def rc_forward(plane: np.ndarray, params: RcParams) -> np.ndarray:
    """Apply the per-offset maps and average; output shrinks by N-1 per axis."""
    return _rc_eval(plane, params)[0]


def rc_backward(plane: np.ndarray, params: RcParams, upstream: np.ndarray, cache=None):
    """Exact gradients of the clamped-per-offset mean.

    The clamp contributes unit gradient strictly inside (0, 1) and zero
    outside.  Returns (input_grad, grads) with grads keyed by field name.
    """
    n = params.kernel_size
    if cache is None:
        _, cache = _rc_eval(plane, params)
    wins, z_raw = cache
    out_shape = z_raw.shape[1:]
    oh, ow = out_shape[-2], out_shape[-1]
    if upstream.shape != out_shape:
        raise DataError(f"upstream {upstream.shape} does not match output {out_shape}")
    inside = (z_raw > 0.0) & (z_raw < 1.0)
    u = np.where(inside, upstream[None], 0.0) / (n * n)
    reduce_axes = tuple(range(1, u.ndim))
    s0 = u.sum(axis=reduce_axes)  # (N^2,)
    s1 = (u * wins).sum(axis=reduce_axes)
    grads = {
        "w_up": params.w_down * s1[:, None],
        "b_up": params.w_down * s0[:, None],
        "w_down": params.w_up * s1[:, None] + params.b_up * s0[:, None],
        "b_down": s0,
    }
    slope, _ = params.curves()
    input_grad = np.zeros_like(plane)
    for k in range(n * n):
        i, j = divmod(k, n)
        input_grad[..., i : i + oh, j : j + ow] += slope[k] * u[k]
    return input_grad, grads


# ---------------------------------------------------------------------------
# dense mixing block
# ---------------------------------------------------------------------------

_WINDOW2_OFFSETS = ((0, 0), (0, 1), (1, 0), (1, 1))


def _block_inputs(plane: np.ndarray, window: int):
    if window == 1:
        return plane.reshape(-1, 1), plane.shape
    if plane.shape[-2] < 2 or plane.shape[-1] < 2:
        raise DataError(f"2x2 block needs at least a 2x2 plane, got {plane.shape}")
    view = np.lib.stride_tricks.sliding_window_view(plane, (2, 2), axis=(-2, -1))
    out_shape = view.shape[:-2]  # (..., H-1, W-1)
    return view.reshape(-1, 4), out_shape


def block_apply(x: np.ndarray, params: BlockParams) -> np.ndarray:
    """Run the affine/ReLU stack on pre-flattened windows: (P, in) -> (P, out)."""
    h = x
    last = len(params.weights) - 1
    for li, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if li < last:
            h = np.maximum(h, 0.0)
    return np.clip(h, 0.0, 1.0)


def _block_eval(plane: np.ndarray, params: BlockParams):
    flat, out_hw = _block_inputs(plane, params.kind.window)
    layer_inputs = []
    h = flat
    last = len(params.weights) - 1
    for li, (w, b) in enumerate(zip(params.weights, params.biases)):
        layer_inputs.append(h)
        h = h @ w + b
        if li < last:
            h = np.maximum(h, 0.0)
    raw = h
    out = np.clip(raw, 0.0, 1.0)
    return out.reshape(*out_hw, params.out_channels), (flat, layer_inputs, raw, out_hw)


def convblock_forward(plane: np.ndarray, params: BlockParams) -> np.ndarray:
    """Run the block over every window; returns (H', W', head_channels).

    2x2 kinds shrink the plane by one per axis, 1-input kinds keep it.
    """
    return _block_eval(plane, params)[0]


def convblock_backward(plane: np.ndarray, params: BlockParams, upstream: np.ndarray, cache=None):
    """Backprop through clamp, affine stack, and ReLUs; exact gradients."""
    if cache is None:
        _, cache = _block_eval(plane, params)
    flat, layer_inputs, raw, out_hw = cache
    g = upstream.reshape(-1, params.out_channels) * ((raw > 0.0) & (raw < 1.0))
    w_grads = [None] * len(params.weights)
    b_grads = [None] * len(params.biases)
    for li in range(len(params.weights) - 1, -1, -1):
        w_grads[li] = layer_inputs[li].T @ g
        b_grads[li] = g.sum(axis=0)
        g = g @ params.weights[li].T
        if li > 0:
            # ReLU mask: the stored input of layer li is its rectified output
            g = np.where(layer_inputs[li] > 0.0, g, 0.0)
    grads = {}
    for li in range(len(params.weights)):
        grads[f"w{li}"] = w_grads[li]
        grads[f"b{li}"] = b_grads[li]
    input_grad = np.zeros_like(plane)
    if params.kind.window == 1:
        input_grad += g.reshape(plane.shape)
    else:
        oh, ow = out_hw[-2], out_hw[-1]
        g4 = g.reshape(out_hw + (4,))
        for t, (di, dj) in enumerate(_WINDOW2_OFFSETS):
            input_grad[..., di : di + oh, dj : dj + ow] += g4[..., t]
    return input_grad, grads


# ---------------------------------------------------------------------------
# assembly pieces
# ---------------------------------------------------------------------------


def pixel_shuffle(tensor: np.ndarray, r: int) -> np.ndarray:
    """(..., H, W, r^2) -> (..., H*r, W*r); channel k lands at (k // r, k % r)."""
    *lead, h, w, c = tensor.shape
    if c != r * r:
        raise DataError(f"pixel_shuffle needs r^2={r * r} channels, got {c}")
    t = tensor.reshape(*lead, h, w, r, r)
    t = np.moveaxis(t, -2, -3)  # (..., h, r, w, r)
    return t.reshape(*lead, h * r, w * r)


def pixel_unshuffle(plane: np.ndarray, r: int) -> np.ndarray:
    """Inverse of pixel_shuffle."""
    *lead, hr, wr = plane.shape
    if hr % r or wr % r:
        raise DataError(f"plane {plane.shape} not divisible by r={r}")
    h, w = hr // r, wr // r
    t = plane.reshape(*lead, h, r, w, r)
    t = np.moveaxis(t, -3, -2)  # (..., h, w, r, r)
    return t.reshape(*lead, h, w, r * r)


def quantize_sim(plane: np.ndarray) -> np.ndarray:
    """8-bit rounding in float (half up); gradient is straight-through."""
    return np.floor(plane * 255.0 + 0.5) / 255.0


def _branch_pad(br: BranchConfig):
    n = br.rc_kernel or 1
    total = (n - 1) + (br.block_kind.window - 1)
    before = total // 2
    return before, total - before


def _branch_forward(plane: np.ndarray, cfg: BranchConfig, params: BranchParams, want_cache):
    before, after = _branch_pad(cfg)
    padded = pad_replicate(plane, before, before, after, after)
    rc_cache = None
    if params.rc is not None:
        v, rc_cache = _rc_eval(padded, params.rc)
    else:
        v = padded
    out, block_cache = _block_eval(v, params.block)
    if want_cache:
        return out, (padded, rc_cache, v, block_cache)
    return out, None


def _fold_pad(g_padded: np.ndarray, before: int, out_shape):
    """Adjoint of replicate padding: border gradients fold onto edge pixels."""
    h, w = out_shape[-2], out_shape[-1]
    rows = np.clip(np.arange(g_padded.shape[-2]) - before, 0, h - 1)
    cols = np.clip(np.arange(g_padded.shape[-1]) - before, 0, w - 1)
    folded = np.zeros(out_shape)
    if g_padded.ndim == 2:
        np.add.at(folded, (rows[:, None], cols[None, :]), g_padded)
    else:
        batch = np.arange(out_shape[0])
        np.add.at(
            folded,
            (batch[:, None, None], rows[None, :, None], cols[None, None, :]),
            g_padded,
        )
    return folded


def stage_forward(plane, stage_cfg, stage_params, *, scale, final, rotation_ensemble, quantize, want_cache=False):
    """One stage: branches in parallel, optional 4-rotation ensemble.

    All (rotation, branch) results are averaged in one step, then the
    plane is either clamped (final stage, after pixel shuffle) or pushed
    through simulated 8-bit quantization so later stages train on the
    value grid they will see once cached.
    """
    rotations = (0, 1, 2, 3) if rotation_ensemble else (0,)
    acc = None
    caches = []
    for k in rotations:
        rp = rotate90(plane, k)
        for cfg, params in zip(stage_cfg, stage_params):
            out, cache = _branch_forward(rp, cfg, params, want_cache)
            if final:
                hr = rotate90(pixel_shuffle(out, scale), -k)
            else:
                hr = rotate90(out[..., 0], -k)
            acc = hr if acc is None else acc + hr
            if want_cache:
                caches.append(cache)
    mean = acc / (len(rotations) * len(stage_cfg))
    if final:
        result = np.clip(mean, 0.0, 1.0)
        clamp_state = mean
    else:
        result = quantize_sim(mean) if quantize else mean
        clamp_state = None
    if want_cache:
        return result, (caches, rotations, clamp_state)
    return result


def stage_backward(upstream, stage_cfg, stage_params, stage_cache, grads, *, scale, final, stage_index, in_shape):
    caches, rotations, clamp_state = stage_cache
    if final:
        upstream = np.where((clamp_state > 0.0) & (clamp_state < 1.0), upstream, 0.0)
    # quantize_sim is straight-through: gradient passes unchanged
    share = 1.0 / (len(rotations) * len(stage_cfg))
    g_in = np.zeros(in_shape)
    ci = 0
    for k in rotations:
        for bi, (cfg, params) in enumerate(zip(stage_cfg, stage_params)):
            g_hr = rotate90(upstream, k) * share
            if final:
                g_out = pixel_unshuffle(g_hr, scale)
            else:
                g_out = g_hr[..., None]
            prefix = f"stage{stage_index}.branch{bi}"
            padded, rc_cache, v, block_cache = caches[ci]
            g_v, block_grads = convblock_backward(v, params.block, g_out, cache=block_cache)
            for key, val in block_grads.items():
                grads[f"{prefix}.block.{key}"] += val
            if params.rc is not None:
                g_padded, rc_grads = rc_backward(padded, params.rc, g_v, cache=rc_cache)
                for key, val in rc_grads.items():
                    grads[f"{prefix}.rc.{key}"] += val
            else:
                g_padded = g_v
            before, _ = _branch_pad(cfg)
            if k % 2 == 0:
                rot_shape = in_shape
            else:
                rot_shape = in_shape[:-2] + (in_shape[-1], in_shape[-2])
            g_in += rotate90(_fold_pad(g_padded, before, rot_shape), -k)
            ci += 1
    return g_in


def network_forward_cached(plane: np.ndarray, net: NetworkParams):
    """Forward pass keeping every intermediate needed for backprop."""
    cfg = net.config
    x = plane
    stage_io = []
    stage_caches = []
    for si, (stage_cfg, stage_params) in enumerate(zip(cfg.stages, net.stages)):
        final = si == len(cfg.stages) - 1
        stage_io.append(x)
        x, cache = stage_forward(
            x,
            stage_cfg,
            stage_params,
            scale=cfg.scale,
            final=final,
            rotation_ensemble=cfg.rotation_ensemble,
            quantize=cfg.quantize_between_stages,
            want_cache=True,
        )
        stage_caches.append(cache)
    return x, (stage_io, stage_caches)


def network_forward(plane: np.ndarray, net: NetworkParams) -> np.ndarray:
    """Upscale a unit-range plane to scale x its size (float path)."""
    cfg = net.config
    x = plane
    for si, (stage_cfg, stage_params) in enumerate(zip(cfg.stages, net.stages)):
        x = stage_forward(
            x,
            stage_cfg,
            stage_params,
            scale=cfg.scale,
            final=si == len(cfg.stages) - 1,
            rotation_ensemble=cfg.rotation_ensemble,
            quantize=cfg.quantize_between_stages,
        )
    return x


def zero_grads(net: NetworkParams) -> dict:
    return {name: np.zeros_like(arr) for name, arr in named_arrays(net)}


def network_backward(upstream: np.ndarray, net: NetworkParams, cache, grads: dict | None = None):
    """Gradients of every parameter for a prior cached forward pass."""
    cfg = net.config
    stage_io, stage_caches = cache
    if grads is None:
        grads = zero_grads(net)
    g = upstream
    for si in range(len(cfg.stages) - 1, -1, -1):
        g = stage_backward(
            g,
            cfg.stages[si],
            net.stages[si],
            stage_caches[si],
            grads,
            scale=cfg.scale,
            final=si == len(cfg.stages) - 1,
            stage_index=si,
            in_shape=stage_io[si].shape,
        )
    return g, grads


# ---------------------------------------------------------------------------
# receptive-field calculator
# ---------------------------------------------------------------------------


def _stage_footprint(stage) -> tuple:
    """(n, m) of the widest branch: n from the per-offset unit, m from the block."""
    best = (1, 1)
    for br in stage:
        n = br.rc_kernel or 1
        m = br.block_kind.window
        if n + m - 1 > best[0] + best[1] - 1:
            best = (n, m)
    return best


def receptive_field(config: NetworkConfig) -> int:
    """Side length of the input square influencing one output pixel.

    The rotation ensemble mirrors each stage's one-sided window, which
    nearly doubles the footprint; cascading a second stage extends it
    again around the (now centered) anchor.

    A two-stage cascade with no per-offset units anywhere models the
    multi-pattern LUT family whose dilated 2x2 kernels span a 3x3
    neighborhood per stage, so its block footprint counts as 2m - 1.
    """
    if not 1 <= len(config.stages) <= 2:
        raise ConfigError("receptive-field algebra covers 1- or 2-stage networks only")
    (n1, m1) = _stage_footprint(config.stages[0])
    two_stage = len(config.stages) == 2
    no_rc = all(br.rc_kernel in (None, 1) for stage in config.stages for br in stage)
    if two_stage:
        n2, m2 = _stage_footprint(config.stages[1])
        if no_rc:
            m1, m2 = 2 * m1 - 1, 2 * m2 - 1  # dilated multi-pattern span
    if not config.rotation_ensemble:
        size = n1 + m1 - 1
        if two_stage:
            size += n2 + m2 - 2
        return size
    if not two_stage:
        return 2 * (m1 + n1 - 1) - 1
    if no_rc:
        return 2 * m1 + 2 * m2 - 3
    return 2 * m1 + 2 * m2 + 2 * n1 + 2 * n2 - 7


# ---------------------------------------------------------------------------
# checkpoint container: little-endian float32 arrays + JSON manifest
# ---------------------------------------------------------------------------

_CKPT_MAGIC = b"RCKP"
_CKPT_VERSION = 1


def save_checkpoint(path, net: NetworkParams, extra_arrays=None, meta=None) -> None:
    """Write parameters (and optional extra arrays) as f32 LE + manifest."""
    entries = []
    payload = bytearray()
    arrays = list(named_arrays(net)) + sorted((extra_arrays or {}).items())
    for name, arr in arrays:
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": len(payload)})
        payload.extend(data)
    manifest = {
        "config": net.config.to_dict(),
        "arrays": entries,
        "meta": meta or {},
    }
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<HI", _CKPT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(bytes(payload))


def load_checkpoint(path):
    """Read back (NetworkParams, extra_arrays, meta)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 10 or raw[:4] != _CKPT_MAGIC:
        raise CorruptPackError(f"{path}: not a checkpoint file")
    version, blob_len = struct.unpack("<HI", raw[4:10])
    if version != _CKPT_VERSION:
        raise CorruptPackError(f"{path}: unsupported checkpoint version {version}")
    manifest = json.loads(raw[10 : 10 + blob_len].decode("utf-8"))
    payload = raw[10 + blob_len :]
    config = NetworkConfig.from_dict(manifest["config"])
    loaded = {}
    for entry in manifest["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        chunk = payload[start : start + 4 * count]
        if len(chunk) != 4 * count:
            raise CorruptPackError(f"{path}: truncated checkpoint payload")
        loaded[entry["name"]] = np.frombuffer(chunk, dtype="<f4").astype(np.float64).reshape(shape)
    net = init_params(config, np.random.default_rng(0))
    consumed = set()
    for name, arr in named_arrays(net):
        if name not in loaded:
            raise CorruptPackError(f"{path}: checkpoint missing array {name}")
        arr[...] = loaded[name]
        consumed.add(name)
    extra = {k: v for k, v in loaded.items() if k not in consumed}
    return net, extra, manifest.get("meta", {})
