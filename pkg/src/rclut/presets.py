"""Named network shapes shipped with the CLI.

Single-stage presets pair one (or several) per-offset units with a
2x2-window head; the two-stage default runs three single-output branches
into a second stage where only the 5x5 branch carries the expensive 4D
head and the other two use cheap per-pixel tables.
"""

from __future__ import annotations

from .errors import ConfigError
from .refnet import BlockKind, BranchConfig, NetworkConfig

__all__ = ["PRESET_NAMES", "preset"]


def _head(rc, scale):
    return BranchConfig(rc_kernel=rc, block_kind=BlockKind.IN4_HEAD, head_channels=scale**2)


def _single_stage(kernels, scale=4):
    return NetworkConfig(stages=(tuple(_head(n, scale) for n in kernels),), scale=scale)


def _two_stage_default(scale=4):
    stage1 = tuple(
        BranchConfig(rc_kernel=n, block_kind=BlockKind.IN4_OUT1, head_channels=1)
        for n in (3, 5, 7)
    )
    stage2 = (
        BranchConfig(rc_kernel=3, block_kind=BlockKind.IN1_OUT4, head_channels=scale**2),
        _head(5, scale),
        BranchConfig(rc_kernel=7, block_kind=BlockKind.IN1_OUT4, head_channels=scale**2),
    )
    return NetworkConfig(stages=(stage1, stage2), scale=scale)


def _mulut_shaped(scale=4):
    # no per-offset units anywhere; used by the RF and size calculators
    stage1 = (BranchConfig(rc_kernel=None, block_kind=BlockKind.IN4_OUT1, head_channels=1),)
    stage2 = (_head(None, scale),)
    return NetworkConfig(stages=(stage1, stage2), scale=scale)


_BUILDERS = {
    "srlut-baseline": lambda: _single_stage([None]),
    "rc5-plus-srlut": lambda: _single_stage([5]),
    "rclut-3": lambda: _single_stage([3]),
    "rclut-3_5": lambda: _single_stage([3, 5]),
    "rclut-5_7": lambda: _single_stage([5, 7]),
    "rclut-3_5_7": lambda: _single_stage([3, 5, 7]),
    "rclut-5_7_9": lambda: _single_stage([5, 7, 9]),
    "rclut-3_5_7-x2": _two_stage_default,
    "rclut-default": _two_stage_default,
    "mulut-shaped": _mulut_shaped,
}

PRESET_NAMES = tuple(sorted(_BUILDERS))


def preset(name: str) -> NetworkConfig:
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"
        ) from None
    return builder().validate()
