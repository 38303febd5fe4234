"""Bake a trained network into look-up tables and (de)serialize the result.

Table entries are absolute unsigned-8-bit values: entry = round(255 * y)
half up, where y is the float network's clamped output at the entry's
sample point.  Sampled tables hold 17 levels per input dimension
(every 16th code plus the top code 255); interpolation reconstructs the
rest at inference time.

Reported "KB/MB/GB" sizes are binary units (KiB/MiB/GiB).
"""

from __future__ import annotations

import re
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, CorruptPackError
from .refnet import BlockKind, BlockParams, NetworkParams, RcParams, block_apply

__all__ = [
    "SAMPLE_LEVELS",
    "sample_points",
    "Lut1D",
    "Lut4D",
    "Lut1Input",
    "BranchTables",
    "LutPack",
    "transfer_rc",
    "transfer_block4",
    "transfer_block1",
    "transfer",
    "write_pack",
    "read_pack",
    "pack_to_bytes",
    "pack_from_bytes",
    "size_formula",
    "format_bytes",
]

SAMPLE_LEVELS = 17

_PACK_MAGIC = b"RCLT"
_PACK_VERSION = 1

_KIND_1D = 1
_KIND_4D = 2
_KIND_1IN = 3


def sample_points(interval_bits: int = 4) -> np.ndarray:
    """Input levels cached by sampled tables: 0, 16, ..., 240, 255."""
    if interval_bits != 4:
        raise ConfigError(f"only the 2^4 sampling interval is supported, got 2^{interval_bits}")
    return np.minimum(np.arange(SAMPLE_LEVELS) * 16, 255).astype(np.uint8)


def _quantize_entries(y: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(y * 255.0 + 0.5), 0, 255).astype(np.uint8)


@dataclass
class Lut1D:
    """One window offset's scalar map, tabulated."""

    offset_index: int
    entries: np.ndarray  # uint8, (17,) sampled or (256,) full

    @property
    def sample_count(self) -> int:
        return self.entries.shape[0]

    @property
    def nbytes(self) -> int:
        return self.entries.nbytes


@dataclass
class Lut4D:
    """2x2-window block tabulated on the sampled 4D grid."""

    entries: np.ndarray  # uint8, (17, 17, 17, 17, out_channels)

    @property
    def out_channels(self) -> int:
        return self.entries.shape[-1]

    @property
    def nbytes(self) -> int:
        return self.entries.nbytes


@dataclass
class Lut1Input:
    """Single-pixel block tabulated at full 256-level resolution."""

    entries: np.ndarray  # uint8, (256, out_channels)

    @property
    def out_channels(self) -> int:
        return self.entries.shape[-1]

    @property
    def nbytes(self) -> int:
        return self.entries.nbytes


@dataclass
class BranchTables:
    rc_kernel: int | None
    rc: list | None  # list[Lut1D] ordered by offset, or None
    block: object  # Lut4D | Lut1Input

    @property
    def nbytes(self) -> int:
        total = self.block.nbytes
        if self.rc:
            total += sum(t.nbytes for t in self.rc)
        return total


@dataclass
class LutPack:
    """Deployable artifact: every table plus the topology to run them."""

    scale: int
    stages: list = field(default_factory=list)  # list[list[BranchTables]]
    version: int = _PACK_VERSION

    def total_bytes(self) -> int:
        """Entry bytes only; the container header is excluded by contract."""
        return sum(bt.nbytes for stage in self.stages for bt in stage)

    def table_items(self):
        """Canonical (id, kind, table) walk used by the file layout."""
        for si, stage in enumerate(self.stages):
            for bi, bt in enumerate(stage):
                if bt.rc is not None:
                    for t in bt.rc:
                        yield (
                            f"s{si}.b{bi}.rc{bt.rc_kernel}.o{t.offset_index:02d}",
                            _KIND_1D,
                            t,
                        )
                kind = _KIND_4D if isinstance(bt.block, Lut4D) else _KIND_1IN
                yield f"s{si}.b{bi}.block", kind, bt.block


# ---------------------------------------------------------------------------
# network -> tables
# ---------------------------------------------------------------------------


def transfer_rc(params: RcParams, sampled: bool = True) -> list:
    """Tabulate each offset's scalar map at the sampled (or all) levels."""
    levels = sample_points() if sampled else np.arange(256, dtype=np.uint8)
    slope, intercept = params.curves()
    z = slope[:, None] * (levels.astype(np.float64) / 255.0)[None, :] + intercept[:, None]
    entries = _quantize_entries(np.clip(z, 0.0, 1.0))
    return [Lut1D(offset_index=k, entries=entries[k].copy()) for k in range(entries.shape[0])]


def transfer_block4(params: BlockParams) -> Lut4D:
    """Evaluate the block at every sampled 2x2 window (17^4 combinations)."""
    if params.kind not in (BlockKind.IN4_OUT1, BlockKind.IN4_HEAD):
        raise ConfigError(f"4D transfer needs a 2x2-window block, got {params.kind.value}")
    levels = sample_points().astype(np.float64) / 255.0
    grid = np.stack(np.meshgrid(levels, levels, levels, levels, indexing="ij"), axis=-1)
    flat = grid.reshape(-1, 4)
    out = block_apply(flat, params)
    entries = _quantize_entries(out).reshape(
        SAMPLE_LEVELS, SAMPLE_LEVELS, SAMPLE_LEVELS, SAMPLE_LEVELS, params.out_channels
    )
    return Lut4D(entries=entries)


def transfer_block1(params: BlockParams) -> Lut1Input:
    """Evaluate the single-pixel block at all 256 levels (no sampling)."""
    if params.kind is not BlockKind.IN1_OUT4:
        raise ConfigError(f"1-input transfer needs a 1-pixel block, got {params.kind.value}")
    x = (np.arange(256, dtype=np.float64) / 255.0)[:, None]
    out = block_apply(x, params)
    return Lut1Input(entries=_quantize_entries(out))


def transfer(net: NetworkParams) -> LutPack:
    """Cache the whole network as a pack, stage by stage."""
    pack = LutPack(scale=net.config.scale)
    for stage_cfg, stage_params in zip(net.config.stages, net.stages):
        tables = []
        for cfg, params in zip(stage_cfg, stage_params):
            rc_tables = transfer_rc(params.rc) if params.rc is not None else None
            if cfg.block_kind is BlockKind.IN1_OUT4:
                block = transfer_block1(params.block)
            else:
                block = transfer_block4(params.block)
            tables.append(BranchTables(rc_kernel=cfg.rc_kernel, rc=rc_tables, block=block))
        pack.stages.append(tables)
    return pack


# ---------------------------------------------------------------------------
# container format
# ---------------------------------------------------------------------------


def pack_to_bytes(pack: LutPack) -> bytes:
    items = list(pack.table_items())
    out = bytearray()
    out += _PACK_MAGIC
    out += struct.pack("<HBH", pack.version, pack.scale, len(items))
    crc = 0
    for table_id, kind, table in items:
        ident = table_id.encode("utf-8")
        entries = np.ascontiguousarray(table.entries, dtype=np.uint8)
        if kind == _KIND_1D:
            out_channels, sample_count = 1, entries.shape[0]
        elif kind == _KIND_4D:
            out_channels, sample_count = table.out_channels, SAMPLE_LEVELS
        else:
            out_channels, sample_count = table.out_channels, 256
        out += struct.pack("<H", len(ident))
        out += ident
        out += struct.pack("<BII", kind, out_channels, sample_count)
        payload = entries.tobytes()
        out += payload
        crc = zlib.crc32(payload, crc)
    out += struct.pack("<I", crc & 0xFFFFFFFF)
    return bytes(out)


_ID_RC = re.compile(r"^s(\d+)\.b(\d+)\.rc(\d+)\.o(\d+)$")
_ID_BLOCK = re.compile(r"^s(\d+)\.b(\d+)\.block$")


class _Reader:
    def __init__(self, raw):
        self.raw = raw
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.raw):
            raise CorruptPackError("pack file truncated")
        chunk = self.raw[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def pack_from_bytes(raw: bytes) -> LutPack:
    rd = _Reader(raw)
    if rd.take(4) != _PACK_MAGIC:
        raise CorruptPackError("bad magic: not a LUT pack")
    version, scale, count = rd.unpack("<HBH")
    if version != _PACK_VERSION:
        raise CorruptPackError(f"unsupported pack version {version}")
    crc = 0
    branches = {}  # (si, bi) -> {"rc": {offset: Lut1D}, "rc_kernel": n, "block": table}
    for _ in range(count):
        (id_len,) = rd.unpack("<H")
        table_id = rd.take(id_len).decode("utf-8")
        kind, out_channels, sample_count = rd.unpack("<BII")
        if kind == _KIND_1D:
            n_bytes = sample_count
        elif kind == _KIND_4D:
            n_bytes = sample_count**4 * out_channels
        elif kind == _KIND_1IN:
            n_bytes = sample_count * out_channels
        else:
            raise CorruptPackError(f"unknown table kind {kind}")
        payload = rd.take(n_bytes)
        crc = zlib.crc32(payload, crc)
        entries = np.frombuffer(payload, dtype=np.uint8).copy()
        if kind == _KIND_1D:
            m = _ID_RC.match(table_id)
            if not m:
                raise CorruptPackError(f"1D table with unparseable id {table_id!r}")
            si, bi, n, offset = map(int, m.groups())
            slot = branches.setdefault((si, bi), {"rc": {}, "rc_kernel": n, "block": None})
            if slot["rc_kernel"] != n:
                raise CorruptPackError(f"branch s{si}.b{bi} mixes rc kernel sizes")
            if sample_count not in (SAMPLE_LEVELS, 256):
                raise CorruptPackError(f"{table_id}: bad sample count {sample_count}")
            slot["rc"][offset] = Lut1D(offset_index=offset, entries=entries)
        else:
            m = _ID_BLOCK.match(table_id)
            if not m:
                raise CorruptPackError(f"block table with unparseable id {table_id!r}")
            si, bi = map(int, m.groups())
            slot = branches.setdefault((si, bi), {"rc": {}, "rc_kernel": None, "block": None})
            if slot["block"] is not None:
                raise CorruptPackError(f"duplicate block table for s{si}.b{bi}")
            if kind == _KIND_4D:
                if sample_count != SAMPLE_LEVELS:
                    raise CorruptPackError(f"{table_id}: 4D tables are sampled at 17 levels")
                slot["block"] = Lut4D(
                    entries=entries.reshape(
                        SAMPLE_LEVELS, SAMPLE_LEVELS, SAMPLE_LEVELS, SAMPLE_LEVELS, out_channels
                    )
                )
            else:
                if sample_count != 256:
                    raise CorruptPackError(f"{table_id}: 1-input tables hold 256 rows")
                slot["block"] = Lut1Input(entries=entries.reshape(256, out_channels))
    (stored_crc,) = rd.unpack("<I")
    if rd.pos != len(raw):
        raise CorruptPackError("trailing bytes after checksum")
    if stored_crc != (crc & 0xFFFFFFFF):
        raise CorruptPackError("payload checksum mismatch")

    if not branches:
        raise CorruptPackError("pack holds no tables")
    n_stages = max(si for si, _ in branches) + 1
    pack = LutPack(scale=scale, version=version)
    for si in range(n_stages):
        keys = sorted(bi for s, bi in branches if s == si)
        if keys != list(range(len(keys))) or not keys:
            raise CorruptPackError(f"stage {si} has missing branch indices")
        stage = []
        for bi in keys:
            slot = branches[(si, bi)]
            if slot["block"] is None:
                raise CorruptPackError(f"branch s{si}.b{bi} lacks its block table")
            rc_tables = None
            if slot["rc"]:
                n = slot["rc_kernel"]
                want = list(range(n * n))
                if sorted(slot["rc"]) != want:
                    raise CorruptPackError(f"branch s{si}.b{bi} has incomplete offset tables")
                rc_tables = [slot["rc"][k] for k in want]
            stage.append(
                BranchTables(
                    rc_kernel=slot["rc_kernel"] if rc_tables else None,
                    rc=rc_tables,
                    block=slot["block"],
                )
            )
        pack.stages.append(stage)
    final = pack.stages[-1]
    for bi, bt in enumerate(final):
        if bt.block.out_channels != scale**2:
            raise CorruptPackError(
                f"final-stage branch {bi} holds {bt.block.out_channels} channels, want {scale**2}"
            )
    for si in range(n_stages - 1):
        for bi, bt in enumerate(pack.stages[si]):
            if bt.block.out_channels != 1:
                raise CorruptPackError(f"non-final branch s{si}.b{bi} must output one plane")
    return pack


def write_pack(pack: LutPack, path) -> None:
    with open(path, "wb") as fh:
        fh.write(pack_to_bytes(pack))


def read_pack(path) -> LutPack:
    with open(path, "rb") as fh:
        return pack_from_bytes(fh.read())


# ---------------------------------------------------------------------------
# size estimation
# ---------------------------------------------------------------------------

_SIZE_KINDS = ("full_srlut", "sampled_srlut", "full_1d")


def size_formula(kind: str, n: int, r: int) -> int:
    """Exact byte count of the three cacheable formulations.

    full_srlut:     every n*n uint8 window combination, r^2 outputs each
    sampled_srlut:  17 levels per window pixel instead of 256
    full_1d:        n^2 independent per-pixel tables, r^2 outputs each

    Uses arbitrary-precision integers, so nothing overflows; the CLI
    renders astronomically large results in exponent form.
    """
    if kind not in _SIZE_KINDS:
        raise ConfigError(f"unknown size kind {kind!r}; pick one of {_SIZE_KINDS}")
    if n < 1 or r < 1:
        raise ConfigError("n and r must be >= 1")
    if kind == "full_srlut":
        return (2**8) ** (n * n) * r * r
    if kind == "sampled_srlut":
        return (2**4 + 1) ** (n * n) * r * r
    return 2**8 * n * n * r * r


_UNITS = ("B", "KB", "MB", "GB", "TB", "PB")


def format_bytes(count: int) -> str:
    """Human-readable size in binary units; huge values in exponent form."""
    if count < 1024:
        return f"{count} B"
    value = count
    for unit in _UNITS[1:]:
        value = value / 1024.0
        if value < 1024.0 or unit == "PB":
            if unit == "PB" and value >= 1e4:
                return f"{value:.1e} PB"
            return f"{value:.3f} {unit}"
    return f"{count} B"
