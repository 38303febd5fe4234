import numpy as np
import pytest

from rclut.errors import DataError
from rclut.imagecore import Colorspace, Image, quantize_u8, rotate90
from rclut.lutengine import (
    LutSim,
    engine_stage,
    lut1d_eval,
    lut4d_eval,
    simplex_weights,
    upscale,
)
from rclut.lutpack import (
    BranchTables,
    Lut1D,
    Lut1Input,
    Lut4D,
    LutPack,
    sample_points,
    transfer,
)
from rclut.presets import preset
from rclut.refnet import init_params, stage_forward


def _round255(y):
    return np.clip(np.floor(np.asarray(y) * 255.0 + 0.5), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# 1D lookups
# ---------------------------------------------------------------------------


def test_lut1d_constant_tables(rng):
    tables = [Lut1D(k, np.full(17, 100, np.uint8)) for k in range(9)]
    window = rng.integers(0, 256, 9)
    assert lut1d_eval(window, tables) == 100


def test_lut1d_full_identity_single():
    table = Lut1D(0, np.arange(256, dtype=np.uint8))
    for v in (0, 17, 128, 255):
        assert lut1d_eval([v], [table]) == v


def test_lut1d_grid_aligned_vs_scalar_oracle(rng):
    # multiples of 16 hit entries exactly: result == round-half-up average
    n2 = 9
    tables = [Lut1D(k, rng.integers(0, 256, 17).astype(np.uint8)) for k in range(n2)]
    for _ in range(200):
        window = rng.integers(0, 16, n2) * 16
        got = lut1d_eval(window, tables)
        vals = [int(tables[k].entries[window[k] // 16]) for k in range(n2)]
        want = (2 * sum(vals) + n2) // (2 * n2)
        assert got == want


def test_lut1d_interpolation_oracle(rng):
    # arbitrary levels: two-point interpolation with the +8 >> 4 rounding
    tables = [Lut1D(0, rng.integers(0, 256, 17).astype(np.uint8))]
    for v in range(256):
        got = lut1d_eval([v], tables)
        e = tables[0].entries.astype(int)
        j, f = v >> 4, v & 15
        want = ((16 - f) * e[j] + f * e[j + 1] + 8) >> 4
        assert got == want


def test_lut1d_count_mismatch(rng):
    tables = [Lut1D(0, np.zeros(17, np.uint8))]
    with pytest.raises(DataError):
        lut1d_eval([1, 2], tables)


# ---------------------------------------------------------------------------
# simplex interpolation
# ---------------------------------------------------------------------------


def test_simplex_zero_fractions():
    sw = simplex_weights([0, 0, 0, 0])
    assert sw.weights[0] == 16
    assert (sw.weights[1:] == 0).all()
    assert (sw.vertices[0] == 0).all()


def test_simplex_all_eights():
    sw = simplex_weights([8, 8, 8, 8])
    assert list(sw.weights) == [8, 0, 0, 0, 8]
    assert (sw.vertices[0] == [0, 0, 0, 0]).all()
    assert (sw.vertices[4] == [1, 1, 1, 1]).all()


def test_simplex_weights_reconstruct_fractions(rng):
    # exact barycentric identity: sum(w_i * vertex_i) == fractions
    for _ in range(3000):
        f = rng.integers(0, 16, 4)
        sw = simplex_weights(f)
        assert sw.weights.sum() == 16
        assert (sw.weights >= 0).all()
        assert ((sw.weights[:, None] * sw.vertices).sum(axis=0) == f).all()
        # vertices form a monotone chain from base to opposite corner
        assert (np.diff(sw.vertices, axis=0) >= 0).all()
        assert (sw.vertices[0] == 0).all()
        assert (sw.vertices[4] == 1).all()


def test_simplex_all_orderings_enumerated():
    # every permutation of distinct fractions picks its own simplex
    from itertools import permutations

    seen = set()
    for perm in permutations((1, 5, 9, 13)):
        sw = simplex_weights(np.array(perm))
        seen.add(tuple(map(tuple, sw.vertices)))
        assert ((sw.weights[:, None] * sw.vertices).sum(axis=0) == perm).all()
    assert len(seen) == 24


def test_simplex_tie_break_is_stable():
    sw = simplex_weights([3, 3, 0, 3])
    # ties resolve by axis order: axes 0, 1, 3 added before axis 2
    assert (sw.vertices[1] == [1, 0, 0, 0]).all()
    assert (sw.vertices[2] == [1, 1, 0, 0]).all()
    assert (sw.vertices[3] == [1, 1, 0, 1]).all()


# ---------------------------------------------------------------------------
# 4D lookups
# ---------------------------------------------------------------------------


def test_lut4d_grid_aligned_exact(rng):
    table = Lut4D(entries=rng.integers(0, 256, (17, 17, 17, 17, 2)).astype(np.uint8))
    for _ in range(100):
        j = rng.integers(0, 17, 4)
        got = lut4d_eval(*(j * 16).clip(0, 255), table)
        if (j == 16).any():
            continue  # 16*16=256 is out of the input domain
        assert (got == table.entries[j[0], j[1], j[2], j[3]]).all()


def test_lut4d_constant_table(rng):
    table = Lut4D(entries=np.full((17, 17, 17, 17, 1), 77, np.uint8))
    for _ in range(50):
        v = rng.integers(0, 256, 4)
        assert lut4d_eval(*v, table)[0] == 77


def test_lut4d_vs_float_barycentric_oracle(rng):
    table = Lut4D(entries=rng.integers(0, 256, (17, 17, 17, 17, 4)).astype(np.uint8))
    worst = 0.0
    for _ in range(1000):
        v = rng.integers(0, 256, 4)
        got = lut4d_eval(*v, table).astype(float)
        j = v >> 4
        sw = simplex_weights(v & 15)
        ref = np.zeros(4)
        for w, vert in zip(sw.weights, sw.vertices):
            c = j + vert
            ref += (w / 16.0) * table.entries[c[0], c[1], c[2], c[3]].astype(float)
        worst = max(worst, np.abs(got - ref).max())
    assert worst <= 1.0 + 1e-9  # integer rounding only


# ---------------------------------------------------------------------------
# staged engine
# ---------------------------------------------------------------------------


def test_engine_constant_tables_constant_output(rng):
    rc = [Lut1D(k, np.full(17, 90, np.uint8)) for k in range(9)]
    block = Lut4D(entries=np.full((17, 17, 17, 17, 16), 50, np.uint8))
    stage = [BranchTables(rc_kernel=3, rc=rc, block=block)]
    out = engine_stage(rng.integers(0, 256, (6, 6)).astype(np.uint8), stage,
                       scale=4, final=True)
    assert out.shape == (24, 24)
    assert (out == 50).all()


def test_engine_grid_fidelity_vs_float_reference(rng):
    # single branch, no ensemble, grid-aligned inputs: the engine equals the
    # quantized float pipeline exactly (2x2-window topology end to end)
    net = init_params(preset("srlut-baseline"), rng)
    pack = transfer(net)
    for trial in range(20):
        plane = (rng.integers(0, 16, (6, 7)) * 16).astype(np.uint8)
        got = engine_stage(plane, pack.stages[0], scale=4, final=True,
                           rotation_ensemble=False)
        ref = stage_forward(plane / 255.0, net.config.stages[0], net.stages[0],
                            scale=4, final=True, rotation_ensemble=False, quantize=False)
        assert (got == _round255(ref)).all()


def test_engine_ensemble_constant_input(rng):
    # constant input: every rotation computes the same pre-shuffle tile, so
    # the ensemble equals the round-half-up mean of 4 rotations of one pass
    net = init_params(preset("rclut-3"), rng)
    pack = transfer(net)
    plane = np.full((8, 8), 96, np.uint8)
    with_e = engine_stage(plane, pack.stages[0], scale=4, final=True,
                          rotation_ensemble=True)
    single = engine_stage(plane, pack.stages[0], scale=4, final=True,
                          rotation_ensemble=False)
    acc = np.zeros_like(single, dtype=np.int64)
    for k in range(4):
        acc += rotate90(single, -k).astype(np.int64)
    want = ((2 * acc + 4) // 8).astype(np.uint8)
    assert (with_e == want).all()


def test_engine_rotation_equivariance_bit_exact(rng):
    net = init_params(preset("rclut-default"), rng)
    pack = transfer(net)

    def run(plane):
        x = plane
        for si, st in enumerate(pack.stages):
            x = engine_stage(x, st, scale=4, final=si == len(pack.stages) - 1)
        return x

    img = rng.integers(0, 256, (7, 11)).astype(np.uint8)
    base = run(img)
    for k in (1, 2, 3):
        got = run(np.ascontiguousarray(rotate90(img, k)))
        assert (got == rotate90(base, k)).all()


def test_upscale_shapes_and_gray(rng):
    net = init_params(preset("rclut-3"), rng)
    pack = transfer(net)
    gray = Image(Colorspace.GRAY, rng.integers(0, 256, (8, 8, 1)).astype(np.uint8))
    out = upscale(gray, pack)
    assert (out.width, out.height) == (32, 32)
    assert out.colorspace is Colorspace.GRAY
    rgb = Image(Colorspace.RGB, rng.integers(0, 256, (6, 9, 3)).astype(np.uint8))
    out = upscale(rgb, pack)
    assert (out.width, out.height) == (36, 24)
    assert out.colorspace is Colorspace.RGB


def test_upscale_constant_pack(rng):
    block = Lut4D(entries=np.full((17, 17, 17, 17, 16), 200, np.uint8))
    pack = LutPack(scale=4, stages=[[BranchTables(rc_kernel=None, rc=None, block=block)]])
    gray = Image(Colorspace.GRAY, rng.integers(0, 256, (5, 5, 1)).astype(np.uint8))
    out = upscale(gray, pack)
    assert (out.data == 200).all()


def test_upscale_empty_rejected(rng):
    net = init_params(preset("rclut-3"), rng)
    pack = transfer(net)
    from rclut.errors import EmptyImageError

    with pytest.raises(EmptyImageError):
        upscale(Image(Colorspace.GRAY, np.zeros((0, 0, 1), np.uint8)), pack)


def test_upscale_determinism(rng):
    net = init_params(preset("rclut-3_5"), rng)
    pack = transfer(net)
    img = Image(Colorspace.RGB, rng.integers(0, 256, (8, 8, 3)).astype(np.uint8))
    a = upscale(img, pack)
    b = upscale(img, pack)
    assert (a.data == b.data).all()


# ---------------------------------------------------------------------------
# float twin (finetuning support)
# ---------------------------------------------------------------------------


def test_sim_matches_engine_within_rounding(rng):
    net = init_params(preset("rclut-3"), rng)
    pack = transfer(net)
    sim = LutSim(pack)
    plane = rng.integers(0, 256, (8, 8)).astype(np.uint8)
    sim_out, _ = sim.forward(plane)
    eng = plane
    for si, st in enumerate(pack.stages):
        eng = engine_stage(eng, st, scale=4, final=si == len(pack.stages) - 1)
    # the twin skips only the per-lookup integer rounding: stay within 2 levels
    assert np.abs(sim_out * 255.0 - eng.astype(float)).max() <= 2.0


def test_sim_single_entry_gradient_is_interpolation_weight():
    # one pixel, one table, identity 256-row head: d out / d entry == weight/16 / 255
    ent = np.arange(0, 256, 16)[:17]
    ent[-1] = 255
    rc = [Lut1D(0, ent.astype(np.uint8))]
    head = Lut1Input(entries=np.arange(256, dtype=np.uint8)[:, None])
    pack = LutPack(scale=1, stages=[[BranchTables(rc_kernel=1, rc=rc, block=head)]])
    sim = LutSim(pack)
    v = 37  # j = 2, f = 5 -> weights 11/16 and 5/16
    out, cache = sim.forward(np.array([[v]], dtype=np.uint8))
    grads = sim.backward(np.array([[1.0]]), cache)
    g = grads["s0.b0.rc1.o00"]
    assert abs(g[2] - (11 / 16) / 255.0) < 1e-12
    assert abs(g[3] - (5 / 16) / 255.0) < 1e-12
    assert np.abs(g).sum() == pytest.approx(1.0 / 255.0)


def test_sim_block_entry_gradcheck(rng):
    net = init_params(preset("rclut-3"), rng)
    pack = transfer(net)
    sim = LutSim(pack)
    x = rng.integers(0, 256, (6, 6)).astype(np.uint8)
    out, cache = sim.forward(x)
    ups = rng.normal(0, 1, out.shape)
    grads = sim.backward(ups, cache)
    tid = "s0.b0.block"
    flat = sim.params[tid].reshape(-1)
    g = grads[tid].reshape(-1)
    nz = np.flatnonzero((np.abs(g) > 1e-7) & (flat > 0.5) & (flat < 254.5))
    take = rng.choice(nz, size=min(40, nz.size), replace=False)
    for idx in take:
        orig = flat[idx]
        flat[idx] = orig + 1.0
        lp = float((sim.forward(x)[0] * ups).sum())
        flat[idx] = orig - 1.0
        lm = float((sim.forward(x)[0] * ups).sum())
        flat[idx] = orig
        num = (lp - lm) / 2.0
        assert abs(g[idx] - num) / max(abs(g[idx]), abs(num), 1e-9) < 1e-6


def test_sim_two_stage_gradients_reach_first_stage(rng):
    net = init_params(preset("rclut-default"), rng)
    pack = transfer(net)
    sim = LutSim(pack)
    x = rng.integers(0, 256, (6, 6)).astype(np.uint8)
    out, cache = sim.forward(x)
    grads = sim.backward(np.ones_like(out), cache)
    stage1_mass = sum(np.abs(grads[t]).sum() for t in grads if t.startswith("s0."))
    assert stage1_mass > 0.0


def test_sim_to_pack_identity_roundtrip(rng):
    net = init_params(preset("rclut-3_5"), rng)
    pack = transfer(net)
    back = LutSim(pack).to_pack()
    from rclut.lutpack import pack_to_bytes

    assert pack_to_bytes(back) == pack_to_bytes(pack)
