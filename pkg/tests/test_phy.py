import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mulsedge import _pykernels, kernels, phy
from mulsedge.phy import (BitPayload, ChannelConfig, CodecError, Modulation, PayloadKind, Q9_9,
                          airtime, decode_reals, encode_reals)


def bits_of(s):
    return [int(ch) for ch in s]


def test_encode_examples():
    assert encode_reals([0.0]).bits.tolist() == [0] * 18
    assert encode_reals([1.5]).bits.tolist() == bits_of("000000001" "100000000")
    v = decode_reals(encode_reals([3.14159]))[0]
    assert v == 3.140625 and abs(v - 3.14159) < 2 ** -9


def test_decode_word_arithmetic():
    assert decode_reals(BitPayload(np.ones(18)))[0] == -(2 ** -9)
    flipped = encode_reals([0.0]).bits.copy()
    flipped[0] ^= 1
    assert decode_reals(BitPayload(flipped))[0] == -256.0


def test_saturation_and_errors():
    np.testing.assert_array_equal(decode_reals(encode_reals([1e6, -1e6])),
                                  [Q9_9.max_value, Q9_9.min_value])
    with pytest.raises(CodecError):
        encode_reals([float("nan")])
    with pytest.raises(CodecError):
        decode_reals(BitPayload(np.zeros(17)))


def test_grid_roundtrip_exact():
    grid = np.arange(-(2 ** 17), 2 ** 17) * 2.0 ** -9
    np.testing.assert_array_equal(decode_reals(encode_reals(grid)), grid)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-255.99, 255.99), min_size=1, max_size=50))
def test_quantisation_error_bound(vals):
    v = np.array(vals)
    err = np.abs(decode_reals(encode_reals(v)) - v)
    assert np.all(err <= 2.0 ** -10 + np.spacing(256.0))
    np.testing.assert_array_equal(decode_reals(encode_reals(v)), Q9_9.quantize(v))


def test_payload_dump_roundtrip():
    p = encode_reals([1.5, -2.25], PayloadKind.SOFTMAX)
    blob = p.to_bytes()
    assert blob[0] == int(PayloadKind.SOFTMAX)
    assert int.from_bytes(blob[1:5], "little") == 36
    assert len(blob) == 5 + 5
    assert BitPayload.from_bytes(blob) == p
    with pytest.raises(CodecError):
        BitPayload.from_bytes(blob[:6])


def test_mask_roundtrip():
    m = np.array([True, False, True, True])
    p = phy.encode_mask(m)
    assert p.n_bits == 4 and p.kind is PayloadKind.CONFORMAL_SET
    np.testing.assert_array_equal(phy.decode_mask(p), m)


@pytest.mark.parametrize("mod", list(Modulation))
def test_constellation_unit_energy(mod):
    pts = phy.constellation(mod)
    assert pts.shape == (mod.order,)
    assert abs(np.mean(np.abs(pts) ** 2) - 1.0) < 1e-12
    assert len(set(np.round(pts, 12))) == mod.order


@pytest.mark.parametrize("mod", list(Modulation))
def test_gray_neighbours_differ_in_one_bit(mod):
    pts = phy.constellation(mod)
    d_min = min(abs(a - b) for i, a in enumerate(pts) for b in pts[i + 1:])
    for i, a in enumerate(pts):
        for j, b in enumerate(pts):
            if i != j and abs(abs(a - b) - d_min) < 1e-9:
                assert bin(i ^ j).count("1") == 1


@pytest.mark.parametrize("mod", list(Modulation))
def test_modulate_demodulate_noiseless(mod):
    bits = np.random.default_rng(0).integers(0, 2, 1001).astype(np.uint8)
    np.testing.assert_array_equal(phy.demodulate(phy.modulate(bits, mod), mod, bits.size), bits)


def test_infinite_snr_is_identity():
    p = encode_reals(np.linspace(-3, 3, 20))
    assert phy.transmit(p, ChannelConfig(math.inf)) == p


def test_channel_determinism():
    p = encode_reals(np.linspace(-3, 3, 200))
    cfg = ChannelConfig(8.0, Modulation.QAM64, seed=11)
    assert phy.transmit(p, cfg) == phy.transmit(p, cfg)
    assert phy.transmit(p, cfg) != phy.transmit(p, cfg.with_(seed=12))


def _ber(mod, snr_db, n_bits, seed):
    bits = np.random.default_rng(seed).integers(0, 2, n_bits).astype(np.uint8)
    out = phy.transmit(BitPayload(bits), ChannelConfig(snr_db, mod, seed=seed + 1))
    return np.mean(out.bits != bits)


@pytest.mark.parametrize("ebn0", [2.0, 4.0, 6.0])
def test_qpsk_ber_matches_theory(ebn0):
    esn0 = ebn0 + 10 * math.log10(2)
    ber = _ber(Modulation.QPSK, esn0, 10 ** 6, 0)
    theory = float(phy.ber_qpsk_theory(ebn0))
    assert abs(ber / theory - 1) < 0.10


@pytest.mark.parametrize("esn0", [14.0, 18.0, 22.0])
def test_qam64_ber_matches_approximation(esn0):
    ber = _ber(Modulation.QAM64, esn0, 6 * 10 ** 5 if esn0 < 22 else 3 * 10 ** 6, 1)
    theory = float(phy.ber_qam_theory(esn0, 64))
    assert abs(ber / theory - 1) < 0.15


def test_qpsk_reference_value():
    assert float(phy.ber_qpsk_theory(4.0)) == pytest.approx(1.25e-2, rel=0.01)


def test_airtime_examples():
    assert airtime(240_000, 1e6) == pytest.approx(0.24)
    assert airtime(36, 1e3) < 0.036 + 1e-15
    assert airtime(0, ChannelConfig()) == 0.0
    with pytest.raises(ValueError):
        airtime(10, 0.0)
    with pytest.raises(ValueError):
        ChannelConfig(rate_bps=-1)


def test_perturb_reals():
    v = np.linspace(-1, 1, 10_000)
    rng = np.random.default_rng(0)
    np.testing.assert_array_equal(phy.perturb_reals(v, math.inf, rng), v)
    noisy = phy.perturb_reals(v, 10.0, rng)
    snr = np.mean(v ** 2) / np.mean((noisy - v) ** 2)
    assert 10 * math.log10(snr) == pytest.approx(10.0, abs=0.2)


# -- compiled and numpy kernels agree ------------------------------------------

def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


def test_kernel_parity():
    rng = np.random.default_rng(0)
    vals = np.concatenate([rng.standard_normal(5000) * 100, [0.0, 255.999, -256.0, 1e9, -1e9, 0.5 / 512]])
    b_ext, b_py = kernels.q99_encode(vals), _pykernels.q99_encode(vals)
    np.testing.assert_array_equal(b_ext, b_py)
    np.testing.assert_array_equal(kernels.q99_decode(b_ext), _pykernels.q99_decode(b_py))
    for mod in Modulation:
        bits = rng.integers(0, 2, 6000).astype(np.uint8)
        re1, im1 = kernels.qam_map(bits, mod.bits_per_axis, mod.scale)
        re2, im2 = _pykernels.qam_map(bits, mod.bits_per_axis, mod.scale)
        np.testing.assert_array_equal(re1, re2)
        np.testing.assert_array_equal(im1, im2)
        re = re1 + 0.3 * rng.standard_normal(re1.size)
        im = im1 + 0.3 * rng.standard_normal(im1.size)
        np.testing.assert_array_equal(kernels.qam_demap(re, im, mod.bits_per_axis, mod.scale),
                                      _pykernels.qam_demap(re, im, mod.bits_per_axis, mod.scale))
