import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nr_cba.codebook import (
    CodebookConfig, ETypeIILayer, ETypeIIPmi, TypeIPmi, binomial_bits, build_beam_grid,
    build_etype2_precoder, build_type1_precoder, combination_from_index, combination_index,
    decode_etype2, decode_type1, dequantize_amplitude, dequantize_phase, encode_etype2, encode_type1,
    etype2_overhead_bits, overhead_tax, quantize_amplitude, quantize_phase, type1_overhead_bits,
)
from nr_cba.errors import ConfigError, InvalidCoefficient, InvalidPmi, NegativeTax, NonPowerOfTwo

from conftest import unchecked_config

DEFAULT = CodebookConfig()


# --- independent oracles ----------------------------------------------------

def pascal_count(n, k):
    row = [1]
    for _ in range(n):
        row = [a + b for a, b in zip([0] + row, row + [0])]
    return row[k]


def width_for(count):
    """Smallest b with 2**b >= count, by doubling."""
    b, cap = 0, 1
    while cap < count:
        cap *= 2
        b += 1
    return b


def oracle_type1_bits(cfg, rank):
    return width_for(cfg.n1 * cfg.o1) + width_for(cfg.n2 * cfg.o2) + 2 + cfg.n_subbands * (2 if rank == 1 else 1)


def oracle_etype2_bits(cfg, rank):
    L = cfg.l_beams
    M = cfg.m_bases_low_rank if rank <= 2 else cfg.m_bases_high_rank
    K = -(-int(round(cfg.beta * 2 * L * M * 1e9)) // 10**9)
    total = width_for(pascal_count(cfg.n1 * cfg.n2, L)) + width_for(cfg.o1 * cfg.o2)
    total += width_for(pascal_count(cfg.n_subbands, M))
    return total + rank * (5 + 7 * K + 2 * L * M)


@st.composite
def configs(draw, max_rank=4):
    n1 = draw(st.sampled_from([1, 2, 4]))
    n2 = draw(st.sampled_from([1, 2, 4, 8]))
    if n1 * n2 < 2:
        n2 = 2
    n_sb = draw(st.integers(1, 19))
    return CodebookConfig(
        n1=n1, n2=n2, o1=draw(st.sampled_from([1, 2, 4])), o2=draw(st.sampled_from([1, 2, 4])),
        l_beams=draw(st.integers(1, min(n1 * n2 - 1, 16))),
        m_bases_low_rank=draw(st.integers(1, n_sb)), m_bases_high_rank=draw(st.integers(1, n_sb)),
        n_subbands=n_sb, max_rank=max_rank, beta=draw(st.sampled_from([0.25, 0.5, 0.75, 1.0])))


# --- grid -------------------------------------------------------------------

def test_degenerate_grid_is_one():
    grid = build_beam_grid(unchecked_config(n1=1, n2=1, o1=1, o2=1))
    assert grid.columns.shape == (1, 1)
    assert grid.columns[0, 0] == pytest.approx(1.0)


def test_two_port_column_matches_hand_value():
    grid = build_beam_grid(unchecked_config(n1=2, n2=1, o1=1, o2=1))
    np.testing.assert_allclose(grid.columns[:, 1], np.array([1, -1]) / np.sqrt(2), atol=1e-15)


def test_default_grid_shape_norms_and_entries():
    grid = build_beam_grid(DEFAULT)
    assert grid.columns.shape == (16, 256)
    np.testing.assert_allclose(np.linalg.norm(grid.columns, axis=0), 1.0, atol=1e-12)
    # Kronecker oracle for a few columns
    for i1, i2 in [(0, 0), (3, 17), (7, 31)]:
        u = np.exp(2j * np.pi * np.arange(2) * i1 / 8)
        v = np.exp(2j * np.pi * np.arange(8) * i2 / 32)
        np.testing.assert_allclose(grid.column(i1, i2), np.kron(u, v) / 4, atol=1e-12)


@pytest.mark.parametrize("q", [(0, 0), (1, 2), (3, 3)])
def test_orthogonal_subset_is_orthonormal(q):
    grid = build_beam_grid(DEFAULT)
    b = grid.columns[:, grid.orthogonal_indices(*q)]
    gram = b.conj().T @ b
    assert np.max(np.abs(gram - np.eye(16))) < 1e-10


# --- Type I -----------------------------------------------------------------

def test_type1_single_port_pair():
    grid = build_beam_grid(unchecked_config(n1=1, n2=1, o1=1, o2=1, n_subbands=1, max_rank=1))
    w = build_type1_precoder(TypeIPmi(0, 0, (0,), 1), grid, 0)
    np.testing.assert_allclose(w[:, 0], np.array([1, 1]) / np.sqrt(2), atol=1e-15)


def test_type1_cophase_j_hand_evaluation():
    cfg = CodebookConfig(n1=2, n2=1, o1=4, o2=1, l_beams=1, m_bases_low_rank=1, m_bases_high_rank=1,
                         n_subbands=1, max_rank=2)
    grid = build_beam_grid(cfg)
    w = build_type1_precoder(TypeIPmi(4, 0, (1,), 1), grid, 0)
    beam = np.exp(2j * np.pi * np.arange(2) * 4 / 8) / np.sqrt(2)
    np.testing.assert_allclose(w[:2, 0], beam / np.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(w[2:, 0], 1j * beam / np.sqrt(2), atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 7), st.integers(0, 31), st.integers(1, 4), st.data())
def test_type1_power_and_orthogonality(i11, i12, rank, data):
    grid = build_beam_grid(DEFAULT)
    allowed = (0, 1, 2, 3) if rank == 1 else (0, 1)
    cophase = tuple(data.draw(st.sampled_from(allowed)) for _ in range(14))
    pmi = TypeIPmi(i11, i12, cophase, rank)
    for sb in (0, 13):
        w = build_type1_precoder(pmi, grid, sb)
        assert np.sum(np.abs(w) ** 2) == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(np.linalg.norm(w, axis=0), 1 / np.sqrt(rank), atol=1e-9)
        # brute-force pairwise inner products
        for a in range(rank):
            for b in range(a + 1, rank):
                assert abs(sum(np.conj(w[p, a]) * w[p, b] for p in range(32))) < 1e-12


def test_type1_validation_errors():
    grid = build_beam_grid(DEFAULT)
    with pytest.raises(InvalidPmi):
        build_type1_precoder(TypeIPmi(8, 0, (0,) * 14, 1), grid, 0)
    with pytest.raises(InvalidPmi):
        build_type1_precoder(TypeIPmi(0, 0, (2,) * 14, 2), grid, 0)
    with pytest.raises(InvalidPmi):
        build_type1_precoder(TypeIPmi(0, 0, (0,) * 13, 1), grid, 0)


def test_type1_overhead_examples():
    cfg1 = unchecked_config(n1=1, n2=1, o1=1, o2=1, n_subbands=1, max_rank=1)
    assert type1_overhead_bits(cfg1, 1).total_bits == 4
    r1 = type1_overhead_bits(DEFAULT, 1)
    assert (r1.wideband_bits, r1.subband_bits, r1.total_bits) == (10, 28, 38)
    assert type1_overhead_bits(DEFAULT, 2).total_bits == 24
    assert r1.per_layer_bits == ()


def test_type1_overhead_rejects_non_power_of_two():
    cfg = CodebookConfig(n1=3, n2=2, o1=1, o2=4, l_beams=2)
    with pytest.raises(NonPowerOfTwo):
        type1_overhead_bits(cfg, 1)


# --- EType II accounting ------------------------------------------------------

def test_etype2_default_fields():
    assert binomial_bits(16, 4) == 11
    assert binomial_bits(14, 7) == 12
    assert DEFAULT.k_nz(2) == 42
    rep = etype2_overhead_bits(DEFAULT, 2)
    assert rep.wideband_bits == 15
    assert rep.subband_bits == 12
    assert rep.per_layer_bits == (355, 355)
    assert rep.total_bits == 737


def test_select_all_beams_costs_nothing():
    # L = n1*n2 breaks the 2L < n_ports invariant, so bypass validation
    cfg = unchecked_config(n1=2, n2=2, o1=1, o2=1, l_beams=4, m_bases_low_rank=1, n_subbands=1)
    assert etype2_overhead_bits(cfg, 1).wideband_bits == 0


def test_overhead_tax_default_config():
    assert overhead_tax(DEFAULT, 2, 2) == 713


def test_overhead_tax_negative_raises():
    # tiny EType II report undercuts a Type I report with many subbands
    cfg = CodebookConfig(n1=2, n2=1, o1=4, o2=4, l_beams=1, m_bases_low_rank=1, m_bases_high_rank=1,
                         n_subbands=19, beta=0.25)
    assert etype2_overhead_bits(cfg, 1).total_bits < type1_overhead_bits(cfg, 1).total_bits
    with pytest.raises(NegativeTax):
        overhead_tax(cfg, 1, 1)


@settings(max_examples=200, deadline=None)
@given(configs(), st.integers(1, 4))
def test_overhead_matches_bit_oracle(cfg, rank):
    assert type1_overhead_bits(cfg, rank).total_bits == oracle_type1_bits(cfg, rank)
    assert etype2_overhead_bits(cfg, rank).total_bits == oracle_etype2_bits(cfg, rank)


def _bump(cfg, **kw):
    d = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
    d.update(kw)
    return CodebookConfig(**d)


@settings(max_examples=100, deadline=None)
@given(configs(), st.integers(1, 4))
def test_etype2_bits_monotone_in_l_m_beta(cfg, rank):
    # the binomial selection fields shrink past the midpoint, so the checks stay below it
    bits = etype2_overhead_bits(cfg, rank).total_bits
    if cfg.l_beams + 1 <= cfg.n1 * cfg.n2 // 2:
        assert etype2_overhead_bits(_bump(cfg, l_beams=cfg.l_beams + 1), rank).total_bits >= bits
    m_field = "m_bases_low_rank" if rank <= 2 else "m_bases_high_rank"
    if getattr(cfg, m_field) + 1 <= cfg.n_subbands // 2:
        assert etype2_overhead_bits(_bump(cfg, **{m_field: getattr(cfg, m_field) + 1}), rank).total_bits >= bits
    if cfg.beta < 1.0:
        assert etype2_overhead_bits(_bump(cfg, beta=min(1.0, cfg.beta + 0.25)), rank).total_bits >= bits


@settings(max_examples=60, deadline=None)
@given(configs())
def test_etype2_bits_monotone_in_rank_at_fixed_m(cfg):
    cfg = _bump(cfg, m_bases_high_rank=cfg.m_bases_low_rank)
    totals = [etype2_overhead_bits(cfg, r).total_bits for r in range(1, 5)]
    assert totals == sorted(totals)


def test_k_nz_full_beta_is_every_position():
    cfg = _bump(DEFAULT, beta=1.0)
    assert cfg.k_nz(1) == 2 * 4 * 7


@pytest.mark.parametrize("kw", [dict(l_beams=16), dict(m_bases_low_rank=15), dict(beta=0.0),
                                dict(amp_bits=2), dict(max_rank=5), dict(n1=0)])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        _bump(DEFAULT, **kw)


# --- quantization ---------------------------------------------------------------

def test_amplitude_ladder_and_phase_round_trip():
    idx = np.arange(8)
    np.testing.assert_array_equal(quantize_amplitude(dequantize_amplitude(idx)), idx)
    np.testing.assert_allclose(dequantize_amplitude([0, 1, 7]), [1.0, 2 ** -0.5, 2 ** -3.5])
    p = np.arange(16)
    np.testing.assert_array_equal(quantize_phase(dequantize_phase(p)), p)
    assert quantize_amplitude(0.0) == 7


# --- EType II precoder ----------------------------------------------------------

def small_cfg(**kw):
    base = dict(n1=2, n2=2, o1=2, o2=2, l_beams=1, m_bases_low_rank=1, m_bases_high_rank=1,
                n_subbands=1, beta=0.125)
    base.update(kw)
    return CodebookConfig(**base)


def test_one_beam_one_basis_identity():
    cfg = small_cfg()
    grid = build_beam_grid(cfg)
    pmi = ETypeIIPmi(beam_set=(2,), rotation=(1, 0), basis_set=(0,),
                     layers=(ETypeIILayer(0, ((0, 0, 0, 0),)),))
    w = build_etype2_precoder(pmi, grid, cfg).per_subband[0, :, 0]
    beam = grid.columns[:, grid.orthogonal_indices(1, 0)[2]]
    np.testing.assert_allclose(w[:4], beam, atol=1e-12)
    np.testing.assert_allclose(w[4:], 0, atol=1e-12)


def test_empty_layer_is_degenerate():
    cfg = small_cfg()
    grid = build_beam_grid(cfg)
    pmi = ETypeIIPmi((0,), (0, 0), (0,), (ETypeIILayer(0, ()),))
    pre = build_etype2_precoder(pmi, grid, cfg)
    assert pre.degenerate == (True,)
    assert not np.any(pre.per_subband)


def test_coefficient_outside_grid_rejected():
    cfg = small_cfg()
    grid = build_beam_grid(cfg)
    pmi = ETypeIIPmi((0,), (0, 0), (0,), (ETypeIILayer(0, ((2, 0, 0, 0),)),))
    with pytest.raises(InvalidCoefficient):
        build_etype2_precoder(pmi, grid, cfg)


def test_quantized_reconstruction_keeps_projection_energy():
    from nr_cba.link import compress_layer
    cfg = CodebookConfig(beta=1.0)
    grid = build_beam_grid(cfg)
    beams = grid.orthogonal_indices(0, 0)
    beam_set = (3, 9, 10, 12)
    # channel direction built from two grid beams with frequency-varying weights
    s = np.arange(cfg.n_subbands)
    a = np.exp(2j * np.pi * s * 2 / 14)
    target = np.zeros((cfg.n_ports, cfg.n_subbands), dtype=complex)
    target[:16] = np.outer(grid.columns[:, beams[3]], np.ones(14)) + 0.6 * np.outer(grid.columns[:, beams[9]], a)
    probe = ETypeIIPmi(beam_set, (0, 0), (), ())
    from nr_cba.codebook import spatial_basis
    w1 = spatial_basis(probe, grid)
    y = w1.conj().T @ target
    basis = tuple(range(7))
    layer = compress_layer(y, basis, cfg, cfg.k_nz(1))
    pmi = ETypeIIPmi(beam_set, (0, 0), basis, (layer,))
    w = build_etype2_precoder(pmi, grid, cfg).per_subband[:, :, 0].T   # (P, n_sb)
    tn = target / np.linalg.norm(target, axis=0)
    captured = np.abs(np.sum(tn.conj() * w, axis=0)) ** 2 / np.sum(np.abs(w) ** 2, axis=0)
    assert captured.mean() >= 0.95


# --- codec ------------------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.data())
def test_combination_index_round_trip(n, data):
    k = data.draw(st.integers(0, n))
    subset = tuple(sorted(data.draw(st.sets(st.integers(0, n - 1), min_size=k, max_size=k))))
    idx = combination_index(subset, n)
    assert 0 <= idx < max(1, math.comb(n, k))
    assert combination_from_index(idx, n, k) == subset


@st.composite
def type1_pmis(draw, cfg):
    rank = draw(st.integers(1, cfg.max_rank))
    allowed = (0, 1, 2, 3) if rank == 1 else (0, 1)
    return TypeIPmi(draw(st.integers(0, cfg.n1 * cfg.o1 - 1)), draw(st.integers(0, cfg.n2 * cfg.o2 - 1)),
                    tuple(draw(st.sampled_from(allowed)) for _ in range(cfg.n_subbands)), rank)


@st.composite
def etype2_pmis(draw, cfg):
    rank = draw(st.integers(1, cfg.max_rank))
    L, M, K = cfg.l_beams, cfg.m_bases(rank), cfg.k_nz(rank)
    beam_set = tuple(sorted(draw(st.sets(st.integers(0, cfg.n_beams - 1), min_size=L, max_size=L))))
    basis_set = tuple(sorted(draw(st.sets(st.integers(0, cfg.n_subbands - 1), min_size=M, max_size=M))))
    layers = []
    for _ in range(rank):
        n = draw(st.integers(0, K))
        pos = sorted(draw(st.sets(st.integers(0, 2 * L * M - 1), min_size=n, max_size=n)))
        coeffs = tuple((p // M, p % M, draw(st.integers(0, 7)), draw(st.integers(0, 15))) for p in pos)
        layers.append(ETypeIILayer(draw(st.integers(0, 2 * L - 1)), coeffs))
    rot = (draw(st.integers(0, cfg.o1 - 1)), draw(st.integers(0, cfg.o2 - 1)))
    return ETypeIIPmi(beam_set, rot, basis_set, tuple(layers))


@settings(max_examples=80, deadline=None)
@given(st.data())
def test_type1_codec_round_trip(data):
    cfg = data.draw(configs())
    pmi = data.draw(type1_pmis(cfg))
    bits = encode_type1(pmi, cfg)
    assert len(bits) == type1_overhead_bits(cfg, pmi.rank).total_bits
    assert decode_type1(bits, cfg) == pmi


@settings(max_examples=80, deadline=None)
@given(st.data())
def test_etype2_codec_round_trip(data):
    cfg = data.draw(configs())
    pmi = data.draw(etype2_pmis(cfg))
    bits = encode_etype2(pmi, cfg)
    assert len(bits) == etype2_overhead_bits(cfg, pmi.rank).total_bits
    assert decode_etype2(bits, cfg, pmi.rank) == pmi


def test_codec_rejects_bad_strings():
    bits = encode_type1(TypeIPmi(1, 2, (0,) * 14, 2), DEFAULT)
    with pytest.raises(InvalidPmi):
        decode_type1(bits + "0", DEFAULT)
    with pytest.raises(InvalidPmi):
        decode_type1(bits[:-1], DEFAULT)
    with pytest.raises(InvalidPmi):
        decode_type1(bits.replace("0", "2"), DEFAULT)
