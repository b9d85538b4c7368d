"""NR Type I and enhanced Type II codebooks.

Precoder construction from PMI reports, feedback overhead accounting and a
bit-exact PMI codec whose field widths are the overhead model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidCoefficient, InvalidPmi, NegativeTax, NonPowerOfTwo, ConfigError

# Type I layers come in pairs sharing one beam with co-phase +phi / -phi.
# Layers 0-1 use the selected beam, layers 2-3 the orthogonal beam offset by
# o1 horizontally (o2 vertically when n1 == 1).
LAYER_BEAM = (0, 0, 1, 1)
LAYER_SIGN = (1, -1, 1, -1)
OFFSET_FIELD_BITS = 2
STRONGEST_FIELD_BITS = 5


@dataclass(frozen=True)
class CodebookConfig:
    n1: int = 2
    n2: int = 8
    o1: int = 4
    o2: int = 4
    l_beams: int = 4
    m_bases_low_rank: int = 7
    m_bases_high_rank: int = 4
    n_subbands: int = 14
    max_rank: int = 4
    beta: float = 0.75
    amp_bits: int = 3
    phase_bits: int = 4

    def __post_init__(self):
        for name in ("n1", "n2", "o1", "o2", "l_beams", "m_bases_low_rank",
                     "m_bases_high_rank", "n_subbands", "max_rank"):
            if int(getattr(self, name)) < 1:
                raise ConfigError("must be a positive integer", field=name)
        if not 2 * self.l_beams < self.n_ports:
            raise ConfigError("2*l_beams must be smaller than n_ports", field="l_beams")
        if self.l_beams > self.n1 * self.n2:
            raise ConfigError("cannot select more beams than orthogonal grid size", field="l_beams")
        if max(self.m_bases_low_rank, self.m_bases_high_rank) > self.n_subbands:
            raise ConfigError("frequency basis count exceeds n_subbands", field="m_bases_low_rank")
        if self.max_rank > len(LAYER_BEAM):
            raise ConfigError("rank above 4 is not supported", field="max_rank")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError("must lie in (0, 1]", field="beta")
        if self.amp_bits + self.phase_bits != 7:
            raise ConfigError("amp_bits + phase_bits must equal 7", field="amp_bits")
        if math.ceil(math.log2(2 * self.l_beams)) > STRONGEST_FIELD_BITS:
            raise ConfigError("strongest-coefficient row does not fit its field", field="l_beams")

    @property
    def n_ports(self) -> int:
        return 2 * self.n1 * self.n2

    @property
    def n_beams(self) -> int:
        """Number of orthogonal beams per polarization (n1*n2)."""
        return self.n1 * self.n2

    def m_bases(self, rank: int) -> int:
        return self.m_bases_low_rank if rank <= 2 else self.m_bases_high_rank

    def k_nz(self, rank: int) -> int:
        """Nonzero coefficients reported per layer."""
        positions = 2 * self.l_beams * self.m_bases(rank)
        return min(positions, math.ceil(round(self.beta * positions, 9)))

    def check_rank(self, rank: int) -> None:
        if not 1 <= rank <= self.max_rank:
            raise InvalidPmi(f"rank {rank} outside [1, {self.max_rank}]")


@dataclass(frozen=True, eq=False)
class DftBeamGrid:
    """Oversampled 2-D DFT beams for one polarization.

    Column ``i1 * n2*o2 + i2`` is the beam with horizontal index ``i1`` and
    vertical index ``i2``; antenna ``(m, n)`` sits at row ``m * n2 + n``.
    """
    config: CodebookConfig
    columns: np.ndarray

    @property
    def extent(self) -> tuple[int, int]:
        c = self.config
        return c.n1 * c.o1, c.n2 * c.o2

    def index(self, i1: int, i2: int) -> int:
        e1, e2 = self.extent
        return (i1 % e1) * e2 + (i2 % e2)

    def column(self, i1: int, i2: int) -> np.ndarray:
        return self.columns[:, self.index(i1, i2)]

    def orthogonal_indices(self, q1: int = 0, q2: int = 0) -> np.ndarray:
        """Column indices of the n1*n2 orthogonal beams at rotation (q1, q2)."""
        c = self.config
        m1, m2 = np.meshgrid(np.arange(c.n1), np.arange(c.n2), indexing="ij")
        return ((c.o1 * m1 + q1) * c.n2 * c.o2 + c.o2 * m2 + q2).ravel()


def build_beam_grid(config: CodebookConfig) -> DftBeamGrid:
    c = config
    m = np.repeat(np.arange(c.n1), c.n2)
    n = np.tile(np.arange(c.n2), c.n1)
    i1 = np.repeat(np.arange(c.n1 * c.o1), c.n2 * c.o2)
    i2 = np.tile(np.arange(c.n2 * c.o2), c.n1 * c.o1)
    phase = np.outer(m, i1) / (c.n1 * c.o1) + np.outer(n, i2) / (c.n2 * c.o2)
    columns = np.exp(2j * np.pi * phase) / np.sqrt(c.n1 * c.n2)
    columns.setflags(write=False)
    return DftBeamGrid(config=c, columns=columns)


# ---------------------------------------------------------------------------
# Type I

@dataclass(frozen=True)
class TypeIPmi:
    i11: int
    i12: int
    cophase: tuple[int, ...]
    rank: int = 1

    def offsets(self, n1: int) -> tuple[tuple[int, int], ...]:
        """Per-layer (k1, k2) in units of the oversampling factors."""
        second = (1, 0) if n1 > 1 else (0, 1)
        return tuple(((0, 0), second)[b] for b in LAYER_BEAM[:self.rank])

    def validate(self, config: CodebookConfig) -> None:
        config.check_rank(self.rank)
        if not 0 <= self.i11 < config.n1 * config.o1:
            raise InvalidPmi(f"i11={self.i11} out of range")
        if not 0 <= self.i12 < config.n2 * config.o2:
            raise InvalidPmi(f"i12={self.i12} out of range")
        if len(self.cophase) != config.n_subbands:
            raise InvalidPmi("cophase length must equal n_subbands")
        allowed = cophase_indices(self.rank)
        if any(c not in allowed for c in self.cophase):
            raise InvalidPmi(f"cophase indices must be in {allowed} for rank {self.rank}")


def cophase_indices(rank: int) -> tuple[int, ...]:
    """QPSK co-phase indices: 2 bits at rank 1, 1 bit (phi in {1, j}) above."""
    return (0, 1, 2, 3) if rank == 1 else (0, 1)


def type1_layer_beams(pmi: TypeIPmi, grid: DftBeamGrid) -> list[int]:
    c = grid.config
    return [grid.index(pmi.i11 + k1 * c.o1, pmi.i12 + k2 * c.o2) for k1, k2 in pmi.offsets(c.n1)]


def build_type1_precoder(pmi: TypeIPmi, grid: DftBeamGrid, subband: int) -> np.ndarray:
    """Precoder ``W1 W2`` of one subband, shape ``(n_ports, rank)``."""
    config = grid.config
    pmi.validate(config)
    if not 0 <= subband < config.n_subbands:
        raise IndexError(f"subband {subband} out of range")
    phi = 1j ** pmi.cophase[subband]
    beams = grid.columns[:, type1_layer_beams(pmi, grid)]
    sign = np.array(LAYER_SIGN[:pmi.rank])
    w = np.vstack([beams, phi * sign * beams])
    return w / np.sqrt(2 * pmi.rank)


def type1_overhead_bits(config: CodebookConfig, rank: int) -> "OverheadReport":
    config.check_rank(rank)
    w1, w2 = _pow2_width(config.n1 * config.o1), _pow2_width(config.n2 * config.o2)
    per_sb = 2 if rank == 1 else 1
    return OverheadReport(wideband_bits=w1 + w2 + OFFSET_FIELD_BITS,
                          subband_bits=config.n_subbands * per_sb)


def _pow2_width(n: int) -> int:
    if n < 1 or n & (n - 1):
        raise NonPowerOfTwo(f"{n} is not a power of two")
    return n.bit_length() - 1


# ---------------------------------------------------------------------------
# Enhanced Type II

@dataclass(frozen=True)
class ETypeIILayer:
    """Quantized combination coefficients of one layer.

    ``coeffs`` holds ``(row, col, amp_index, phase_index)`` with ``row`` in
    ``[0, 2L)`` and ``col`` a position in the PMI's ``basis_set``.
    """
    strongest_row: int
    coeffs: tuple[tuple[int, int, int, int], ...]


@dataclass(frozen=True)
class ETypeIIPmi:
    beam_set: tuple[int, ...]
    rotation: tuple[int, int]
    basis_set: tuple[int, ...]
    layers: tuple[ETypeIILayer, ...]

    @property
    def rank(self) -> int:
        return len(self.layers)

    def validate(self, config: CodebookConfig, strict: bool = True) -> None:
        config.check_rank(self.rank)
        L, M = config.l_beams, config.m_bases(self.rank)
        if len(self.beam_set) != L or len(set(self.beam_set)) != L:
            raise InvalidPmi("beam_set must hold l_beams distinct indices")
        if any(not 0 <= b < config.n_beams for b in self.beam_set):
            raise InvalidPmi("beam index out of the orthogonal grid")
        q1, q2 = self.rotation
        if not (0 <= q1 < config.o1 and 0 <= q2 < config.o2):
            raise InvalidPmi("rotation out of range")
        if len(self.basis_set) != M or len(set(self.basis_set)) != M:
            raise InvalidPmi(f"basis_set must hold {M} distinct indices")
        if any(not 0 <= k < config.n_subbands for k in self.basis_set):
            raise InvalidPmi("basis index out of range")
        for layer in self.layers:
            if not 0 <= layer.strongest_row < 2 * L:
                raise InvalidPmi("strongest_row out of range")
            positions = set()
            for row, col, amp, phase in layer.coeffs:
                if not (0 <= row < 2 * L and 0 <= col < M):
                    raise InvalidCoefficient(f"coefficient position ({row}, {col}) outside 2L x M")
                if not (0 <= amp < 2 ** config.amp_bits and 0 <= phase < 2 ** config.phase_bits):
                    raise InvalidCoefficient("quantization index out of range")
                positions.add((row, col))
            if len(positions) != len(layer.coeffs):
                raise InvalidCoefficient("duplicate coefficient position")
            if strict and len(layer.coeffs) > config.k_nz(self.rank):
                raise InvalidPmi("layer carries more than k_nz coefficients")


def dequantize_amplitude(index, amp_bits: int = 3):
    """Half-dB-in-power ladder 1, 2^-0.5, ..., 2^-(2^amp_bits - 1)/2."""
    return 2.0 ** (-np.asarray(index, dtype=float) / 2)


def dequantize_phase(index, phase_bits: int = 4):
    return np.exp(2j * np.pi * np.asarray(index, dtype=float) / 2 ** phase_bits)


def zero_threshold(amp_bits: int = 3) -> float:
    """Magnitudes below half the smallest ladder level round to the implicit zero."""
    return 0.5 * float(dequantize_amplitude(2 ** amp_bits - 1, amp_bits))


def quantize_amplitude(magnitude, amp_bits: int = 3):
    mag = np.asarray(magnitude, dtype=float)
    top = 2 ** amp_bits - 1
    with np.errstate(divide="ignore"):
        idx = np.rint(-2 * np.log2(np.where(mag > 0, mag, 2.0 ** -64)))
    return np.clip(idx, 0, top).astype(int)


def quantize_phase(value, phase_bits: int = 4):
    levels = 2 ** phase_bits
    idx = np.rint(np.angle(value) / (2 * np.pi / levels)).astype(int)
    return np.mod(idx, levels)


def spatial_basis(pmi: ETypeIIPmi, grid: DftBeamGrid) -> np.ndarray:
    """W1: block-diagonal ``(n_ports, 2L)`` matrix of the selected beams."""
    orth = grid.orthogonal_indices(*pmi.rotation)
    beams = grid.columns[:, orth[list(pmi.beam_set)]]
    n, L = beams.shape
    w1 = np.zeros((2 * n, 2 * L), dtype=complex)
    w1[:n, :L] = beams
    w1[n:, L:] = beams
    return w1


def frequency_basis(basis_set, n_subbands: int) -> np.ndarray:
    """Wf: ``(M, n_subbands)`` DFT rows selected by ``basis_set``."""
    k = np.asarray(basis_set)[:, None]
    s = np.arange(n_subbands)[None, :]
    return np.exp(2j * np.pi * k * s / n_subbands)


def coefficient_matrix(layer: ETypeIILayer, config: CodebookConfig, n_bases: int) -> np.ndarray:
    c = np.zeros((2 * config.l_beams, n_bases), dtype=complex)
    for row, col, amp, phase in layer.coeffs:
        c[row, col] = dequantize_amplitude(amp, config.amp_bits) * dequantize_phase(phase, config.phase_bits)
    return c


@dataclass(frozen=True, eq=False)
class ETypeIIPrecoder:
    per_subband: np.ndarray  # (n_subbands, n_ports, rank)
    degenerate: tuple[bool, ...]


def build_etype2_precoder(pmi: ETypeIIPmi, grid: DftBeamGrid,
                          config: CodebookConfig | None = None) -> ETypeIIPrecoder:
    """Per-subband precoders ``W1 C Wf``, each column scaled to power 1/rank."""
    config = config or grid.config
    pmi.validate(config, strict=False)
    R = pmi.rank
    w1 = spatial_basis(pmi, grid)
    wf = frequency_basis(pmi.basis_set, config.n_subbands)
    out = np.zeros((config.n_subbands, config.n_ports, R), dtype=complex)
    degenerate = []
    for r, layer in enumerate(pmi.layers):
        cols = w1 @ coefficient_matrix(layer, config, len(pmi.basis_set)) @ wf  # (n_ports, n_sb)
        norms = np.linalg.norm(cols, axis=0)
        if not np.any(norms > 0):
            degenerate.append(True)
            continue
        degenerate.append(False)
        scale = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 0.0) / np.sqrt(R)
        out[:, :, r] = (cols * scale).T
    return ETypeIIPrecoder(per_subband=out, degenerate=tuple(degenerate))


def binomial_bits(n: int, k: int) -> int:
    """ceil(log2(C(n, k))), exact."""
    return (math.comb(n, k) - 1).bit_length()


def etype2_overhead_bits(config: CodebookConfig, rank: int) -> "OverheadReport":
    config.check_rank(rank)
    L, M = config.l_beams, config.m_bases(rank)
    wideband = binomial_bits(config.n_beams, L) + (config.o1 * config.o2 - 1).bit_length()
    per_layer = 5 + 7 * config.k_nz(rank) + 2 * L * M
    return OverheadReport(wideband_bits=wideband,
                          subband_bits=binomial_bits(config.n_subbands, M),
                          per_layer_bits=(per_layer,) * rank)


@dataclass(frozen=True)
class OverheadReport:
    wideband_bits: int
    subband_bits: int
    per_layer_bits: tuple[int, ...] = field(default_factory=tuple)

    @property
    def total_bits(self) -> int:
        return self.wideband_bits + self.subband_bits + sum(self.per_layer_bits)


def overhead_tax(config: CodebookConfig, rank_type1: int, rank_type2: int) -> int:
    """Extra feedback bits EType II costs over Type I."""
    tax = etype2_overhead_bits(config, rank_type2).total_bits - type1_overhead_bits(config, rank_type1).total_bits
    if tax < 0:
        raise NegativeTax(f"EType II report is {-tax} bits cheaper than Type I")
    return tax


# ---------------------------------------------------------------------------
# Bit-string codec. Fields are big-endian, wideband -> subband -> per-layer.

def _bits(value: int, width: int) -> str:
    if width == 0:
        return ""
    if not 0 <= value < 2 ** width:
        raise InvalidPmi(f"value {value} does not fit in {width} bits")
    return format(value, f"0{width}b")


class _Reader:
    def __init__(self, bits: str):
        if set(bits) - {"0", "1"}:
            raise InvalidPmi("bit string may contain only '0' and '1'")
        self.bits = bits
        self.pos = 0

    def take(self, width: int) -> int:
        if width == 0:
            return 0
        if self.pos + width > len(self.bits):
            raise InvalidPmi("bit string too short")
        v = int(self.bits[self.pos:self.pos + width], 2)
        self.pos += width
        return v

    def done(self) -> None:
        if self.pos != len(self.bits):
            raise InvalidPmi(f"{len(self.bits) - self.pos} trailing bits")


def combination_index(subset, n: int) -> int:
    """Lexicographic rank of a k-subset of range(n)."""
    idx, prev = 0, -1
    k = len(subset)
    for i, c in enumerate(sorted(subset)):
        for skipped in range(prev + 1, c):
            idx += math.comb(n - skipped - 1, k - i - 1)
        prev = c
    return idx


def combination_from_index(index: int, n: int, k: int) -> tuple[int, ...]:
    out = []
    c = 0
    for i in range(k):
        while True:
            count = math.comb(n - c - 1, k - i - 1)
            if index < count:
                break
            index -= count
            c += 1
        out.append(c)
        c += 1
    return tuple(out)


def encode_type1(pmi: TypeIPmi, config: CodebookConfig) -> str:
    pmi.validate(config)
    w1, w2 = _pow2_width(config.n1 * config.o1), _pow2_width(config.n2 * config.o2)
    parts = [_bits(pmi.i11, w1), _bits(pmi.i12, w2), _bits(pmi.rank - 1, OFFSET_FIELD_BITS)]
    if pmi.rank == 1:
        parts += [_bits(c, 2) for c in pmi.cophase]
    else:
        parts += [_bits(c, 1) for c in pmi.cophase]
    return "".join(parts)


def decode_type1(bits: str, config: CodebookConfig) -> TypeIPmi:
    """Inverse of :func:`encode_type1`; the offset field carries the layer-offset row and hence the rank."""
    rd = _Reader(bits)
    i11 = rd.take(_pow2_width(config.n1 * config.o1))
    i12 = rd.take(_pow2_width(config.n2 * config.o2))
    rank = rd.take(OFFSET_FIELD_BITS) + 1
    if rank == 1:
        cophase = tuple(rd.take(2) for _ in range(config.n_subbands))
    else:
        cophase = tuple(rd.take(1) for _ in range(config.n_subbands))
    rd.done()
    pmi = TypeIPmi(i11=i11, i12=i12, cophase=cophase, rank=rank)
    pmi.validate(config)
    return pmi


def encode_etype2(pmi: ETypeIIPmi, config: CodebookConfig) -> str:
    pmi.validate(config)
    L, M = config.l_beams, config.m_bases(pmi.rank)
    q1, q2 = pmi.rotation
    parts = [
        _bits(combination_index(pmi.beam_set, config.n_beams), binomial_bits(config.n_beams, L)),
        _bits(q1 * config.o2 + q2, (config.o1 * config.o2 - 1).bit_length()),
        _bits(combination_index(pmi.basis_set, config.n_subbands), binomial_bits(config.n_subbands, M)),
    ]
    for layer in pmi.layers:
        parts.append(_bits(layer.strongest_row, STRONGEST_FIELD_BITS))
        by_pos = {(row, col): (amp, ph) for row, col, amp, ph in layer.coeffs}
        bitmap = "".join("1" if (row, col) in by_pos else "0"
                         for row in range(2 * L) for col in range(M))
        parts.append(bitmap)
        for pos in sorted(by_pos):
            amp, ph = by_pos[pos]
            parts.append(_bits(amp, config.amp_bits) + _bits(ph, config.phase_bits))
        # unused coefficient slots are zero padded so the report size stays fixed
        parts.append("0" * ((config.amp_bits + config.phase_bits) * (config.k_nz(pmi.rank) - len(by_pos))))
    return "".join(parts)


def decode_etype2(bits: str, config: CodebookConfig, rank: int) -> ETypeIIPmi:
    """Inverse of :func:`encode_etype2`. The rank is reported separately and must be given."""
    config.check_rank(rank)
    L, M = config.l_beams, config.m_bases(rank)
    rd = _Reader(bits)
    beam_set = combination_from_index(rd.take(binomial_bits(config.n_beams, L)), config.n_beams, L)
    q = rd.take((config.o1 * config.o2 - 1).bit_length())
    basis_set = combination_from_index(rd.take(binomial_bits(config.n_subbands, M)), config.n_subbands, M)
    layers = []
    for _ in range(rank):
        strongest = rd.take(STRONGEST_FIELD_BITS)
        positions = [(row, col) for row in range(2 * L) for col in range(M) if rd.take(1)]
        if len(positions) > config.k_nz(rank):
            raise InvalidPmi("bitmap marks more than k_nz coefficients")
        coeffs = tuple((row, col, rd.take(config.amp_bits), rd.take(config.phase_bits))
                       for row, col in positions)
        if rd.take((config.amp_bits + config.phase_bits) * (config.k_nz(rank) - len(positions))):
            raise InvalidPmi("nonzero padding after the coefficients")
        layers.append(ETypeIILayer(strongest_row=strongest, coeffs=coeffs))
    rd.done()
    pmi = ETypeIIPmi(beam_set=beam_set, rotation=(q // config.o2, q % config.o2),
                     basis_set=basis_set, layers=tuple(layers))
    pmi.validate(config)
    return pmi


def subband_of_rb(n_rb: int, n_subbands: int) -> np.ndarray:
    """Subband index of each RB; RBs are split into contiguous near-equal groups."""
    return (np.arange(n_rb) * n_subbands) // n_rb
