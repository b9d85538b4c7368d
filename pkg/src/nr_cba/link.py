"""PMI search, PDSCH precoder composition, MMSE-IRC reception and spectral efficiency."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .codebook import (
    LAYER_BEAM, LAYER_SIGN, CodebookConfig, DftBeamGrid, ETypeIILayer, ETypeIIPmi, TypeIPmi,
    build_etype2_precoder, build_type1_precoder, cophase_indices, quantize_amplitude, quantize_phase,
    spatial_basis, subband_of_rb, zero_threshold,
)

CQI_THRESHOLDS_DB = np.arange(-6.0, 24.0 + 1e-9, 2.0)
_TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class PrecoderSet:
    per_rb: np.ndarray   # (n_rb, n_ports, rank)
    rank: int
    source: str


@dataclass(frozen=True, eq=False)
class LinkMetrics:
    sinr: np.ndarray     # (n_rb, rank), linear
    se_bits_per_use: float
    cqi: int
    noise_var: float

    @property
    def se(self) -> float:
        return self.se_bits_per_use

    @property
    def rank(self) -> int:
        return self.sinr.shape[1]


def csi_rs_precoder(n_ports: int, kind: str = "identity") -> np.ndarray:
    """CSI-RS port precoder. ``"identity"`` is non-precoded CSI-RS; ``"dft"`` a unitary DFT."""
    if kind == "identity":
        return np.eye(n_ports, dtype=complex)
    if kind == "dft":
        k = np.arange(n_ports)
        return np.exp(-2j * np.pi * np.outer(k, k) / n_ports) / np.sqrt(n_ports)
    raise ValueError(f"unknown CSI-RS precoder kind {kind!r}")


def compose_pdsch_precoder(w_csi: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``F = W_csi @ W`` with every column rescaled to its codebook power."""
    f = w_csi @ w
    target = np.linalg.norm(w, axis=-2, keepdims=True)
    have = np.linalg.norm(f, axis=-2, keepdims=True)
    return f * np.divide(target, have, out=np.zeros_like(have), where=have > 0)


def mmse_irc_equalizer(h_eff, noise_var: float) -> np.ndarray:
    """G = H^H (H H^H + s2 I)^-1; rows are the per-stream combiners. Broadcasts over leading axes."""
    h = np.asarray(h_eff, dtype=complex)
    if h.ndim == 1:
        h = h[:, None]
    n_ue = h.shape[-2]
    hh = np.swapaxes(h.conj(), -1, -2)
    cov = h @ hh + noise_var * np.eye(n_ue)
    return np.swapaxes(np.linalg.solve(cov, h).conj(), -1, -2)


def sinr(g_row, h_n, f_cols, stream_r: int, noise_var: float) -> float:
    """Post-equalization SINR of one stream."""
    g = np.atleast_1d(np.asarray(g_row, dtype=complex))
    h = np.atleast_2d(np.asarray(h_n, dtype=complex))
    f = np.asarray(f_cols, dtype=complex)
    if f.ndim == 1:
        f = f[:, None] if h.shape[1] == f.shape[0] else f[None, :]
    gains = np.abs(g @ h @ f) ** 2
    interference = gains.sum() - gains[stream_r]
    return float(gains[stream_r] / (interference + np.vdot(g, g).real * noise_var))


def batch_sinr(h_eff: np.ndarray, noise_var: float) -> np.ndarray:
    """Per-stream SINR for stacked effective channels ``(..., n_ue, rank)``."""
    g = mmse_irc_equalizer(h_eff, noise_var)
    a = np.abs(g @ h_eff) ** 2                      # (..., rank, rank)
    signal = np.diagonal(a, axis1=-2, axis2=-1)
    interference = a.sum(axis=-1) - signal
    noise = np.sum(np.abs(g) ** 2, axis=-1) * noise_var
    denom = interference + noise
    return np.divide(signal, denom, out=np.zeros_like(signal), where=denom > 0)


def cqi_from_sinr(mean_sinr_db: float) -> int:
    """16-level staircase with thresholds -6..24 dB in 2 dB steps."""
    count = int(np.searchsorted(CQI_THRESHOLDS_DB, mean_sinr_db, side="right"))
    return max(count - 1, 0)


def _metrics(sinr_arr: np.ndarray, noise_var: float) -> LinkMetrics:
    se = float(np.sum(np.log2(1.0 + sinr_arr)))
    mean = float(np.mean(sinr_arr))
    cqi = cqi_from_sinr(10 * np.log10(mean) if mean > 0 else -np.inf)
    return LinkMetrics(sinr=sinr_arr, se_bits_per_use=se, cqi=cqi, noise_var=float(noise_var))


def spectral_efficiency(h: ChannelRealization | np.ndarray, precoders: PrecoderSet,
                        noise_var: float) -> LinkMetrics:
    """Sum over RBs and streams of log2(1 + SINR) with MMSE-IRC reception."""
    per_rb = h.per_rb if isinstance(h, ChannelRealization) else np.asarray(h)
    h_eff = per_rb @ precoders.per_rb
    return _metrics(batch_sinr(h_eff, noise_var), noise_var)


def type1_precoder_set(pmi: TypeIPmi, grid: DftBeamGrid, n_rb: int,
                       w_csi: np.ndarray | None = None) -> PrecoderSet:
    sb = subband_of_rb(n_rb, grid.config.n_subbands)
    per_sb = np.stack([build_type1_precoder(pmi, grid, s) for s in range(grid.config.n_subbands)])
    per_rb = per_sb[sb]
    if w_csi is not None:
        per_rb = compose_pdsch_precoder(w_csi, per_rb)
    return PrecoderSet(per_rb=per_rb, rank=pmi.rank, source="type1")


def etype2_precoder_set(pmi: ETypeIIPmi, grid: DftBeamGrid, n_rb: int,
                        w_csi: np.ndarray | None = None) -> PrecoderSet:
    sb = subband_of_rb(n_rb, grid.config.n_subbands)
    per_rb = build_etype2_precoder(pmi, grid).per_subband[sb]
    if w_csi is not None:
        per_rb = compose_pdsch_precoder(w_csi, per_rb)
    return PrecoderSet(per_rb=per_rb, rank=pmi.rank, source="etype2")


def precoder_set(pmi, grid: DftBeamGrid, n_rb: int, w_csi: np.ndarray | None = None) -> PrecoderSet:
    if isinstance(pmi, TypeIPmi):
        return type1_precoder_set(pmi, grid, n_rb, w_csi)
    return etype2_precoder_set(pmi, grid, n_rb, w_csi)


def _port_channel(h: ChannelRealization | np.ndarray, w_csi) -> np.ndarray:
    per_rb = h.per_rb if isinstance(h, ChannelRealization) else np.asarray(h, dtype=complex)
    return per_rb if w_csi is None else per_rb @ w_csi


def _better(candidate: float, best: float) -> bool:
    return candidate > best + _TIE_RTOL * max(abs(best), 1e-300)


def _max_rank(config: CodebookConfig, n_ue: int) -> int:
    return max(1, min(config.max_rank, n_ue))


# ---------------------------------------------------------------------------
# Type I search

def _inverse_diagonal(a) -> list:
    """Diagonal of ``A^-1`` for a Hermitian positive-definite ``A`` given as nested entry arrays.

    Elementwise Cholesky ``A = L L^H`` then ``[A^-1]_rr = sum_k |(L^-1)_kr|^2``;
    keeps stacks of tiny matrices vectorized.
    """
    R = len(a)
    L = [[None] * R for _ in range(R)]
    for j in range(R):
        s = a[j][j].real - sum(np.abs(L[j][k]) ** 2 for k in range(j))
        L[j][j] = np.sqrt(s)
        for i in range(j + 1, R):
            acc = a[i][j] - sum(L[i][k] * L[j][k].conj() for k in range(j))
            L[i][j] = acc / L[j][j]
    M = [[None] * R for _ in range(R)]   # L^-1, lower triangular
    for i in range(R):
        M[i][i] = 1.0 / L[i][i]
        for j in range(i):
            M[i][j] = -sum(L[i][k] * M[k][j] for k in range(j, i)) * M[i][i]
    return [sum(np.abs(M[k][r]) ** 2 for k in range(r, R)) for r in range(R)]


def _mmse_se(gram, noise_var: float) -> np.ndarray:
    """Sum-stream MMSE spectral efficiency from Gram entries.

    ``gram`` is an ``R x R`` nested list of equally shaped arrays (or an array
    with trailing ``(R, R)`` axes). Uses log2(1 + SINR_r) = -log2([A^-1]_rr)
    with ``A = I + gram / noise_var``, which is the SINR of the MMSE-IRC
    receiver.
    """
    if isinstance(gram, np.ndarray):
        gram = [[gram[..., i, j] for j in range(gram.shape[-1])] for i in range(gram.shape[-1])]
    R = len(gram)
    if R == 1:
        return np.log2(1.0 + gram[0][0].real / noise_var)
    a = [[gram[i][j] / noise_var + (1.0 if i == j else 0.0) for j in range(R)] for i in range(R)]
    return -sum(np.log2(d) for d in _inverse_diagonal(a))


def type1_cross_terms(h_port: np.ndarray, grid: DftBeamGrid) -> dict:
    """Per-(RB, beam) inner products between the polarization projections of the two layer beams."""
    config = grid.config
    n = config.n_beams
    proj = (h_port[..., :n] @ grid.columns, h_port[..., n:] @ grid.columns)   # (n_rb, n_ue, nb) each
    nb = grid.columns.shape[1]
    e1, e2 = grid.extent
    i1, i2 = np.divmod(np.arange(nb), e2)
    k1, k2 = TypeIPmi(0, 0, (), 4).offsets(config.n1)[2]
    second = ((i1 + k1 * config.o1) % e1) * e2 + (i2 + k2 * config.o2) % e2
    beam = {(a, x): proj[x] if a == 0 else proj[x][:, :, second] for a in (0, 1) for x in (0, 1)}
    return {(a, b, x, y): np.einsum("nub,nub->nb", beam[a, x].conj(), beam[b, y])[..., None]
            for a in (0, 1) for b in (0, 1) for x in (0, 1) for y in (0, 1)}


def type1_search_tables(h_port: np.ndarray, grid: DftBeamGrid, rank: int, noise_var: float,
                        cross: dict | None = None):
    """Per-(RB, beam, cophase) spectral efficiency for one rank.

    Returns ``se`` of shape ``(n_rb, n_oversampled_beams, n_cophase)`` and the
    co-phase indices searched.
    """
    cross = type1_cross_terms(h_port, grid) if cross is None else cross
    cophases = cophase_indices(rank)
    phi = np.array([1j ** c for c in cophases])
    gram = [[None] * rank for _ in range(rank)]
    for l in range(rank):
        a, sl = LAYER_BEAM[l], LAYER_SIGN[l]
        for k in range(l, rank):
            b, sk = LAYER_BEAM[k], LAYER_SIGN[k]
            val = (cross[a, b, 0, 0] + sl * sk * cross[a, b, 1, 1]
                   + sk * phi * cross[a, b, 0, 1] + sl * phi.conj() * cross[a, b, 1, 0]) / (2 * rank)
            gram[l][k] = val
            gram[k][l] = val.conj()
    return _mmse_se(gram, noise_var), cophases


def select_type1_pmi(h, grid: DftBeamGrid, config: CodebookConfig | None = None, noise_var: float = 1.0,
                     w_csi: np.ndarray | None = None) -> tuple[TypeIPmi, LinkMetrics]:
    """Exhaustive wideband-beam / per-subband co-phase / rank search maximizing SE."""
    config = config or grid.config
    h_port = _port_channel(h, w_csi)
    n_rb = h_port.shape[0]
    sb = subband_of_rb(n_rb, config.n_subbands)
    e2 = grid.extent[1]
    cross = type1_cross_terms(h_port, grid)
    best = None
    for rank in range(1, _max_rank(config, h_port.shape[1]) + 1):
        se, cophases = type1_search_tables(h_port, grid, rank, noise_var, cross)
        per_sb = np.zeros((config.n_subbands,) + se.shape[1:])
        np.add.at(per_sb, sb, se)
        choice = np.argmax(per_sb, axis=2)                      # (n_sb, nb), first max wins
        total = np.take_along_axis(per_sb, choice[..., None], axis=2)[..., 0].sum(axis=0)
        j = int(np.argmax(total))
        if best is None or _better(float(total[j]), best[0]):
            cophase = tuple(int(cophases[c]) for c in choice[:, j])
            best = (float(total[j]), TypeIPmi(i11=j // e2, i12=j % e2, cophase=cophase, rank=rank))
    pmi = best[1]
    return pmi, spectral_efficiency(h_port, type1_precoder_set(pmi, grid, n_rb), noise_var)


# ---------------------------------------------------------------------------
# Enhanced Type II search

def select_beams(h_port: np.ndarray, grid: DftBeamGrid, l_beams: int):
    """Rotation and L orthogonal beams capturing the most channel power over both polarizations."""
    config = grid.config
    n = config.n_beams
    power = (np.sum(np.abs(h_port[..., :n] @ grid.columns) ** 2, axis=(0, 1))
             + np.sum(np.abs(h_port[..., n:] @ grid.columns) ** 2, axis=(0, 1)))
    best = None
    for q1 in range(config.o1):
        for q2 in range(config.o2):
            p = power[grid.orthogonal_indices(q1, q2)]
            top = np.argsort(-p, kind="stable")[:l_beams]
            total = float(p[top].sum())
            if best is None or _better(total, best[0]):
                best = (total, (q1, q2), tuple(sorted(int(t) for t in top)))
    return best[1], best[2]


def layer_targets(h_port: np.ndarray, n_subbands: int, rank: int) -> np.ndarray:
    """Top right singular vectors of each subband's stacked channel, ``(n_subbands, n_ports, rank)``."""
    n_rb, n_ue, n_ports = h_port.shape
    sb = subband_of_rb(n_rb, n_subbands)
    out = np.zeros((n_subbands, n_ports, rank), dtype=complex)
    for s in range(n_subbands):
        rows = h_port[sb == s].reshape(-1, n_ports)
        if rows.size == 0:
            continue
        _, sv, vh = np.linalg.svd(rows, full_matrices=False)
        k = min(rank, vh.shape[0])
        out[s, :, :k] = vh[:k].conj().T * (sv[:k] > 0)
    return out


def compress_layer(y: np.ndarray, basis_set, config: CodebookConfig, k_nz: int) -> ETypeIILayer:
    """Quantize one layer's beam-by-subband projection ``y`` (2L x n_subbands)."""
    n_sb = config.n_subbands
    s = np.arange(n_sb)
    wf_h = np.exp(-2j * np.pi * np.outer(s, basis_set) / n_sb) / n_sb   # (n_sb, M)
    x = y @ wf_h                                                          # (2L, M)
    mag = np.abs(x).ravel()
    if not np.any(mag > 0):
        return ETypeIILayer(strongest_row=0, coeffs=())
    order = np.argsort(-mag, kind="stable")
    strongest = int(order[0])
    x = x / x.ravel()[strongest]
    floor = zero_threshold(config.amp_bits) * mag[strongest]
    keep = sorted(int(i) for i in order[:k_nz] if mag[i] >= floor)
    M = len(basis_set)
    flat = x.ravel()
    amps = quantize_amplitude(np.abs(flat[keep]), config.amp_bits)
    phases = quantize_phase(flat[keep], config.phase_bits)
    coeffs = tuple((i // M, i % M, int(a), int(p)) for i, a, p in zip(keep, amps, phases))
    return ETypeIILayer(strongest_row=strongest // M, coeffs=coeffs)


def etype2_candidate(h_port: np.ndarray, grid: DftBeamGrid, config: CodebookConfig, rank: int,
                     beams=None) -> ETypeIIPmi:
    """EType II PMI of a fixed rank."""
    rotation, beam_set = beams or select_beams(h_port, grid, config.l_beams)
    probe = ETypeIIPmi(beam_set=beam_set, rotation=rotation, basis_set=(), layers=())
    w1 = spatial_basis(probe, grid)
    v = layer_targets(h_port, config.n_subbands, rank)           # (n_sb, P, R)
    y = np.einsum("pb,spr->rbs", w1.conj(), v)                   # (R, 2L, n_sb)

    # align each subband's phase to the layer's strongest beam row
    ref = np.argmax(np.sum(np.abs(y) ** 2, axis=2), axis=1)      # (R,)
    anchor = y[np.arange(rank), ref, :]                          # (R, n_sb)
    rot = np.exp(-1j * np.angle(anchor))
    y = y * rot[:, None, :]

    n_sb = config.n_subbands
    spectrum = np.fft.fft(y, axis=2) / n_sb                      # basis k <-> exp(+j2pi ks/N)
    energy = np.sum(np.abs(spectrum) ** 2, axis=(0, 1))
    M = config.m_bases(rank)
    basis_set = tuple(sorted(int(k) for k in np.argsort(-energy, kind="stable")[:M]))
    k_nz = config.k_nz(rank)
    layers = tuple(compress_layer(y[r], basis_set, config, k_nz) for r in range(rank))
    return ETypeIIPmi(beam_set=beam_set, rotation=rotation, basis_set=basis_set, layers=layers)


def select_etype2_pmi(h, grid: DftBeamGrid, config: CodebookConfig | None = None, noise_var: float = 1.0,
                      w_csi: np.ndarray | None = None) -> tuple[ETypeIIPmi, LinkMetrics]:
    config = config or grid.config
    h_port = _port_channel(h, w_csi)
    n_rb = h_port.shape[0]
    beams = select_beams(h_port, grid, config.l_beams)
    best = None
    for rank in range(1, _max_rank(config, h_port.shape[1]) + 1):
        pmi = etype2_candidate(h_port, grid, config, rank, beams)
        metrics = spectral_efficiency(h_port, etype2_precoder_set(pmi, grid, n_rb), noise_var)
        if best is None or _better(metrics.se, best[1].se):
            best = (pmi, metrics)
    return best


def mismatched_se(h_now, pmi, grid: DftBeamGrid, config: CodebookConfig | None = None,
                  noise_var: float = 1.0, w_csi: np.ndarray | None = None) -> LinkMetrics:
    """SE realized on ``h_now`` by a precoder chosen from earlier CSI."""
    per_rb = h_now.per_rb if isinstance(h_now, ChannelRealization) else np.asarray(h_now)
    return spectral_efficiency(per_rb, precoder_set(pmi, grid, per_rb.shape[0], w_csi), noise_var)


def snr_to_noise_var(snr_db: float) -> float:
    return 10 ** (-snr_db / 10)
