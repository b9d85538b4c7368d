"""
How many feedback bits does each codebook cost?
===============================================

Walks through the bit budget of a Type I and an enhanced Type II report for
a 32-port panel, then encodes a real PMI and checks the bit string has the
advertised length.
"""

import numpy as np

from nr_cba.channel import make_profile, realize
from nr_cba.codebook import (
    CodebookConfig, build_beam_grid, decode_etype2, encode_etype2, etype2_overhead_bits, overhead_tax,
    type1_overhead_bits,
)
from nr_cba.link import select_etype2_pmi, snr_to_noise_var

# 2 x 8 dual-polarized panel, 4x oversampling, 14 subbands, L = 4 beams
cfg = CodebookConfig()
print("ports:", cfg.n_ports, " subbands:", cfg.n_subbands)

# %%
# Bit budget per rank. EType II pays per layer, Type I barely grows.
for rank in range(1, 5):
    t1 = type1_overhead_bits(cfg, rank)
    t2 = etype2_overhead_bits(cfg, rank)
    print(f"rank {rank}: Type I {t1.total_bits:4d} bits | EType II {t2.total_bits:4d} bits "
          f"(wideband {t2.wideband_bits}, per layer {t2.per_layer_bits[0]}, K_nz {cfg.k_nz(rank)})")

print("overhead tax at rank 2:", overhead_tax(cfg, 2, 2), "bits")

# %%
# A PMI picked on a rich-scattering channel, serialized and read back
grid = build_beam_grid(cfg)
profile = make_profile("nlos_rich", 1.0, 363e-9, seed=3)
h = realize(profile, 26, 4, (cfg.n1, cfg.n2), seed=3)
pmi, metrics = select_etype2_pmi(h, grid, cfg, snr_to_noise_var(10))
bits = encode_etype2(pmi, cfg)
print(f"selected rank {pmi.rank}, beams {pmi.beam_set}, bases {pmi.basis_set}")
print("reported coefficients per layer:", [len(layer.coeffs) for layer in pmi.layers])
print("bit string:", len(bits), "bits, budget", etype2_overhead_bits(cfg, pmi.rank).total_bits)
assert decode_etype2(bits, cfg, pmi.rank) == pmi

# %%
# A coarser setting: fewer beams and bases shrink the tax quickly
for l_beams, m in [(4, 7), (4, 4), (2, 4), (2, 2)]:
    small = CodebookConfig(l_beams=l_beams, m_bases_low_rank=m, m_bases_high_rank=min(m, 4))
    print(f"L={l_beams} M={m}: tax {overhead_tax(small, 2, 2):4d} bits")

print("spectral efficiency of the EType II PMI:", np.round(metrics.se, 2), "bit/s/Hz summed over RBs")
