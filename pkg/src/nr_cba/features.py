"""CSI-indicator feature vectors and the labeled-sequence dataset format."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelRealization
from .codebook import CodebookConfig, DftBeamGrid, ETypeIIPmi
from .errors import SchemaMismatch
from .link import LinkMetrics

SCHEMA_VERSION = 1
VELOCITY_SCALE = 30.0
SNR_RANGE_DB = (-10.0, 50.0)
DEFAULT_SEQUENCE_LENGTH = 8
SCALAR_FIELDS = ("rank_ratio", "velocity_norm", "snr_db_norm", "cqi1_norm", "cqi2_norm")


@dataclass(frozen=True)
class IndicatorSchema:
    aps_bins: int = 16
    dps_bins: int = 16
    l_beams: int = 4

    @property
    def total_dim(self) -> int:
        return self.aps_bins + self.dps_bins + len(SCALAR_FIELDS) + 2 * self.l_beams

    @property
    def names(self) -> list[str]:
        return ([f"aps{i}" for i in range(self.aps_bins)] + [f"dps{i}" for i in range(self.dps_bins)]
                + list(SCALAR_FIELDS) + [f"bitmap{i}" for i in range(2 * self.l_beams)])

    def block(self, name: str) -> slice:
        a, d = self.aps_bins, self.dps_bins
        s = a + d + len(SCALAR_FIELDS)
        return {"aps": slice(0, a), "dps": slice(a, a + d), "scalars": slice(a + d, s),
                "bitmap": slice(s, s + 2 * self.l_beams)}[name]

    def to_dict(self) -> dict:
        return {"aps_bins": self.aps_bins, "dps_bins": self.dps_bins, "l_beams": self.l_beams}


@dataclass(frozen=True, eq=False)
class IndicatorVector:
    values: np.ndarray
    schema: IndicatorSchema = field(default_factory=IndicatorSchema)


@dataclass(frozen=True, eq=False)
class LabeledSample:
    sequence: np.ndarray   # (T, dim)
    label: int

    @property
    def length(self) -> int:
        return self.sequence.shape[0]


def _fold(power: np.ndarray, bins: int) -> np.ndarray:
    out = np.zeros(bins)
    np.add.at(out, (np.arange(len(power)) * bins) // len(power), power)
    return out


def _normalized(spectrum: np.ndarray) -> np.ndarray:
    total = spectrum.sum()
    if not total > 0:
        return np.full(len(spectrum), 1.0 / len(spectrum))
    return spectrum / total


def angle_power_spectrum(h: ChannelRealization, grid: DftBeamGrid, bins: int = 16) -> np.ndarray:
    """Beam-domain power over the n1*n2 orthogonal beams, folded to ``bins``."""
    n = grid.config.n_beams
    beams = grid.columns[:, grid.orthogonal_indices(0, 0)]
    per_rb = h.per_rb
    power = (np.sum(np.abs(per_rb[..., :n] @ beams) ** 2, axis=(0, 1))
             + np.sum(np.abs(per_rb[..., n:] @ beams) ** 2, axis=(0, 1)))
    return _normalized(_fold(power, bins))


def delay_power_spectrum(h: ChannelRealization, bins: int = 16) -> np.ndarray:
    """Power of the RB-domain inverse DFT, averaged over antenna pairs and folded to ``bins``."""
    taps = np.fft.ifft(h.per_rb, axis=0)
    power = np.mean(np.abs(taps) ** 2, axis=(1, 2))
    return _normalized(_fold(power, bins))


def rank_power_ratio(h: ChannelRealization) -> float:
    """sigma1^2 / (sigma1^2 + sigma2^2) of the stacked channel; 1.0 for a zero channel."""
    stacked = h.per_rb.reshape(-1, h.per_rb.shape[-1])
    sv = np.linalg.svd(stacked, compute_uv=False)
    s1 = sv[0] ** 2
    s2 = sv[1] ** 2 if len(sv) > 1 else 0.0
    if s1 + s2 <= 0:
        return 1.0
    return float(s1 / (s1 + s2))


def bitmap_density(pmi: ETypeIIPmi, config: CodebookConfig) -> np.ndarray:
    """Per beam-row fraction of basis positions carrying a coefficient, averaged over layers."""
    rows = 2 * config.l_beams
    M = len(pmi.basis_set) or config.m_bases(max(pmi.rank, 1))
    density = np.zeros(rows)
    for layer in pmi.layers:
        for row, _, _, _ in layer.coeffs:
            density[row] += 1.0
    return density / (M * max(pmi.rank, 1))


def assemble(h: ChannelRealization, grid: DftBeamGrid, cb_cfg: CodebookConfig, pmi2: ETypeIIPmi,
             link1: LinkMetrics, link2: LinkMetrics, velocity: float, snr_db: float,
             schema: IndicatorSchema | None = None) -> IndicatorVector:
    schema = schema or IndicatorSchema(l_beams=cb_cfg.l_beams)
    if schema.l_beams != cb_cfg.l_beams or len(pmi2.beam_set) != cb_cfg.l_beams:
        raise SchemaMismatch("bitmap width does not match the codebook beam count")
    lo, hi = SNR_RANGE_DB
    scalars = [
        rank_power_ratio(h),
        float(np.clip(velocity / VELOCITY_SCALE, 0.0, 1.0)),
        float(np.clip((snr_db - lo) / (hi - lo), 0.0, 1.0)),
        link1.cqi / 15.0,
        link2.cqi / 15.0,
    ]
    values = np.concatenate([
        angle_power_spectrum(h, grid, schema.aps_bins),
        delay_power_spectrum(h, schema.dps_bins),
        scalars,
        bitmap_density(pmi2, cb_cfg),
    ])
    if values.shape != (schema.total_dim,):
        raise SchemaMismatch(f"assembled {values.shape[0]} values, schema expects {schema.total_dim}")
    return IndicatorVector(values=values, schema=schema)


# ---------------------------------------------------------------------------
# Dataset files: CSV rows (one per sample) plus a JSON sidecar.

def _fmt(v: float) -> str:
    return repr(float(v))


def save_dataset(path, samples: list[LabeledSample], schema: IndicatorSchema, sequence_length: int,
                 manifest_hash: str, extra: dict | None = None) -> None:
    path = Path(path)
    dim = schema.total_dim
    header = ["sample"] + [f"t{t}_{name}" for t in range(sequence_length) for name in schema.names] + ["label"]
    with open(path, "w", newline="") as f:
        f.write(f"# manifest: {manifest_hash}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for i, s in enumerate(samples):
            if s.sequence.shape != (sequence_length, dim):
                raise SchemaMismatch(f"sample {i} has shape {s.sequence.shape}")
            w.writerow([i] + [_fmt(v) for v in s.sequence.ravel()] + [int(s.label)])
    meta = {"schema_version": SCHEMA_VERSION, "sequence_length": sequence_length, "dim": dim,
            "schema": schema.to_dict(), "n_samples": len(samples), "manifest": manifest_hash}
    meta.update(extra or {})
    with open(path.with_suffix(".meta.json"), "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def load_dataset(path, schema: IndicatorSchema | None = None) -> tuple[list[LabeledSample], dict]:
    path = Path(path)
    with open(path.with_suffix(".meta.json")) as f:
        meta = json.load(f)
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise SchemaMismatch(f"unsupported dataset schema version {meta.get('schema_version')}")
    file_schema = IndicatorSchema(**meta["schema"])
    if schema is not None and schema != file_schema:
        raise SchemaMismatch(f"dataset schema {file_schema} differs from expected {schema}")
    T, dim = meta["sequence_length"], meta["dim"]
    samples = []
    with open(path, newline="") as f:
        rows = csv.reader(line for line in f if not line.startswith("#"))
        header = next(rows)
        if len(header) != T * dim + 2:
            raise SchemaMismatch("dataset header width does not match its metadata")
        for row in rows:
            values = np.array(row[1:-1], dtype=float).reshape(T, dim)
            samples.append(LabeledSample(sequence=values, label=int(row[-1])))
    return samples, meta
