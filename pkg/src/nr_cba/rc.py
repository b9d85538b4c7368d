"""Echo state network classifier: fixed random reservoir, trainable sigmoid readout."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DegenerateSpectrum, SchemaMismatch

CHECKPOINT_VERSION = 1
_P_CLAMP = 1e-12


@dataclass(frozen=True, eq=False)
class Reservoir:
    input_dim: int
    size: int
    rho: float
    leak: float
    seed: int
    w_in: np.ndarray
    w_res: np.ndarray

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.w_in).tobytes())
        h.update(np.ascontiguousarray(self.w_res).tobytes())
        h.update(repr((self.input_dim, self.size, self.rho, self.leak, self.seed)).encode())
        return h.hexdigest()


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    batch: int = 32
    epochs: int = 20

    def __post_init__(self):
        if self.lr < 0 or self.batch < 1 or self.epochs < 0:
            raise ValueError("lr must be >= 0, batch >= 1 and epochs >= 0")


@dataclass(frozen=True, eq=False)
class EsnModel:
    reservoir: Reservoir
    w_out: np.ndarray   # (size + 1,), last entry is the bias

    def with_readout(self, w_out) -> "EsnModel":
        return replace(self, w_out=np.asarray(w_out, dtype=float))


def init_reservoir(input_dim: int, size: int = 64, rho: float = 0.9, seed: int = 0,
                   leak: float = 1.0) -> Reservoir:
    if size < 1 or input_dim < 1:
        raise ValueError("size and input_dim must be positive")
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    if not 0.0 < leak <= 1.0:
        raise ValueError("leak must lie in (0, 1]")
    for attempt in range(16):
        rng = np.random.default_rng(seed + attempt)
        w_res = rng.uniform(-1.0, 1.0, (size, size))
        raw = float(np.max(np.abs(np.linalg.eigvals(w_res))))
        if raw >= 1e-12:
            break
    else:
        raise DegenerateSpectrum("reservoir matrix has a vanishing spectral radius")
    w_res *= rho / raw
    w_in = rng.uniform(-0.5, 0.5, (size, input_dim))
    w_in.setflags(write=False)
    w_res.setflags(write=False)
    return Reservoir(input_dim=input_dim, size=size, rho=rho, leak=leak, seed=seed, w_in=w_in, w_res=w_res)


def init_model(reservoir: Reservoir) -> EsnModel:
    return EsnModel(reservoir=reservoir, w_out=np.zeros(reservoir.size + 1))


def advance(reservoir: Reservoir, state, x) -> np.ndarray:
    """One leaky-tanh reservoir update; works on a single state or a batch of row states."""
    state = np.asarray(state, dtype=float)
    x = np.asarray(getattr(x, "values", x), dtype=float)
    pre = x @ reservoir.w_in.T + state @ reservoir.w_res.T
    return (1.0 - reservoir.leak) * state + reservoir.leak * np.tanh(pre)


def final_states(reservoir: Reservoir, sequences) -> np.ndarray:
    """Reservoir state after each sequence, started from zero; ``sequences`` is ``(n, T, dim)``."""
    seqs = np.asarray(sequences, dtype=float)
    if seqs.ndim == 2:
        seqs = seqs[None]
    state = np.zeros((seqs.shape[0], reservoir.size))
    for t in range(seqs.shape[1]):
        state = advance(reservoir, state, seqs[:, t, :])
    return state


def _design(states: np.ndarray) -> np.ndarray:
    return np.hstack([states, np.ones((states.shape[0], 1))])


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def forward(model: EsnModel, sequence) -> float:
    """Probability that the sequence calls for the EType II codebook."""
    seq = np.asarray([getattr(v, "values", v) for v in sequence], dtype=float)
    if seq.shape[0] == 0:
        raise ValueError("empty sequence")
    z = _design(final_states(model.reservoir, seq[None])) @ model.w_out
    return float(sigmoid(z)[0])


def predict_proba(model: EsnModel, sequences) -> np.ndarray:
    return sigmoid(_design(final_states(model.reservoir, sequences)) @ model.w_out)


def loss(p, label) -> float:
    """Binary cross-entropy, mean over entries."""
    p = np.clip(np.asarray(p, dtype=float), _P_CLAMP, 1.0 - _P_CLAMP)
    y = np.asarray(label, dtype=float)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def readout_gradient(w_out: np.ndarray, design: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of the mean cross-entropy with respect to the readout."""
    p = sigmoid(design @ w_out)
    return design.T @ (p - labels) / len(labels)


def _stack(batch):
    seqs = np.stack([s.sequence for s in batch])
    labels = np.array([s.label for s in batch], dtype=float)
    return seqs, labels


def train_step(model: EsnModel, batch, cfg: TrainConfig) -> EsnModel:
    """One gradient step on the mean batch loss; the reservoir is untouched."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    seqs, labels = _stack(batch)
    design = _design(final_states(model.reservoir, seqs))
    return model.with_readout(model.w_out - cfg.lr * readout_gradient(model.w_out, design, labels))


def train_readout(w_out: np.ndarray, design: np.ndarray, labels: np.ndarray, cfg: TrainConfig,
                  rng: np.random.Generator) -> tuple[np.ndarray, list[float]]:
    """Minibatch gradient descent on fixed features; returns weights and per-epoch loss."""
    w = np.array(w_out, dtype=float)
    trace = []
    n = len(labels)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch):
            idx = order[start:start + cfg.batch]
            w -= cfg.lr * readout_gradient(w, design[idx], labels[idx])
        trace.append(loss(sigmoid(design @ w), labels))
    return w, trace


def train_local(model: EsnModel, dataset, cfg: TrainConfig, seed: int = 0) -> tuple[EsnModel, list[float]]:
    """``cfg.epochs`` passes of seeded shuffled minibatches over the local dataset."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    seqs, labels = _stack(dataset)
    design = _design(final_states(model.reservoir, seqs))
    w, trace = train_readout(model.w_out, design, labels, cfg, np.random.default_rng(seed))
    return model.with_readout(w), trace


def accuracy(model: EsnModel, dataset, threshold: float = 0.5) -> float:
    seqs, labels = _stack(dataset)
    return float(np.mean((predict_proba(model, seqs) > threshold) == (labels > 0.5)))


def dataset_loss(model: EsnModel, dataset) -> float:
    seqs, labels = _stack(dataset)
    return loss(predict_proba(model, seqs), labels)


def save_checkpoint(model: EsnModel, path, extra: dict | None = None) -> None:
    r = model.reservoir
    record = {"version": CHECKPOINT_VERSION, "input_dim": r.input_dim, "size": r.size, "rho": r.rho,
              "leak": r.leak, "seed": r.seed, "w_out": [float(v) for v in model.w_out]}
    record.update(extra or {})
    with open(Path(path), "w") as f:
        json.dump(record, f, indent=2, sort_keys=True)
        f.write("\n")


def load_checkpoint(path) -> tuple[EsnModel, dict]:
    with open(Path(path)) as f:
        record = json.load(f)
    if record.get("version") != CHECKPOINT_VERSION:
        raise SchemaMismatch(f"unsupported checkpoint version {record.get('version')}")
    reservoir = init_reservoir(record["input_dim"], record["size"], record["rho"], record["seed"], record["leak"])
    w_out = np.array(record["w_out"], dtype=float)
    if w_out.shape != (reservoir.size + 1,):
        raise SchemaMismatch("readout length does not match reservoir size")
    return EsnModel(reservoir=reservoir, w_out=w_out), record
