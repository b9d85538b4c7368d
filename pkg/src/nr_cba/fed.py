"""Federated averaging of ESN readouts and codebook selection at execution time."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adaptation import CodebookChoice
from .errors import ReservoirMismatch
from .rc import EsnModel, TrainConfig, _design, final_states, forward, loss, sigmoid, train_readout


@dataclass(frozen=True)
class FederationConfig:
    n_ues: int = 8
    rounds: int = 15
    master_seed: int = 0
    train_cfg: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.n_ues < 1 or self.rounds < 1:
            raise ValueError("n_ues and rounds must be at least 1")


@dataclass(frozen=True)
class RoundLog:
    round: int
    sizes: tuple[int, ...]
    local_losses: tuple[float, ...]
    val_loss: float
    val_acc: float
    upload_bytes: int = 0   # readouts sent to the server this round


def weighted_average(vectors, sizes) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=float)
    if len(vectors) != len(sizes) or len(sizes) == 0:
        raise ValueError("need one positive size per model")
    if np.any(sizes <= 0):
        raise ValueError("dataset sizes must be positive")
    weights = sizes / sizes.sum()
    base = np.asarray(vectors[0], dtype=float)
    # base plus weighted deltas: identical inputs come back bit-exact, and the
    # fixed summation order keeps the result independent of scheduling
    delta = np.zeros_like(base)
    for w, v in zip(weights, vectors):
        delta = delta + w * (np.asarray(v, dtype=float) - base)
    return base + delta


def fedavg(models: list[EsnModel], sizes) -> EsnModel:
    """Dataset-size weighted mean of the readouts; all models must share one reservoir."""
    digest = models[0].reservoir.digest()
    if any(m.reservoir.digest() != digest for m in models[1:]):
        raise ReservoirMismatch("models were built on different reservoirs")
    return models[0].with_readout(weighted_average([m.w_out for m in models], sizes))


def ue_seed(master_seed: int, ue: int, rnd: int) -> np.random.Generator:
    return np.random.default_rng([master_seed, ue, rnd])


def federate_readout(w0: np.ndarray, designs: list[np.ndarray], labels: list[np.ndarray],
                     fed_cfg: FederationConfig, val: tuple[np.ndarray, np.ndarray] | None = None,
                     ue_order=None):
    """FedAvg over per-UE readout training on fixed design matrices.

    ``ue_order`` only changes the order in which UEs train; each update depends
    on its own UE index alone and the average is taken in index order.
    Returns the global weights, the round logs and the per-round global weights.
    """
    w = np.array(w0, dtype=float)
    sizes = tuple(len(y) for y in labels)
    order = range(len(designs)) if ue_order is None else ue_order
    if sorted(order) != list(range(len(designs))):
        raise ValueError("ue_order must be a permutation of the UE indices")
    logs, history = [], []
    for rnd in range(fed_cfg.rounds):
        local_w, local_loss = [None] * len(designs), [None] * len(designs)
        for ue in order:
            x, y = designs[ue], labels[ue]
            wl, trace = train_readout(w, x, y, fed_cfg.train_cfg, ue_seed(fed_cfg.master_seed, ue, rnd))
            local_w[ue] = wl
            local_loss[ue] = trace[-1] if trace else loss(sigmoid(x @ wl), y)
        w = weighted_average(local_w, sizes)
        history.append(w.copy())
        if val is not None:
            p = sigmoid(val[0] @ w)
            val_loss = loss(p, val[1])
            val_acc = float(np.mean((p > 0.5) == (val[1] > 0.5)))
        else:
            val_loss = val_acc = float("nan")
        logs.append(RoundLog(round=rnd + 1, sizes=sizes, local_losses=tuple(local_loss),
                             val_loss=val_loss, val_acc=val_acc,
                             upload_bytes=sum(v.nbytes for v in local_w)))
    return w, logs, history


def _design_and_labels(model: EsnModel, dataset):
    seqs = np.stack([s.sequence for s in dataset])
    labels = np.array([s.label for s in dataset], dtype=float)
    return _design(final_states(model.reservoir, seqs)), labels


def run_training(model: EsnModel, datasets, fed_cfg: FederationConfig, val_set=None, ue_order=None):
    """Algorithm-1 training stage: broadcast, local training, FedAvg, repeated ``rounds`` times.

    ``datasets`` is a list of per-UE sample lists, or a callable ``ue -> samples``.
    """
    if callable(datasets):
        datasets = [datasets(ue) for ue in range(fed_cfg.n_ues)]
    if any(len(d) == 0 for d in datasets):
        raise ValueError("every UE needs a non-empty dataset")
    pairs = [_design_and_labels(model, d) for d in datasets]
    val = _design_and_labels(model, val_set) if val_set else None
    w, logs, _ = federate_readout(model.w_out, [p[0] for p in pairs], [p[1] for p in pairs], fed_cfg, val,
                                ue_order)
    return model.with_readout(w), logs


def execute(model: EsnModel, x_seq, threshold: float = 0.5) -> CodebookChoice:
    """Codebook the UE reports: EType II only when the model is strictly above threshold."""
    return CodebookChoice.ETYPE2 if forward(model, x_seq) > threshold else CodebookChoice.TYPE1
