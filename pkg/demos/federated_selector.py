"""
Training the codebook selector across a few UEs
===============================================

Each UE simulates short CSI-RS histories, labels them with the utility argmax
(SE gain minus lambda times the extra feedback bits), and trains the readout of
a shared echo state network. The server averages the readouts every round.
Small on purpose: runs in a couple of minutes on one core.
"""

import numpy as np

from nr_cba.fed import FederationConfig, execute, run_training
from nr_cba.harness import ExperimentConfig
from nr_cba.harness.baselines import train_perceptron, perceptron_scores
from nr_cba.harness.pipeline import STREAM_TEST, STREAM_TRAIN, STREAM_VAL, training_sample
from nr_cba.rc import TrainConfig, accuracy, init_model, init_reservoir

cfg = ExperimentConfig(sequence_length=4,
                       fed=FederationConfig(n_ues=4, rounds=15, train_cfg=TrainConfig(lr=0.01)))

# %%
# Local datasets: every sample descends from (master_seed, stream, ue, index)
per_ue = [[training_sample(cfg, STREAM_TRAIN, ue, i) for i in range(24)] for ue in range(cfg.fed.n_ues)]
val = [training_sample(cfg, STREAM_VAL, 0, i) for i in range(30)]
test = [training_sample(cfg, STREAM_TEST, 0, i) for i in range(30)]
labels = np.array([s.label for d in per_ue for s in d])
print(f"{labels.size} training sequences, {labels.mean():.0%} labeled EType II")

# %%
# Federated rounds: broadcast, local epochs, size-weighted average
reservoir = init_reservoir(cfg.schema.total_dim, cfg.reservoir_size, cfg.reservoir_rho, cfg.reservoir_seed)
model, logs = run_training(init_model(reservoir), per_ue, cfg.fed, val)
for log in logs[::3] + [logs[-1]]:
    print(f"round {log.round:2d}: val loss {log.val_loss:.4f}, val acc {log.val_acc:.2f}, "
          f"uploaded {log.upload_bytes} bytes")

# %%
# Same data through a perceptron on time-averaged features
w, p_logs = train_perceptron(per_ue, cfg.fed, val)
p_loss, p_acc = perceptron_scores(w, test)
print(f"test accuracy: ESN {accuracy(model, test):.2f}, perceptron {p_acc:.2f}")

# %%
# Execution stage: one UE decides what to report
choice = execute(model, test[0].sequence)
print("first test UE reports", choice.name, "| label was", "ETYPE2" if test[0].label else "TYPE1")
