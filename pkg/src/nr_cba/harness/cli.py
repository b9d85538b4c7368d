"""``nr-cba`` command line: dataset, train, evaluate and sweep."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..errors import ConfigError, NrCbaError, SchemaMismatch
from ..features import load_dataset, save_dataset
from ..fed import run_training
from ..rc import accuracy, dataset_loss, init_model, init_reservoir, load_checkpoint, save_checkpoint
from .baselines import KnnClassifier, perceptron_scores, rounds_to_reach, time_averaged, train_perceptron
from .config import ExperimentConfig, load_config
from .pipeline import ResultRow, aggregate, evaluate_grid, generate_datasets

log = logging.getLogger("nr_cba")

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def git_blob_hash(data: bytes) -> str:
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def write_csv(path: Path, manifest: str, header, rows) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# manifest: {manifest}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_manifest(out: Path, cfg: ExperimentConfig, command: str, files: list[Path], extra=None) -> None:
    record = {
        "command": command,
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "model_hash": cfg.model_digest(),
        "seed": cfg.master_seed,
        "files": {str(p.relative_to(out)): git_blob_hash(p.read_bytes()) for p in files},
    }
    record.update(extra or {})
    with open(out / f"manifest_{command}.json", "w") as f:
        json.dump(record, f, indent=2, sort_keys=True)
        f.write("\n")


def with_seed(cfg: ExperimentConfig, seed: int | None) -> ExperimentConfig:
    if seed is None:
        return cfg
    return cfg.replace(master_seed=seed, fed=dataclasses.replace(cfg.fed, master_seed=seed))


# ---------------------------------------------------------------------------
# Commands

def cmd_dataset(cfg: ExperimentConfig, out: Path, parallel: int = 1) -> Path:
    ds_dir = out / "dataset"
    ds_dir.mkdir(parents=True, exist_ok=True)
    sets = generate_datasets(cfg, parallel)
    files = []
    for name, samples in sets.items():
        path = ds_dir / f"{name}.csv"
        labels = [s.label for s in samples]
        save_dataset(path, samples, cfg.schema, cfg.sequence_length, cfg.digest(),
                     extra={"positive_fraction": float(np.mean(labels)) if labels else None})
        files += [path, path.with_suffix(".meta.json")]
    write_manifest(out, cfg, "dataset", files)
    log.info("dataset: %s", {k: len(v) for k, v in sets.items()})
    return ds_dir


def _load_sets(cfg: ExperimentConfig, ds_dir: Path) -> dict:
    sets = {}
    names = [f"ue{ue}" for ue in range(cfg.fed.n_ues)] + ["val", "test"]
    for name in names:
        samples, meta = load_dataset(ds_dir / f"{name}.csv", cfg.schema)
        if meta["sequence_length"] != cfg.sequence_length:
            raise SchemaMismatch(f"{name}: sequence length {meta['sequence_length']} != {cfg.sequence_length}")
        sets[name] = samples
    return sets


def cmd_train(cfg: ExperimentConfig, out: Path, ds_dir: Path | None = None, knn_k: int | None = None) -> Path:
    ds_dir = ds_dir or out / "dataset"
    sets = _load_sets(cfg, ds_dir)
    per_ue = [sets[f"ue{ue}"] for ue in range(cfg.fed.n_ues)]
    val, test = sets["val"], sets["test"]
    reservoir = init_reservoir(cfg.schema.total_dim, cfg.reservoir_size, cfg.reservoir_rho,
                               cfg.reservoir_seed, cfg.reservoir_leak)
    model, logs = run_training(init_model(reservoir), per_ue, cfg.fed, val)

    w_p, p_logs = train_perceptron(per_ue, cfg.fed, val)
    x_train, y_train = time_averaged([s for d in per_ue for s in d])
    knn = KnnClassifier(knn_k or cfg.knn_k).fit(x_train, y_train)

    model_dir = out / "model"
    model_dir.mkdir(parents=True, exist_ok=True)
    ckpt = model_dir / "checkpoint.json"
    save_checkpoint(model, ckpt, extra={"model_hash": cfg.model_digest(), "config_hash": cfg.digest()})

    manifest = cfg.digest()
    rounds_csv = model_dir / "rounds.csv"
    write_csv(rounds_csv, manifest,
              ["round", "ue", "dataset_size", "local_loss", "global_val_loss", "global_val_acc"],
              [[r.round, ue, r.sizes[ue], repr(r.local_losses[ue]), repr(r.val_loss), repr(r.val_acc)]
               for r in logs for ue in range(len(r.sizes))])
    traces_csv = model_dir / "loss_traces.csv"
    write_csv(traces_csv, manifest, ["model", "round", "val_loss", "val_acc"],
              [["esn", r.round, repr(r.val_loss), repr(r.val_acc)] for r in logs]
              + [["perceptron", r.round, repr(r.val_loss), repr(r.val_acc)] for r in p_logs])

    esn_curve = [r.val_loss for r in logs]
    p_curve = [r.val_loss for r in p_logs]
    summary = {
        "esn_round1_val_loss": esn_curve[0],
        "esn_final_val_loss": esn_curve[-1],
        "perceptron_final_val_loss": p_curve[-1],
        "esn_rounds_to_perceptron_final": rounds_to_reach(esn_curve, p_curve[-1]),
        "perceptron_rounds": len(p_curve),
        "upload_bytes_per_round": logs[-1].upload_bytes,
    }
    if test:
        x_test, y_test = time_averaged(test)
        p_loss, p_acc = perceptron_scores(w_p, test)
        summary.update(esn_test_acc=accuracy(model, test), esn_test_loss=dataset_loss(model, test),
                       perceptron_test_acc=p_acc, perceptron_test_loss=p_loss,
                       knn_test_acc=knn.accuracy(x_test, y_test))
    summary["knn_k"] = knn.k
    summary["knn_train_acc"] = knn.accuracy(x_train, y_train)
    summary_path = model_dir / "summary.json"
    with open(summary_path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    write_manifest(out, cfg, "train", [ckpt, rounds_csv, traces_csv, summary_path])
    log.info("train: %s", summary)
    return ckpt


def _load_model(cfg: ExperimentConfig, ckpt: Path):
    model, record = load_checkpoint(ckpt)
    if record.get("model_hash") != cfg.model_digest():
        raise SchemaMismatch("checkpoint was trained with a different codebook, feature schema or reservoir")
    return model


def _result_rows(rows: list[ResultRow]):
    return [r.cells() for r in rows]


def cmd_evaluate(cfg: ExperimentConfig, out: Path, ckpt: Path | None = None, parallel: int = 1,
                 name: str = "results.csv") -> Path:
    model = _load_model(cfg, ckpt or out / "model" / "checkpoint.json")
    rows = aggregate(cfg, evaluate_grid(cfg, model, parallel=parallel))
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    write_csv(path, cfg.digest(), ResultRow.FIELDS, _result_rows(rows))
    write_manifest(out, cfg, "evaluate", [path])
    return path


def cmd_sweep(cfg: ExperimentConfig, out: Path, parallel: int = 1, retrain_per_snr: bool = False) -> Path:
    """Dataset, training and evaluation over the SNR grid, collected into one CSV.

    By default one model trained on the full SNR range serves the whole grid;
    with ``retrain_per_snr`` each grid point gets its own dataset and model.
    """
    out.mkdir(parents=True, exist_ok=True)
    if not retrain_per_snr:
        cmd_dataset(cfg, out, parallel)
        ckpt = cmd_train(cfg, out)
        model = _load_model(cfg, ckpt)
        rows = aggregate(cfg, evaluate_grid(cfg, model, parallel=parallel))
    else:
        rows = []
        for snr in cfg.snr_grid_db:
            sub = cfg.replace(snr_grid_db=(snr,), train_snr_db=(snr, snr))
            sub_out = out / f"snr_{snr:g}"
            cmd_dataset(sub, sub_out, parallel)
            ckpt = cmd_train(sub, sub_out)
            rows += aggregate(sub, evaluate_grid(sub, _load_model(sub, ckpt), parallel=parallel))
        rows.sort(key=lambda r: ([s.label for s in cfg.scenarios].index(r.scenario), r.snr_db))
    path = out / "sweep.csv"
    write_csv(path, cfg.digest(), ResultRow.FIELDS, _result_rows(rows))
    write_manifest(out, cfg, "sweep", [path], extra={"retrain_per_snr": retrain_per_snr})
    return path


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nr-cba", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("dataset", "train", "evaluate", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="YAML experiment config")
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--parallel", type=int, default=1, help="worker processes")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "train":
            p.add_argument("--dataset", type=Path, default=None, help="dataset dir (default OUT/dataset)")
            p.add_argument("--knn-k", type=int, default=None, help="override the KNN neighbor count")
        if name == "evaluate":
            p.add_argument("--checkpoint", type=Path, default=None,
                           help="checkpoint (default OUT/model/checkpoint.json)")
        if name == "sweep":
            p.add_argument("--retrain-per-snr", action="store_true",
                           help="separate dataset and model per grid point")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.parallel < 1:
            raise ConfigError("must be >= 1", field="--parallel")
        cfg = with_seed(load_config(args.config), args.seed)
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "dataset":
            cmd_dataset(cfg, args.out, args.parallel)
        elif args.command == "train":
            cmd_train(cfg, args.out, args.dataset, args.knn_k)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.out, args.checkpoint, args.parallel)
        else:
            cmd_sweep(cfg, args.out, args.parallel, args.retrain_per_snr)
    except (ConfigError, SchemaMismatch) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO
    except (NrCbaError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
