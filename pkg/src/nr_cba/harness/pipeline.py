"""Sample generation and policy evaluation shared by the CLI commands."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..adaptation import CodebookChoice, LabeledLink, evaluate_link, report_overhead
from ..channel import ChannelRealization, evolve, make_profile, realize
from ..codebook import CodebookConfig, DftBeamGrid, build_beam_grid, overhead_tax
from ..fed import execute
from ..features import LabeledSample, assemble
from ..link import mismatched_se, snr_to_noise_var
from ..rc import EsnModel
from .config import ExperimentConfig, Scenario

POLICIES = ("type1", "etype2", "adaptive", "oracle")

# seed-stream tags; every random draw descends from (master_seed, stream, ...)
STREAM_TRAIN, STREAM_VAL, STREAM_TEST, STREAM_EVAL = 1, 2, 3, 4


@lru_cache(maxsize=4)
def beam_grid(cb: CodebookConfig) -> DftBeamGrid:
    return build_beam_grid(cb)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """T consecutive CSI periods of one UE plus the channel one staleness step later."""
    scenario: Scenario
    snr_db: float
    sample: LabeledSample
    last: LabeledLink
    h_last: ChannelRealization
    h_next: ChannelRealization


def snr_key(snr_db: float) -> int:
    return int(round((snr_db + 1000.0) * 1000.0))


def simulate(cfg: ExperimentConfig, scenario: Scenario, snr_db: float, entropy) -> Trajectory:
    """Run ``sequence_length`` CSI periods spaced ``staleness_s`` apart.

    The label is the utility argmax of the last period; ``h_next`` is where
    the chosen precoder is actually applied.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy))
    profile_seed, channel_seed = (int(v) for v in rng.integers(0, 2**32, size=2))
    cb = cfg.codebook
    grid = beam_grid(cb)
    noise_var = snr_to_noise_var(snr_db)
    profile = make_profile(scenario.kind, scenario.speed, scenario.delay_spread, profile_seed)
    h = realize(profile, cfg.n_rb, cfg.n_ue_antennas, (cb.n1, cb.n2), 0.0, channel_seed)
    rows, link = [], None
    for t in range(cfg.sequence_length):
        if t:
            h = evolve(h, profile, cfg.staleness_s)
        link = evaluate_link(h, grid, cb, cfg.utility, noise_var)
        rows.append(assemble(h, grid, cb, link.pmi2, link.link1, link.link2, scenario.speed, snr_db,
                             cfg.schema).values)
    sample = LabeledSample(sequence=np.stack(rows), label=int(link.choice))
    return Trajectory(scenario=scenario, snr_db=snr_db, sample=sample, last=link, h_last=h,
                      h_next=evolve(h, profile, cfg.staleness_s))


def draw_setting(cfg: ExperimentConfig, entropy) -> tuple[int, float]:
    """Scenario index from the mix weights and a uniform training SNR."""
    rng = np.random.default_rng(np.random.SeedSequence(list(entropy) + [0]))
    idx = int(rng.choice(len(cfg.scenarios), p=np.asarray(cfg.mix_weights)))
    lo, hi = cfg.train_snr_db
    return idx, float(rng.uniform(lo, hi))


def training_sample(cfg: ExperimentConfig, stream: int, ue: int, index: int) -> LabeledSample:
    entropy = [cfg.master_seed, stream, ue, index]
    idx, snr = draw_setting(cfg, entropy)
    return simulate(cfg, cfg.scenarios[idx], snr, entropy).sample


# ---------------------------------------------------------------------------
# Evaluation

@dataclass(frozen=True)
class PolicyOutcome:
    se: float
    overhead_bits: int
    utility: float


@dataclass(frozen=True)
class CellOutcome:
    """Stale-CSI results of one (scenario, SNR, seed) draw."""
    scenario: int
    snr_db: float
    seed: int
    label: int
    adaptive_choice: int
    gain: float
    policies: dict


def evaluate_trajectory(cfg: ExperimentConfig, traj: Trajectory, model: EsnModel | None) -> tuple:
    cb = cfg.codebook
    grid = beam_grid(cb)
    noise_var = snr_to_noise_var(traj.snr_db)
    pmi1, pmi2 = traj.last.pmi1, traj.last.pmi2
    se1 = mismatched_se(traj.h_next, pmi1, grid, cb, noise_var).se
    se2 = mismatched_se(traj.h_next, pmi2, grid, cb, noise_var).se
    gain = se2 / se1 - 1.0
    tax = overhead_tax(cb, pmi1.rank, pmi2.rank)
    bits = (report_overhead(cb, pmi1), report_overhead(cb, pmi2))
    fixed = (PolicyOutcome(se1, bits[0], 0.0),
             PolicyOutcome(se2, bits[1], gain - cfg.utility.lam * tax))
    oracle = fixed[1] if fixed[1].utility > fixed[0].utility else fixed[0]
    choice = int(execute(model, traj.sample.sequence)) if model is not None else traj.sample.label
    return gain, choice, {"type1": fixed[0], "etype2": fixed[1], "adaptive": fixed[choice], "oracle": oracle}


def evaluate_cell(cfg: ExperimentConfig, model: EsnModel | None, scenario: int, snr_db: float,
                  seed: int) -> CellOutcome:
    entropy = [cfg.master_seed, STREAM_EVAL, scenario, snr_key(snr_db), seed]
    traj = simulate(cfg, cfg.scenarios[scenario], snr_db, entropy)
    gain, choice, policies = evaluate_trajectory(cfg, traj, model)
    return CellOutcome(scenario=scenario, snr_db=snr_db, seed=seed, label=traj.sample.label,
                       adaptive_choice=choice, gain=gain, policies=policies)


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    snr_db: float
    policy: str
    mean_se: float
    mean_overhead_bits: float
    mean_utility: float
    accuracy: float | None
    n_seeds: int

    FIELDS = ("scenario", "snr_db", "policy", "mean_se", "mean_overhead_bits", "mean_utility",
              "accuracy", "n_seeds")

    def cells(self) -> list[str]:
        acc = "" if self.accuracy is None else repr(self.accuracy)
        return [self.scenario, repr(self.snr_db), self.policy, repr(self.mean_se),
                repr(self.mean_overhead_bits), repr(self.mean_utility), acc, str(self.n_seeds)]


def aggregate(cfg: ExperimentConfig, outcomes: list[CellOutcome]) -> list[ResultRow]:
    """Per-cell means; rows ordered by scenario (config order), SNR and policy."""
    groups: dict[tuple[int, float], list[CellOutcome]] = {}
    for o in sorted(outcomes, key=lambda o: (o.scenario, o.snr_db, o.seed)):
        groups.setdefault((o.scenario, o.snr_db), []).append(o)
    rows = []
    for (s, snr), cell in sorted(groups.items()):
        for policy in POLICIES:
            picked = [o.policies[policy] for o in cell]
            acc = None
            if policy == "adaptive":
                acc = float(np.mean([o.adaptive_choice == o.label for o in cell]))
            rows.append(ResultRow(
                scenario=cfg.scenarios[s].label, snr_db=float(snr), policy=policy,
                mean_se=float(np.mean([p.se for p in picked])),
                mean_overhead_bits=float(np.mean([p.overhead_bits for p in picked])),
                mean_utility=float(np.mean([p.utility for p in picked])),
                accuracy=acc, n_seeds=len(cell)))
    return rows


# ---------------------------------------------------------------------------
# Process-pool plumbing. Tasks are pure functions of their arguments, and
# results come back in submission order, so output is schedule independent.

_WORKER: dict = {}


def _init_worker(cfg, model):
    _WORKER["cfg"] = cfg
    _WORKER["model"] = model


def _run(task):
    kind, args = task
    cfg = _WORKER["cfg"]
    if kind == "sample":
        return training_sample(cfg, *args)
    return evaluate_cell(cfg, _WORKER["model"], *args)


def run_tasks(cfg: ExperimentConfig, tasks: list, parallel: int = 1, model: EsnModel | None = None) -> list:
    if parallel <= 1 or len(tasks) < 2:
        _init_worker(cfg, model)
        return [_run(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * parallel))
    with ProcessPoolExecutor(max_workers=parallel, initializer=_init_worker, initargs=(cfg, model)) as pool:
        return list(pool.map(_run, tasks, chunksize=chunk))


def generate_datasets(cfg: ExperimentConfig, parallel: int = 1) -> dict[str, list[LabeledSample]]:
    """Per-UE training sets plus the validation and test sets."""
    tasks = [("sample", (STREAM_TRAIN, ue, i)) for ue in range(cfg.fed.n_ues) for i in range(cfg.samples_per_ue)]
    tasks += [("sample", (STREAM_VAL, 0, i)) for i in range(cfg.val_samples)]
    tasks += [("sample", (STREAM_TEST, 0, i)) for i in range(cfg.test_samples)]
    samples = run_tasks(cfg, tasks, parallel)
    out, pos = {}, 0
    for ue in range(cfg.fed.n_ues):
        out[f"ue{ue}"] = samples[pos:pos + cfg.samples_per_ue]
        pos += cfg.samples_per_ue
    out["val"] = samples[pos:pos + cfg.val_samples]
    pos += cfg.val_samples
    out["test"] = samples[pos:]
    return out


def evaluate_grid(cfg: ExperimentConfig, model: EsnModel | None, snr_grid=None, parallel: int = 1,
                  scenarios=None) -> list[CellOutcome]:
    snr_grid = cfg.snr_grid_db if snr_grid is None else snr_grid
    scenarios = range(len(cfg.scenarios)) if scenarios is None else scenarios
    tasks = [("eval", (s, float(snr), k)) for s in scenarios for snr in snr_grid for k in range(cfg.eval_seeds)]
    return run_tasks(cfg, tasks, parallel, model)
