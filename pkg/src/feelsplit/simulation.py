"""Round-based federated edge learning simulation.

A trial builds data and a device fleet from its seed, then repeats
selection -> local training -> aggregation -> evaluation -> energy commit for
``rounds`` rounds.  Three schemes share everything except who trains on what:

``proposed``
    devices split their data into diverse sub-datasets; the server ranks nodes
    by similarity and energy and picks ``n``; each picked node trains on the
    next sub-dataset of its rotation.
``vanilla_feel``
    every feasible device trains on its full local dataset.
``random_selection``
    ``n`` feasible devices drawn uniformly train on their full datasets.

Every random stream is keyed on (trial seed, purpose, ...) so the schemes see
the same data, fleet, initial model and per-(round, device) shuffles.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import energy as en
from .data import Dataset, GlobalDataSpec, LocalDataset, build_global_data, partition_noniid, with_seed
from .learning import TrainingConfig, aggregate, evaluate, global_loss, init_params, local_train
from .selection import NodeReport, SelectionConfig, select
from .similarity import SimilarityConfig
from .splitting import Partition, SubDatasetSummary, split, subsets, summarize

log = logging.getLogger(__name__)

SCHEMES = ("proposed", "vanilla_feel", "random_selection")

# stream keys
_DATA, _FLEET, _INIT, _SPLIT, _TRAIN, _SELECT = range(1, 7)


@dataclass(frozen=True)
class BenchConfig:
    instances: int = 20
    sizes: tuple[int, ...] = (8, 10, 30)
    k: int = 2
    random_draws: int = 20

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if self.instances < 1 or self.random_draws < 1:
            raise ValueError("instances and random_draws must be >= 1")
        if not self.sizes or min(self.sizes) < 2 * self.k:
            raise ValueError("every bench size must hold at least 2k samples")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    scheme: str = "proposed"
    device_count: int = 20
    rounds: int = 100
    trials: int = 5
    subdatasets_per_device: int = 4
    master_seed: int = 0
    baseline_participants: Optional[int] = None
    data: GlobalDataSpec = field(default_factory=GlobalDataSpec)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    fleet: en.FleetConfig = field(default_factory=en.FleetConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.device_count < 1:
            raise ValueError("device_count must be >= 1")
        if self.device_count < self.participants_per_round:
            raise ValueError("device_count must be >= participants_per_round")
        if self.subdatasets_per_device < 1:
            raise ValueError("subdatasets_per_device must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.baseline_participants is not None and self.baseline_participants < 1:
            raise ValueError("baseline_participants must be >= 1 when set")

    @property
    def participants_per_round(self) -> int:
        return self.selection.participants_per_round


@dataclass(frozen=True)
class RoundReport:
    round: int
    accuracy: float
    loss: float  # test loss of the global model
    global_loss: float  # sample-weighted training loss of the participants
    instantaneous_energy: float
    cumulative_energy: float
    participant_ids: tuple[int, ...]
    dropped_ids: tuple[int, ...]  # candidates excluded as infeasible this round
    dead_ids: tuple[int, ...] = ()  # devices whose battery ran out this round
    coefficients: dict[int, float] = field(default_factory=dict)


METRICS = ("accuracy", "loss", "instantaneous_energy", "cumulative_energy")


@dataclass
class RunReport:
    scheme: str
    trials: list[list[RoundReport]]
    means: dict[str, np.ndarray] = field(default_factory=dict)
    stds: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not self.means:
            for metric in METRICS:
                table = self.metric(metric)
                self.means[metric] = table.mean(axis=0)
                self.stds[metric] = table.std(axis=0)

    def metric(self, name: str) -> np.ndarray:
        """``(trials, rounds)`` array of one metric."""
        return np.array([[getattr(r, name) for r in trial] for trial in self.trials], dtype=np.float64)


@dataclass(frozen=True)
class DeviceSplit:
    device_id: int
    partition: Partition
    summaries: tuple[SubDatasetSummary, ...]


def trial_seed(master_seed: int, trial: int) -> int:
    return int(np.random.SeedSequence(master_seed + trial).generate_state(1, np.uint64)[0])


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng([int(k) for k in key])


def _derived_int(*key: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1, np.uint64)[0])


def build_fleet(cfg: RunConfig, seed: int) -> list[en.DeviceProfile]:
    if cfg.fleet.fleet_csv:
        profiles = en.load_fleet_csv(cfg.fleet.fleet_csv)
        if len(profiles) < cfg.device_count:
            raise ValueError(f"fleet file has {len(profiles)} devices, config needs {cfg.device_count}")
        return profiles[: cfg.device_count]
    return en.generate_fleet(cfg.device_count, cfg.fleet, _rng(seed, _FLEET))


def build_devices(cfg: RunConfig, seed: int) -> tuple[list[LocalDataset], Dataset]:
    spec = with_seed(cfg.data, _derived_int(seed, _DATA, cfg.data.seed))
    train, test = build_global_data(spec)
    return partition_noniid(train, cfg.device_count, spec), test


def split_device(local: LocalDataset, cfg: RunConfig, seed: int) -> DeviceSplit:
    # small devices cannot host k sub-datasets of two samples each
    k = max(1, min(cfg.subdatasets_per_device, len(local) // 2))
    part = split(local, k, cfg.similarity, _derived_int(seed, _SPLIT, local.device_id))
    return DeviceSplit(local.device_id, part, tuple(summarize(part, local, cfg.similarity, local.device_id)))


def _vanilla_pick(feasible_ids: list[int], cfg: RunConfig) -> list[int]:
    if cfg.baseline_participants is None:
        return feasible_ids
    return feasible_ids[: cfg.baseline_participants]


def run_trial(cfg: RunConfig, seed: int, on_split: Callable[[DeviceSplit], None] | None = None) -> list[RoundReport]:
    locals_, test = build_devices(cfg, seed)
    states = [en.DeviceState.fresh(p) for p in build_fleet(cfg, seed)]
    widths = cfg.training.layer_widths(cfg.data.feature_dim, cfg.data.class_count)
    params = init_params(widths, _rng(seed, _INIT))
    bits = params.bits
    epochs = cfg.training.epochs
    deadline = cfg.selection.deadline

    train_sets: list[list[Dataset]] = [[d] for d in locals_]
    best_sim = [0.0] * len(locals_)
    summaries: list[tuple[SubDatasetSummary, ...]] = [()] * len(locals_)
    if cfg.scheme == "proposed":
        for dev, local in enumerate(locals_):
            ds = split_device(local, cfg, seed)
            if on_split is not None:
                on_split(ds)
            train_sets[dev] = subsets(ds.partition, local)
            summaries[dev] = ds.summaries
            best_sim[dev] = min(s.internal_similarity for s in ds.summaries)
    rotation = [0] * len(locals_)

    accuracy, test_loss = evaluate(params, test, cfg.training.loss_kind)
    train_loss = math.nan
    cumulative = 0.0
    reports: list[RoundReport] = []
    for rnd in range(1, cfg.rounds + 1):
        current = [train_sets[d][rotation[d] % len(train_sets[d])] for d in range(len(locals_))]
        costs = [en.round_costs(s.profile, len(current[d]), epochs, bits) for d, s in enumerate(states)]
        ok = [d for d, s in enumerate(states) if en.feasible(s, costs[d], deadline)]
        ok_set = set(ok)
        dropped = tuple(d for d in range(len(states)) if d not in ok_set)
        coeffs: dict[int, float] = {}

        if cfg.scheme == "proposed":
            node_reports = [
                NodeReport(d, s.remaining_energy, costs[d], best_sim[d], summaries[d]) for d, s in enumerate(states)
            ]
            result = select(node_reports, cfg.selection)
            chosen = list(result.selected)
            coeffs = result.coefficients
        elif cfg.scheme == "vanilla_feel":
            chosen = _vanilla_pick(ok, cfg)
        else:
            n = min(cfg.participants_per_round, len(ok))
            picks = _rng(seed, _SELECT, rnd).choice(len(ok), size=n, replace=False) if ok else []
            chosen = sorted(ok[i] for i in picks)

        if not chosen:
            log.warning("trial %d round %d: no feasible device, keeping previous model", seed, rnd)
            reports.append(
                RoundReport(rnd, accuracy, test_loss, train_loss, 0.0, cumulative, (), dropped, (), coeffs)
            )
            continue

        updates = [
            local_train(params, current[d], cfg.training, [seed, _TRAIN, rnd, d], device_id=d) for d in chosen
        ]
        params = aggregate(updates)
        train_loss = global_loss(updates)
        accuracy, test_loss = evaluate(params, test, cfg.training.loss_kind)

        spent = 0.0
        dead = []
        for d in chosen:
            states[d] = en.charge(states[d], costs[d])
            spent += costs[d].energy
            if not states[d].alive:
                dead.append(d)
                log.info("device %d exhausted its battery in round %d", d, rnd)
            rotation[d] += 1
        cumulative += spent
        reports.append(
            RoundReport(
                rnd, accuracy, test_loss, train_loss, spent, cumulative,
                tuple(chosen), dropped, tuple(dead), coeffs,
            )
        )
    return reports


def run(cfg: RunConfig, on_split: Callable[[int, DeviceSplit], None] | None = None) -> RunReport:
    trials = []
    for t in range(cfg.trials):
        hook = None if on_split is None else (lambda ds, t=t: on_split(t, ds))
        trials.append(run_trial(cfg, trial_seed(cfg.master_seed, t), hook))
    return RunReport(cfg.scheme, trials)


def first_round_reaching(curve: Sequence[float], target: float) -> Optional[int]:
    """1-based round at which ``curve`` first reaches ``target``, or None."""
    for i, v in enumerate(curve):
        if v >= target:
            return i + 1
    return None
