"""CSV/JSON output of simulation runs and the splitting benchmark."""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .config import config_to_dict
from .simulation import RunConfig, RunReport, build_devices, trial_seed
from .splitting import EXACT_LIMIT, Partition, objectives, random_partition, split, split_exact

METRICS_HEADER = (
    "scheme", "trial", "round", "accuracy", "loss",
    "instant_energy_j", "cumulative_energy_j", "participants",
)
SUMMARY_METRICS = (
    ("accuracy", "accuracy"),
    ("loss", "loss"),
    ("instant_energy_j", "instantaneous_energy"),
    ("cumulative_energy_j", "cumulative_energy"),
)
SELECTION_HEADER = ("scheme", "trial", "round", "device_id", "coefficient", "selected")
BENCH_HEADER = (
    "instance", "device_id", "size", "k",
    "greedy_objective", "greedy_seconds",
    "random_mean_objective", "random_max_objective", "random_seconds",
    "exact_objective", "exact_seconds", "exact_note",
)
BENCH_EXACT_LIMIT = 10


def _num(x: float) -> str:
    # repr is locale-independent and round-trips
    return repr(float(x))


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _open(path: Path):
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def emit_results(reports: RunReport | Sequence[RunReport], cfg: RunConfig, out: Path | str) -> list[Path]:
    """Write metrics.csv, summary.csv, selection.csv and run_meta.json into ``out``."""
    if isinstance(reports, RunReport):
        reports = [reports]
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "metrics.csv", out / "summary.csv", out / "selection.csv", out / "run_meta.json"]

    with _open(paths[0]) as fh:
        w = _writer(fh)
        w.writerow(METRICS_HEADER)
        for rep in reports:
            for t, trial in enumerate(rep.trials):
                for r in trial:
                    w.writerow([
                        rep.scheme, t, r.round, _num(r.accuracy), _num(r.loss),
                        _num(r.instantaneous_energy), _num(r.cumulative_energy),
                        ";".join(str(d) for d in r.participant_ids),
                    ])

    with _open(paths[1]) as fh:
        w = _writer(fh)
        header = ["scheme", "round", "trials"]
        for col, _ in SUMMARY_METRICS:
            header += [f"{col}_mean", f"{col}_std"]
        w.writerow(header)
        for rep in reports:
            for i in range(len(rep.means["accuracy"])):
                row = [rep.scheme, i + 1, len(rep.trials)]
                for _, attr in SUMMARY_METRICS:
                    row += [_num(rep.means[attr][i]), _num(rep.stds[attr][i])]
                w.writerow(row)

    with _open(paths[2]) as fh:
        w = _writer(fh)
        w.writerow(SELECTION_HEADER)
        for rep in reports:
            for t, trial in enumerate(rep.trials):
                for r in trial:
                    chosen = set(r.participant_ids)
                    for dev in sorted(set(r.coefficients) | chosen):
                        coeff = r.coefficients.get(dev)
                        w.writerow([rep.scheme, t, r.round, dev, "" if coeff is None else _num(coeff), int(dev in chosen)])

    meta = {
        "artifact_version": __version__,
        "master_seed": cfg.master_seed,
        "schemes": [rep.scheme for rep in reports],
        "trial_seeds": [trial_seed(cfg.master_seed, t) for t in range(cfg.trials)],
        "config": config_to_dict(cfg),
    }
    with _open(paths[3]) as fh:
        json.dump(meta, fh, indent=2, sort_keys=False)
        fh.write("\n")
    return paths


def dump_partitions(records: Iterable[dict], path: Path | str) -> Path:
    """JSON-lines debug dump, one object per device split."""
    path = Path(path)
    with _open(path) as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return path


def partition_record(scheme: str, trial: int, device_split) -> dict:
    return {
        "scheme": scheme,
        "trial": trial,
        "device_id": device_split.device_id,
        "subset_count": device_split.partition.subset_count,
        "assignment": list(device_split.partition.assignment),
        "summaries": [
            {"subset_index": s.subset_index, "size": s.size, "internal_similarity": s.internal_similarity}
            for s in device_split.summaries
        ],
    }


def split_bench(cfg: RunConfig, out: Path | str, exact_limit: int = BENCH_EXACT_LIMIT) -> list[Path]:
    """Greedy vs random-feasible vs exhaustive splitting on sub-sampled device datasets."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "split_bench.csv"
    seed = trial_seed(cfg.master_seed, 0)
    locals_, _ = build_devices(cfg, seed)
    rng = np.random.default_rng([seed, 99])
    bench = cfg.bench
    exact_limit = min(exact_limit, EXACT_LIMIT)

    with _open(path) as fh:
        w = _writer(fh)
        w.writerow(BENCH_HEADER)
        for i in range(bench.instances):
            dev = int(rng.integers(len(locals_)))
            local = locals_[dev]
            size = min(bench.sizes[i % len(bench.sizes)], len(local))
            data = local.take(np.sort(rng.choice(len(local), size=size, replace=False)))
            k = min(bench.k, size // 2)
            split_seed = int(rng.integers(2**63))
            draws = np.random.default_rng(int(rng.integers(2**63)))

            t0 = time.perf_counter()
            greedy = split(data, k, cfg.similarity, split_seed)
            t_greedy = time.perf_counter() - t0

            t0 = time.perf_counter()
            rand_parts = [random_partition(size, k, draws) for _ in range(bench.random_draws)]
            t_rand = time.perf_counter() - t0
            greedy_obj, *rand_obj = objectives([greedy, *rand_parts], data, cfg.similarity)

            exact_obj = exact_s = ""
            note = ""
            if size > exact_limit:
                note = "instance too large"
            else:
                t0 = time.perf_counter()
                exact: Partition = split_exact(data, k, cfg.similarity)
                exact_s = _num(time.perf_counter() - t0)
                exact_obj = _num(objectives([exact], data, cfg.similarity)[0])
            w.writerow([
                i, dev, size, k, _num(greedy_obj), _num(t_greedy),
                _num(np.mean(rand_obj)), _num(np.max(rand_obj)), _num(t_rand),
                exact_obj, exact_s, note,
            ])
    return [path]
