"""Server-side choice of participating nodes from their self-reports.

Each candidate gets a coefficient mixing its normalized best sub-dataset
similarity with its normalized lack of energy; infeasible candidates are
dropped, the rest ranked by coefficient (lower first) and the first ``n`` win.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

from .energy import RoundCosts, within_budget
from .splitting import SubDatasetSummary

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NodeReport:
    device_id: int
    remaining_energy: float
    round_costs: RoundCosts
    best_similarity: float
    subdataset_summaries: tuple[SubDatasetSummary, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.best_similarity <= 1.0:
            raise ValueError("best_similarity must lie in [0, 1]")
        c = self.round_costs
        if min(c.t_cmp, c.t_up, c.e_cmp, c.e_up) < 0:
            raise ValueError("round costs must be non-negative")


@dataclass(frozen=True)
class SelectionConfig:
    participants_per_round: int = 5
    similarity_weight: float = 0.5
    energy_weight: float = 0.5
    deadline: float = 30.0

    def __post_init__(self):
        if self.participants_per_round < 1:
            raise ValueError("participants_per_round must be >= 1")
        if self.similarity_weight < 0 or self.energy_weight < 0:
            raise ValueError("selection weights must be >= 0")
        if not self.similarity_weight + self.energy_weight > 0:
            raise ValueError("selection weights must not both be zero")
        if not self.deadline > 0:
            raise ValueError("deadline must be > 0")


@dataclass(frozen=True)
class FleetStats:
    similarity_min: float
    similarity_max: float
    energy_min: float
    energy_max: float

    @classmethod
    def of(cls, reports: Sequence[NodeReport]) -> "FleetStats":
        if not reports:
            raise ValueError("fleet statistics need at least one report")
        sims = [r.best_similarity for r in reports]
        energies = [r.remaining_energy for r in reports]
        return cls(min(sims), max(sims), min(energies), max(energies))


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple[int, ...]
    coefficients: dict[int, float] = field(default_factory=dict)
    excluded_infeasible: tuple[int, ...] = ()

    @property
    def empty(self) -> bool:
        """No feasible candidate: the round has to be skipped."""
        return not self.selected


def _minmax(value: float, lo: float, hi: float) -> float:
    if hi == lo:
        return 0.5
    return (value - lo) / (hi - lo)


def coefficient(report: NodeReport, stats: FleetStats, cfg: SelectionConfig) -> float:
    sim = _minmax(report.best_similarity, stats.similarity_min, stats.similarity_max)
    energy = _minmax(report.remaining_energy, stats.energy_min, stats.energy_max)
    return cfg.similarity_weight * sim + cfg.energy_weight * (1.0 - energy)


def is_feasible(report: NodeReport, deadline: float) -> bool:
    return report.remaining_energy > 0 and within_budget(report.remaining_energy, report.round_costs, deadline)


def select(reports: Sequence[NodeReport], cfg: SelectionConfig) -> SelectionResult:
    if not reports:
        raise ValueError("no node reports")
    ok = [r for r in reports if is_feasible(r, cfg.deadline)]
    excluded = tuple(sorted(r.device_id for r in reports if not is_feasible(r, cfg.deadline)))
    if not ok:
        log.warning("no feasible candidate among %d reports; round skipped", len(reports))
        return SelectionResult((), {}, excluded)
    stats = FleetStats.of(ok)
    coeffs = {r.device_id: coefficient(r, stats, cfg) for r in ok}
    ranked = sorted(ok, key=lambda r: (coeffs[r.device_id], r.device_id))
    chosen = tuple(sorted(r.device_id for r in ranked[: cfg.participants_per_round]))
    return SelectionResult(chosen, coeffs, excluded)


def p2_objective(result: SelectionResult, reports: Sequence[NodeReport]) -> float:
    """Total computation plus upload energy of the selected nodes."""
    by_id = {r.device_id: r for r in reports}
    total = 0.0
    for dev in result.selected:
        if dev not in by_id:
            raise KeyError(f"selected device {dev} has no report")
        total += by_id[dev].round_costs.energy
    return total
