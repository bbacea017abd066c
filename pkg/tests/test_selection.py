import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feelsplit.energy import RoundCosts
from feelsplit.selection import (
    FleetStats,
    NodeReport,
    SelectionConfig,
    SelectionResult,
    coefficient,
    p2_objective,
    select,
)


def report(dev, energy=10.0, sim=0.5, e_cost=0.1, t_cost=1.0):
    return NodeReport(dev, energy, RoundCosts(t_cost, 0.0, e_cost, 0.0), sim)


def test_coefficient_extremes():
    cfg = SelectionConfig(similarity_weight=0.3, energy_weight=0.7)
    reports = [report(0, 5.0, 0.1), report(1, 20.0, 0.9), report(2, 10.0, 0.4)]
    stats = FleetStats.of(reports)
    assert coefficient(report(9, 20.0, 0.1), stats, cfg) == 0.0
    assert coefficient(report(9, 5.0, 0.9), stats, cfg) == pytest.approx(1.0)
    assert coefficient(reports[2], stats, cfg) == coefficient(report(7, 10.0, 0.4), stats, cfg)


def test_coefficient_degenerate_range_is_half():
    stats = FleetStats.of([report(0, 3.0, 0.2)])
    assert coefficient(report(0, 3.0, 0.2), stats, SelectionConfig()) == pytest.approx(0.5)


def test_identical_nodes_tie_break_by_id():
    result = select([report(d) for d in (4, 2, 0, 3, 1)], SelectionConfig(participants_per_round=3))
    assert result.selected == (0, 1, 2)


def test_energy_violation_never_selected():
    cfg = SelectionConfig(participants_per_round=3)
    reports = [report(0, energy=0.05, e_cost=0.1, sim=0.0), report(1), report(2)]
    result = select(reports, cfg)
    assert 0 not in result.selected and result.excluded_infeasible == (0,)


def test_deadline_violation_never_selected():
    cfg = SelectionConfig(participants_per_round=2, deadline=1.0)
    result = select([report(0, t_cost=1.5), report(1, t_cost=1.0), report(2)], cfg)
    assert result.selected == (1, 2)


def test_no_feasible_candidate_signals_empty():
    result = select([report(0, energy=0.01, e_cost=1.0)], SelectionConfig(participants_per_round=1))
    assert result.empty and result.selected == ()


def test_brute_force_against_coefficient_ranking():
    cfg = SelectionConfig(participants_per_round=2)
    reports = [report(0, 12.0, 0.3, 0.4), report(1, 30.0, 0.8, 0.2), report(2, 25.0, 0.1, 0.6),
               report(3, 5.0, 0.2, 0.1), report(4, 18.0, 0.6, 0.3)]
    result = select(reports, cfg)
    stats = FleetStats.of(reports)
    coeffs = {r.device_id: coefficient(r, stats, cfg) for r in reports}
    assert len(set(coeffs.values())) == 5
    # the chosen pair has the smallest coefficient sum of every 2-subset
    best = min(itertools.combinations(range(5), 2), key=lambda pair: sum(coeffs[d] for d in pair))
    assert result.selected == tuple(sorted(best))
    energies = {pair: p2_objective(SelectionResult(pair), reports) for pair in itertools.combinations(range(5), 2)}
    assert energies[result.selected] == pytest.approx(sum(reports[d].round_costs.energy for d in best))


def test_p2_objective():
    reports = [NodeReport(0, 5.0, RoundCosts(0, 0, 0.3, 0.2), 0.1), report(1, e_cost=0.25)]
    assert p2_objective(SelectionResult(()), reports) == 0.0
    assert p2_objective(SelectionResult((0,)), reports) == pytest.approx(0.5)
    assert p2_objective(SelectionResult((0, 1)), reports) == pytest.approx(
        p2_objective(SelectionResult((0,)), reports) + p2_objective(SelectionResult((1,)), reports))
    with pytest.raises(KeyError):
        p2_objective(SelectionResult((9,)), reports)


fleets = st.lists(
    st.tuples(st.floats(0.0, 50.0), st.floats(0.0, 1.0), st.floats(0.0, 5.0), st.floats(0.0, 3.0)),
    min_size=1, max_size=12,
)


@settings(max_examples=100, deadline=None)
@given(fleets, st.integers(1, 6))
def test_selection_properties(fleet, n):
    cfg = SelectionConfig(participants_per_round=n, deadline=2.0)
    reports = [report(d, e, s, c, t) for d, (e, s, c, t) in enumerate(fleet)]
    result = select(reports, cfg)
    ok = [r for r in reports if r.remaining_energy > 0 and r.round_costs.energy <= r.remaining_energy
          and r.round_costs.time <= cfg.deadline]
    assert len(result.selected) == min(n, len(ok))
    assert not set(result.selected) & set(result.excluded_infeasible)
    for d in result.selected:
        r = reports[d]
        assert r.round_costs.time <= cfg.deadline and r.round_costs.energy <= r.remaining_energy
    # scaling every battery by a constant keeps the ranking (only feasibility could change)
    scaled = [report(d, e * 3.0, s, c, t) for d, (e, s, c, t) in enumerate(fleet)]
    if {r.device_id for r in ok} == {d for d, r in enumerate(scaled) if r.round_costs.energy <= r.remaining_energy and r.remaining_energy > 0 and r.round_costs.time <= 2.0}:
        assert select(scaled, cfg).selected == result.selected


@settings(max_examples=100, deadline=None)
@given(fleets, st.integers(0, 11), st.floats(0.0, 1.0), st.floats(0.0, 10.0))
def test_coefficient_monotone(fleet, idx, sim_drop, energy_gain):
    idx %= len(fleet)
    cfg = SelectionConfig()
    reports = [report(d, e, s) for d, (e, s, _, _) in enumerate(fleet)]
    stats = FleetStats.of(reports)
    me = reports[idx]
    better = report(idx, me.remaining_energy + energy_gain, max(0.0, me.best_similarity - sim_drop))
    assert coefficient(better, stats, cfg) <= coefficient(me, stats, cfg) + 1e-12
