import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from feelsplit.energy import (
    ZERO_COSTS,
    DeviceProfile,
    DeviceState,
    FleetConfig,
    OverdraftError,
    RoundCosts,
    charge,
    compute_energy,
    compute_energy_from_time,
    compute_time,
    feasible,
    generate_fleet,
    load_fleet_csv,
    round_costs,
    upload_energy,
    upload_time,
    write_fleet_csv,
)


def profile(**kw):
    base = dict(device_id=0, cpu_freq=1e9, cycles_per_sample=1e6, capacitance=2e-28,
                tx_power=0.5, uplink_rate=1e6, initial_energy=1.0)
    base.update(kw)
    return DeviceProfile(**base)


def test_compute_time():
    p = profile()
    assert compute_time(p, 0, 1) == 0.0
    assert compute_time(p, 1000, 1) == pytest.approx(1.0)
    assert compute_time(p, 1000, 2) == 2 * compute_time(p, 1000, 1)


def test_compute_energy_hand_value():
    # alpha/2 = 1e-28, f^2 = 1e18, |D| * phi = 1e9
    assert compute_energy(profile(), 1000, 1) == pytest.approx(1e-1, rel=1e-12)
    assert compute_energy(profile(), 0, 3) == 0.0


def test_energy_routes_agree_on_random_profiles():
    rng = np.random.default_rng(0)
    for fleet_profile in generate_fleet(100, FleetConfig(), rng):
        n, ep = int(rng.integers(1, 5000)), int(rng.integers(1, 10))
        direct = compute_energy(fleet_profile, n, ep)
        via_time = compute_energy_from_time(fleet_profile, compute_time(fleet_profile, n, ep))
        assert abs(direct - via_time) <= 1e-12 * abs(direct)


def test_upload():
    p = profile(uplink_rate=1e6, tx_power=0.5)
    assert upload_time(p, 1e6) == 1.0
    assert upload_time(profile(uplink_rate=2e6), 1e6) == 0.5
    assert upload_time(p, 1e-300) == pytest.approx(0.0)
    assert upload_energy(p, 1e6) == 0.5
    assert upload_energy(profile(tx_power=0.0), 1e6) == 0.0
    assert upload_energy(p, 3e6) == pytest.approx(3 * upload_energy(p, 1e6))


def test_profile_validation():
    with pytest.raises(ValueError):
        profile(cpu_freq=0.0)
    with pytest.raises(ValueError):
        profile(tx_power=-1.0)
    with pytest.raises(ValueError):
        DeviceState(profile(), 2.0)


def test_feasible_boundaries():
    state = DeviceState.fresh(profile(initial_energy=1.0))
    assert feasible(state, ZERO_COSTS, 1e-9)
    assert feasible(state, RoundCosts(0.75, 0.25, 0.1, 0.1), 1.0)
    assert not feasible(state, RoundCosts(0.0, 0.0, 0.5, 0.5 + 1e-9), 10.0)
    dead = DeviceState(profile(), 0.0)
    assert not dead.alive and not feasible(dead, ZERO_COSTS, 1.0)


def test_charge():
    state = DeviceState.fresh(profile(initial_energy=1.0))
    assert charge(state, ZERO_COSTS) == state
    assert charge(state, RoundCosts(0, 0, 0.3, 0.1)).remaining_energy == pytest.approx(0.6)
    drained = charge(state, RoundCosts(0, 0, 0.5, 0.5))
    assert drained.remaining_energy == 0.0 and not drained.alive
    with pytest.raises(OverdraftError):
        charge(state, RoundCosts(0, 0, 1.0, 0.1))


@given(st.lists(st.floats(0, 0.1), max_size=8))
def test_charge_sequence_matches_summed_cost(costs):
    state = DeviceState.fresh(profile(initial_energy=1.0))
    for c in costs:
        state = charge(state, RoundCosts(0, 0, c, 0.0))
    assert state.remaining_energy == pytest.approx(1.0 - math.fsum(costs), abs=1e-12)


@given(st.integers(0, 1000), st.integers(1, 5), st.floats(1.0, 1e6), st.floats(0.0, 2.0))
def test_costs_monotone(n, ep, bits, power):
    p = profile(tx_power=power)
    base = round_costs(p, n, ep, bits)
    for bigger in (round_costs(p, n + 1, ep, bits), round_costs(p, n, ep + 1, bits),
                   round_costs(p, n, ep, bits * 2), round_costs(profile(tx_power=power + 0.1), n, ep, bits)):
        assert bigger.energy >= base.energy and bigger.time >= base.time


def test_fleet_csv_roundtrip(tmp_path):
    fleet = generate_fleet(5, FleetConfig(), np.random.default_rng(1))
    write_fleet_csv(fleet, tmp_path / "fleet.csv")
    assert load_fleet_csv(tmp_path / "fleet.csv") == fleet
    (tmp_path / "bad.csv").write_text("device_id,f_cmp\n0,1\n")
    with pytest.raises(ValueError, match="header"):
        load_fleet_csv(tmp_path / "bad.csv")


def test_fleet_ranges():
    fleet = generate_fleet(50, FleetConfig(), np.random.default_rng(2))
    assert all(0.5e9 <= p.cpu_freq <= 2e9 and 50 <= p.initial_energy <= 200 for p in fleet)
    assert [p.device_id for p in fleet] == list(range(50))
