"""Per-round time and energy of a device: local computation plus model upload."""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class DeviceProfile:
    device_id: int
    cpu_freq: float  # cycles / s
    cycles_per_sample: float
    capacitance: float  # alpha; the energy model applies alpha / 2
    tx_power: float  # W
    uplink_rate: float  # bit / s
    initial_energy: float  # J

    def __post_init__(self):
        for f in fields(self)[1:]:
            value = getattr(self, f.name)
            # a silent (zero transmit power) radio is allowed
            if not (value > 0 or (f.name == "tx_power" and value == 0)):
                raise ValueError(f"device {self.device_id}: {f.name} must be > 0")


@dataclass(frozen=True)
class DeviceState:
    profile: DeviceProfile
    remaining_energy: float

    def __post_init__(self):
        if not 0.0 <= self.remaining_energy <= self.profile.initial_energy:
            raise ValueError(
                f"device {self.profile.device_id}: remaining energy {self.remaining_energy} "
                f"outside [0, {self.profile.initial_energy}]"
            )

    @classmethod
    def fresh(cls, profile: DeviceProfile) -> "DeviceState":
        return cls(profile, profile.initial_energy)

    @property
    def alive(self) -> bool:
        return self.remaining_energy > 0.0


@dataclass(frozen=True)
class RoundCosts:
    t_cmp: float
    t_up: float
    e_cmp: float
    e_up: float

    @property
    def time(self) -> float:
        return self.t_cmp + self.t_up

    @property
    def energy(self) -> float:
        return self.e_cmp + self.e_up


ZERO_COSTS = RoundCosts(0.0, 0.0, 0.0, 0.0)


def compute_time(profile: DeviceProfile, sample_count: int, epochs: int) -> float:
    return epochs * sample_count * profile.cycles_per_sample / profile.cpu_freq


def compute_energy(profile: DeviceProfile, sample_count: int, epochs: int) -> float:
    f = profile.cpu_freq
    return profile.capacitance / 2.0 * (epochs * f * f * sample_count * profile.cycles_per_sample)


def compute_energy_from_time(profile: DeviceProfile, seconds: float) -> float:
    """Energy of running the CPU at full frequency for ``seconds``."""
    return profile.capacitance / 2.0 * profile.cpu_freq**3 * seconds


def upload_time(profile: DeviceProfile, model_bits: float) -> float:
    return model_bits / profile.uplink_rate


def upload_energy(profile: DeviceProfile, model_bits: float) -> float:
    return upload_time(profile, model_bits) * profile.tx_power


def round_costs(profile: DeviceProfile, sample_count: int, epochs: int, model_bits: float) -> RoundCosts:
    return RoundCosts(
        t_cmp=compute_time(profile, sample_count, epochs),
        t_up=upload_time(profile, model_bits),
        e_cmp=compute_energy(profile, sample_count, epochs),
        e_up=upload_energy(profile, model_bits),
    )


def within_budget(remaining_energy: float, costs: RoundCosts, deadline: float) -> bool:
    return costs.time <= deadline and costs.energy <= remaining_energy


def feasible(state: DeviceState, costs: RoundCosts, deadline: float) -> bool:
    """Deadline and battery check; dead devices are never feasible."""
    return state.alive and within_budget(state.remaining_energy, costs, deadline)


class OverdraftError(RuntimeError):
    pass


def charge(state: DeviceState, costs: RoundCosts) -> DeviceState:
    spent = costs.energy
    if spent > state.remaining_energy:
        raise OverdraftError(
            f"device {state.profile.device_id}: charging {spent} J with {state.remaining_energy} J left"
        )
    return replace(state, remaining_energy=state.remaining_energy - spent)


# ---------------------------------------------------------------------------
# fleets


@dataclass(frozen=True)
class FleetConfig:
    """Uniform draw ranges for generated fleets, or a CSV file of fixed profiles."""

    cpu_freq: tuple[float, float] = (0.5e9, 2.0e9)
    cycles_per_sample: tuple[float, float] = (1e5, 1e6)
    capacitance: float = 2e-28
    tx_power: tuple[float, float] = (0.2, 1.0)
    uplink_rate: tuple[float, float] = (1e6, 10e6)
    initial_energy: tuple[float, float] = (50.0, 200.0)
    fleet_csv: Optional[str] = None

    def __post_init__(self):
        for name in ("cpu_freq", "cycles_per_sample", "tx_power", "uplink_rate", "initial_energy"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"fleet range {name} must satisfy 0 < low <= high")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if not self.capacitance > 0:
            raise ValueError("capacitance must be > 0")


def generate_fleet(count: int, ranges: FleetConfig, rng: np.random.Generator) -> list[DeviceProfile]:
    def draw(bounds):
        return rng.uniform(bounds[0], bounds[1], size=count)

    cpu, phi, power = draw(ranges.cpu_freq), draw(ranges.cycles_per_sample), draw(ranges.tx_power)
    rate, energy = draw(ranges.uplink_rate), draw(ranges.initial_energy)
    return [
        DeviceProfile(i, float(cpu[i]), float(phi[i]), ranges.capacitance, float(power[i]), float(rate[i]), float(energy[i]))
        for i in range(count)
    ]


FLEET_COLUMNS = ("device_id", "f_cmp", "phi", "alpha", "p_up", "gamma", "energy")


def load_fleet_csv(path: Path | str) -> list[DeviceProfile]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != FLEET_COLUMNS:
            raise ValueError(f"{path}: fleet header must be {','.join(FLEET_COLUMNS)}")
        out = []
        for line, row in enumerate(reader, start=2):
            try:
                out.append(
                    DeviceProfile(
                        int(row["device_id"]),
                        float(row["f_cmp"]),
                        float(row["phi"]),
                        float(row["alpha"]),
                        float(row["p_up"]),
                        float(row["gamma"]),
                        float(row["energy"]),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line}: {exc}") from exc
    if [p.device_id for p in out] != list(range(len(out))):
        raise ValueError(f"{path}: device ids must be 0..n-1 in order")
    return out


def write_fleet_csv(profiles: Sequence[DeviceProfile], path: Path | str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FLEET_COLUMNS)
        for p in profiles:
            writer.writerow(
                [p.device_id, repr(p.cpu_freq), repr(p.cycles_per_sample), repr(p.capacitance),
                 repr(p.tx_power), repr(p.uplink_rate), repr(p.initial_energy)]
            )
