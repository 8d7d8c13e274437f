"""Instance generators: EV-style synthetic populations and the adversarial family."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import truncnorm

from ._rng import substream
from .errors import InfeasibleConfig, InvalidArgs
from .model import CostModel, Instance, Job, ShapeKind


@dataclass(frozen=True)
class SyntheticConfig:
    """Parameter distributions for :func:`generate_synthetic`.

    Durations, window slack and arrivals are integer slot counts; powers are
    kW. ``arrival`` is ``"peaked"`` (clipped normal around
    ``arrival_center * T``, mimicking morning plug-ins) or ``"uniform"``.
    """

    J: int = 100
    T: int = 24
    shape: ShapeKind = ShapeKind.RECTANGULAR
    duration_range: tuple = (1, 4)
    power_range: tuple = (3.3, 7.2)
    slack_range: tuple = (0, 6)
    arrival: str = "peaked"
    arrival_center: float = 0.35
    arrival_spread: float = 0.15
    renewable_fraction: float = 0.70
    irradiance_noise: float = 0.5
    cost: str = "quadratic_tracking"

    def validate(self):
        dlo, dhi = self.duration_range
        if self.J < 0:
            raise InfeasibleConfig("J must be >= 0")
        if self.T < 1:
            raise InfeasibleConfig("T must be >= 1")
        if not (1 <= dlo <= dhi):
            raise InfeasibleConfig(f"bad duration range {self.duration_range}")
        if dlo > self.T:
            raise InfeasibleConfig(f"minimum duration {dlo} exceeds horizon {self.T}")
        p_lo, p_hi = self.power_range
        if not (0 <= p_lo <= p_hi):
            raise InfeasibleConfig(f"bad power range {self.power_range}")
        slo, shi = self.slack_range
        if not (0 <= slo <= shi):
            raise InfeasibleConfig(f"bad slack range {self.slack_range}")
        if self.renewable_fraction < 0:
            raise InfeasibleConfig("renewable_fraction must be >= 0")
        if self.arrival not in ("peaked", "uniform"):
            raise InfeasibleConfig(f"unknown arrival profile {self.arrival!r}")
        if self.cost not in ("quadratic_tracking", "quadratic_pure", "linear"):
            raise InfeasibleConfig(f"unknown cost {self.cost!r}")


def solar_profile(T: int) -> np.ndarray:
    """Mean irradiance shape: a half-sine between 25% and 80% of the horizon."""
    t = np.arange(T) + 0.5
    rise, setting = 0.25 * T, 0.80 * T
    x = np.clip((t - rise) / max(setting - rise, 1e-9), 0.0, 1.0)
    return np.sin(np.pi * x)


def _realistic_shape(rng, power: float, d: int) -> np.ndarray:
    # constant-current phase, then a geometric taper
    if d == 1:
        return np.array([power])
    knee = int(rng.integers(1, d + 1))
    ratio = rng.uniform(0.4, 0.8)
    shape = np.full(d, power)
    tail = np.arange(1, d - knee + 1)
    shape[knee:] = power * ratio ** tail
    shape *= rng.uniform(0.9, 1.1, size=d)
    return shape


def generate_synthetic(config: SyntheticConfig, seed: int) -> Instance:
    """Random EV-charging-like instance, deterministic in ``seed``.

    The renewable profile is a solar curve sampled per slot from a normal
    around the mean irradiance truncated to ``[0, inf)`` (std
    ``irradiance_noise`` times the average irradiance), then scaled so that
    its total equals ``renewable_fraction`` of the total job energy.
    """
    config.validate()
    T = config.T
    rng = substream(seed, "jobs")
    dlo, dhi = config.duration_range
    dhi = min(dhi, T)
    jobs = []
    for j in range(config.J):
        d = int(rng.integers(dlo, dhi + 1))
        slack = int(rng.integers(config.slack_range[0], config.slack_range[1] + 1))
        width = min(T, d + slack)
        n_arr = T - width + 1
        if config.arrival == "uniform":
            a = int(rng.integers(1, n_arr + 1))
        else:
            c = rng.normal(config.arrival_center * T, config.arrival_spread * T)
            a = int(np.clip(np.rint(c), 1, n_arr))
        p = float(rng.uniform(*config.power_range))
        if config.shape == ShapeKind.RECTANGULAR:
            job = Job.rectangular(j, p, d, a, a + width - 1)
        else:
            job = Job(j, _realistic_shape(rng, p, d), a, a + width - 1, ShapeKind.REALISTIC)
        jobs.append(job)

    energy = float(sum(job.energy for job in jobs))
    rr = substream(seed, "renewable")
    mean = solar_profile(T)
    noise = config.irradiance_noise * mean.sum() / T
    if noise > 0:
        lower = -mean / noise
        r = mean + noise * truncnorm.ppf(rr.random(T), lower, np.inf)
    else:
        r = mean.copy()
    total = r.sum()
    renewable = r * (config.renewable_fraction * energy / total) if total > 0 else np.zeros(T)

    if config.cost == "quadratic_tracking":
        cost = CostModel.quadratic_tracking()
    elif config.cost == "quadratic_pure":
        cost = CostModel.quadratic_pure()
    else:
        cost = CostModel.linear(renewable.max() - renewable)
    return Instance(T, jobs, cost, renewable)


def generate_adversarial(N: int, T: int) -> Instance:
    """``N*T`` unit jobs of one slot, each free over the whole horizon, cost ``sum L^2``."""
    if T < 2 or N < 1:
        raise InvalidArgs("adversarial instance needs T >= 2 and N >= 1")
    jobs = [Job.rectangular(j, 1.0, 1, 1, T) for j in range(N * T)]
    return Instance(T, jobs, CostModel.quadratic_pure())
