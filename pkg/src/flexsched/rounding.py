"""Rounding of fractional start weights to one start per job."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._rng import keyed_uniforms
from .errors import InvalidInput
from .model import EPS_INT


class RoundingMode(str, enum.Enum):
    RANDOMIZED = "randomized"
    MAX_PROBABILITY = "max_probability"


@dataclass(frozen=True)
class RoundingConfig:
    mode: RoundingMode = RoundingMode.RANDOMIZED
    seed: int = 0
    eps: float = EPS_INT


def round_schedule(schedule, config: Optional[RoundingConfig] = None,
                   job_ids: Optional[Sequence[int]] = None) -> np.ndarray:
    """Pick one start per row among entries above ``eps``.

    Randomized mode draws start ``t`` with probability proportional to the
    row's weight there, by inverse CDF in time order. Each job's uniform is
    keyed by ``(seed, job id)`` so jobs are rounded independently of each
    other; ``job_ids`` defaults to the row index. Max-probability mode takes
    the largest entry, the earliest one on ties.
    """
    config = config or RoundingConfig()
    S = np.asarray(schedule, dtype=float)
    if S.ndim != 2:
        raise InvalidInput("schedule must be a matrix")
    J = S.shape[0]
    out = np.zeros_like(S)
    if J == 0:
        return out
    sums = S.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-6)
    if bad.size:
        raise InvalidInput(f"row {int(bad[0])} sums to {sums[bad[0]]!r}, not 1")
    support = S > config.eps
    if not np.all(support.any(axis=1)):
        raise InvalidInput(f"row {int(np.flatnonzero(~support.any(axis=1))[0])} has no support")
    rows = np.arange(J)
    if RoundingMode(config.mode) is RoundingMode.MAX_PROBABILITY:
        idx = np.argmax(np.where(support, S, -np.inf), axis=1)
    else:
        keys = rows if job_ids is None else job_ids
        u = keyed_uniforms(config.seed, "round", keys)
        cum = np.cumsum(np.where(support, S, 0.0), axis=1)
        idx = np.sum(cum <= (u * cum[:, -1])[:, None], axis=1)
        last = S.shape[1] - 1 - np.argmax(support[:, ::-1], axis=1)
        idx = np.minimum(idx, last)
    out[rows, idx] = 1.0
    return out
