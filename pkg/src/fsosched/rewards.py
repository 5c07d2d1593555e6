"""Reward shaping for the learning controller.

Step rewards pay for delivered bundles, discounted by how much of the used
contact went to waste, and charge a penalty when a used contact delivers
nothing. The terminal bonus pays double scale for complete delivery, weighted
by how little contact time the episode spent, so finishing cheaply beats
finishing sloppily.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RewardParams:
    """Scale c and per-episode backlog beta (the episode's initial volume)."""

    beta: int
    c: float = 100.0

    def __post_init__(self) -> None:
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.c <= 0:
            raise ValueError("c must be positive")


def step_reward(delivered, unsuccessful, contact_length, params: RewardParams, action):
    """Reward for one contact decision; accepts scalars or equal-shape arrays.

    action 0 is always worth 0. A used contact that delivered something earns
    (c/beta)*delivered scaled down by the waste fraction eps/(eps+length); a
    used contact that delivered nothing costs eps*c/(2*beta).
    """
    d = np.asarray(delivered, dtype=float)
    e = np.asarray(unsuccessful, dtype=float)
    z = np.asarray(contact_length, dtype=float)
    a = np.asarray(action)
    if np.any(d < 0) or np.any(e < 0) or np.any(z < 0):
        raise ValueError("counts must be non-negative")
    if not np.all((a == 0) | (a == 1)):
        raise ValueError("action must be 0 or 1")
    scale = params.c / params.beta
    denom = e + z
    waste = np.divide(e, denom, out=np.zeros_like(denom), where=denom > 0)
    gain = scale * d * (1.0 - waste)
    penalty = -e * params.c / (2.0 * params.beta)
    r = np.where(a == 1, np.where(d >= 1, gain, penalty), 0.0)
    return float(r) if r.ndim == 0 else r


def episode_reward(eta: float, utilized_time: int, params: RewardParams) -> float:
    """Terminal bonus: full delivery pays 2*c scaled by beta/utilized_time,
    anything less pays c*eta."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta {eta} outside [0, 1]")
    if utilized_time < 0:
        raise ValueError("utilized_time must be >= 0")
    if eta == 1.0:
        efficiency = params.beta / utilized_time if utilized_time > 0 else 1.0
        return 2.0 * params.c * eta * efficiency
    return params.c * eta
