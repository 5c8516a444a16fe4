"""Counterfactual influence of a joint action at a state.

For each agent the joint value of the action the team actually took is
compared against the expected joint value when that agent's action is
marginalized out (uniformly over its available actions, everyone else held
fixed). The influence of the state is the largest such advantage: it is high
exactly where one agent's choice moves the team's value, i.e. where agents
interact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class InfluenceRecord:
    timestep: int
    value: float
    per_agent_advantage: np.ndarray

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("influence value must be finite")


BIN_LO = 0.0
BIN_HI = 10.0


def influence_bin(value: float) -> int:
    """Clamp to [0, 10] and round half-up to the nearest integer bin."""
    v = min(max(float(value), BIN_LO), BIN_HI)
    return int(math.floor(v + 0.5))


def influence(policy, state, memories, taken, avail) -> InfluenceRecord:
    """Influence of the taken joint action at `state`.

    `memories` are the post-observation agent memories, so per-agent utilities
    can be read straight off the hidden states. The counterfactual expectation
    is a uniform average over each agent's available actions (the taken action
    included).
    """
    taken = np.asarray(taken, dtype=np.int64)
    avail = np.asarray(avail, dtype=bool)
    n = len(memories)
    q_vectors = [policy.q_from_memory(m) for m in memories]
    chosen = np.array([q_vectors[a][taken[a]] for a in range(n)], dtype=np.float32)

    # each candidate gets its own mixer call so the arithmetic is identical
    # to a one-by-one enumeration (batched evaluation rounds differently)
    state_vec = policy.state_features(state)
    base = policy.mix(chosen, state_vec)
    advantages = np.zeros(n, dtype=np.float64)
    for a in range(n):
        values = []
        for u in np.flatnonzero(avail[a]):
            row = chosen.copy()
            row[a] = q_vectors[a][u]
            values.append(policy.mix(row, state_vec))
        advantages[a] = base - np.mean(np.asarray(values, dtype=np.float64))
    return InfluenceRecord(
        timestep=state.timestep,
        value=float(advantages.max()),
        per_agent_advantage=advantages,
    )
