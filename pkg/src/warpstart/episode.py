"""Episode storage shared by exploration, segmentation and TD training.

An episode of T transitions keeps T+1 states/observations (the trailing entry
is the terminal or final state) and T-length action/reward arrays. Steps that
came out of the generative model rather than the real simulator are flagged
per step, as are the per-step influence values recorded during exploration
(NaN where never computed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .envs.base import EnvState


@dataclass
class Episode:
    states: list[EnvState]            # length T+1
    state_vecs: np.ndarray            # [T+1, state_dim] float32
    obs: np.ndarray                   # [T+1, n_agents, obs_dim] float32
    avail: np.ndarray                 # [T+1, n_agents, n_actions] bool
    actions: np.ndarray               # [T, n_agents] int64
    rewards: np.ndarray               # [T] float32
    terminated: bool                  # episode reached done (goal or horizon)
    imagined: np.ndarray              # [T] bool
    influence: np.ndarray             # [T] float32, NaN if not recorded
    influence_per_agent: np.ndarray | None = None  # [T, n_agents] float32

    @property
    def length(self) -> int:
        return len(self.rewards)

    @property
    def total_reward(self) -> float:
        return float(self.rewards.sum())

    def __post_init__(self):
        T = self.length
        if len(self.states) != T + 1:
            raise ValueError("states must have length T+1")
        for name in ("state_vecs", "obs", "avail"):
            if len(getattr(self, name)) != T + 1:
                raise ValueError(f"{name} must have length T+1")
        for name in ("actions", "imagined", "influence"):
            if len(getattr(self, name)) != T:
                raise ValueError(f"{name} must have length T")


class EpisodeBuilder:
    """Accumulates transitions during a rollout and freezes them into an Episode."""

    def __init__(self, first_state: EnvState, first_vec, first_obs, first_avail):
        self.states = [first_state]
        self.state_vecs = [np.asarray(first_vec, dtype=np.float32)]
        self.obs = [np.asarray(first_obs, dtype=np.float32)]
        self.avail = [np.asarray(first_avail, dtype=bool)]
        self.actions: list[np.ndarray] = []
        self.rewards: list[float] = []
        self.imagined: list[bool] = []
        self.influence: list[float] = []
        self.influence_per_agent: list[np.ndarray] = []

    def add(self, actions, reward, next_state, next_vec, next_obs, next_avail,
            imagined=False, influence=float("nan"), influence_per_agent=None):
        self.actions.append(np.asarray(actions, dtype=np.int64))
        self.rewards.append(float(reward))
        self.imagined.append(bool(imagined))
        self.influence.append(float(influence))
        n = self.actions[-1].shape[0]
        if influence_per_agent is None:
            influence_per_agent = np.full(n, np.nan, dtype=np.float32)
        self.influence_per_agent.append(np.asarray(influence_per_agent, dtype=np.float32))
        self.states.append(next_state)
        self.state_vecs.append(np.asarray(next_vec, dtype=np.float32))
        self.obs.append(np.asarray(next_obs, dtype=np.float32))
        self.avail.append(np.asarray(next_avail, dtype=bool))

    def build(self, terminated: bool) -> Episode:
        n = self.obs[0].shape[0]
        return Episode(
            states=self.states,
            state_vecs=np.stack(self.state_vecs),
            obs=np.stack(self.obs),
            avail=np.stack(self.avail),
            actions=np.stack(self.actions) if self.actions else np.zeros((0, n), dtype=np.int64),
            rewards=np.asarray(self.rewards, dtype=np.float32),
            terminated=terminated,
            imagined=np.asarray(self.imagined, dtype=bool),
            influence=np.asarray(self.influence, dtype=np.float32),
            influence_per_agent=(
                np.stack(self.influence_per_agent)
                if self.influence_per_agent
                else np.zeros((0, n), dtype=np.float32)
            ),
        )


def concat_episodes(prefix: Episode, suffix: Episode) -> Episode:
    """Join two episodes sharing a boundary state (prefix end == suffix start)."""
    if prefix.states[-1] != suffix.states[0]:
        raise ValueError("boundary state mismatch between prefix and suffix")
    return Episode(
        states=prefix.states[:-1] + suffix.states,
        state_vecs=np.concatenate([prefix.state_vecs[:-1], suffix.state_vecs]),
        obs=np.concatenate([prefix.obs[:-1], suffix.obs]),
        avail=np.concatenate([prefix.avail[:-1], suffix.avail]),
        actions=np.concatenate([prefix.actions, suffix.actions]),
        rewards=np.concatenate([prefix.rewards, suffix.rewards]),
        terminated=suffix.terminated,
        imagined=np.concatenate([prefix.imagined, suffix.imagined]),
        influence=np.concatenate([prefix.influence, suffix.influence]),
        influence_per_agent=(
            np.concatenate([prefix.influence_per_agent, suffix.influence_per_agent])
            if prefix.influence_per_agent is not None and suffix.influence_per_agent is not None
            else None
        ),
    )
