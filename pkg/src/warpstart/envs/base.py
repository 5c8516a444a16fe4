"""Shared environment contracts: specs, exact-state snapshots, teleport resets.

Every environment in this package is a small cooperative Dec-POMDP that, in
addition to the usual reset/step interface, supports *teleportation*: the full
simulator state can be read out as an exactly serializable snapshot and later
restored, after which the dynamics are indistinguishable from having reached
that state organically. Teleports are what allow episodes to start at
arbitrary imagined states instead of the canonical initial state.

Environments also expose two factored-field codecs (one for global states,
one for per-agent observations) so that generative models can treat every
state/observation component as a small categorical variable, plus a flat
float feature vector per state for value mixing and prompt conditioning.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np


class ContractViolation(RuntimeError):
    """An operation was called outside its contract (bad action, bad state)."""


@dataclass(frozen=True)
class EnvSpec:
    """Static description of an environment instance."""

    n_agents: int
    n_actions: int
    state_dim: int
    obs_dim: int
    max_episode_steps: int
    reward_lo: float
    reward_hi: float

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValueError("n_agents must be >= 2")
        if self.n_actions < 2:
            raise ValueError("n_actions must be >= 2")
        if self.max_episode_steps < 1:
            raise ValueError("max_episode_steps must be >= 1")
        if self.reward_lo > self.reward_hi:
            raise ValueError("reward_lo must be <= reward_hi")


@dataclass(frozen=True)
class EnvState:
    """Exact simulator snapshot: an opaque canonical byte payload plus the timestep.

    Equality is bitwise; two equal states under the same action sequence and
    RNG stream produce identical futures.
    """

    payload: bytes
    timestep: int

    def to_bytes(self) -> bytes:
        return struct.pack("<I", self.timestep) + self.payload

    @classmethod
    def from_bytes(cls, raw: bytes) -> "EnvState":
        if len(raw) < 4:
            raise ValueError("encoded EnvState too short")
        (timestep,) = struct.unpack("<I", raw[:4])
        return cls(payload=raw[4:], timestep=timestep)


@dataclass
class StepResult:
    next_state: EnvState
    next_obs: list[np.ndarray]
    reward: float
    done: bool
    avail_actions: np.ndarray  # bool [n_agents, n_actions]


@dataclass(frozen=True)
class FieldCodec:
    """A fixed tuple of small categorical fields encoding a state or observation."""

    cardinalities: tuple[int, ...]

    @property
    def n_fields(self) -> int:
        return len(self.cardinalities)

    @property
    def total_logits(self) -> int:
        return int(sum(self.cardinalities))

    def validate(self, fields: np.ndarray) -> None:
        fields = np.asarray(fields)
        if fields.shape[-1] != self.n_fields:
            raise ValueError(f"expected {self.n_fields} fields, got {fields.shape[-1]}")
        for i, card in enumerate(self.cardinalities):
            vals = fields[..., i]
            if np.any(vals < 0) or np.any(vals >= card):
                raise ValueError(f"field {i} out of range [0, {card})")


class TeleportEnv:
    """Base class for environments with exact get_state/set_state teleports.

    Subclasses implement the six underscore hooks and the codec conversions.
    Each instance is single-threaded; EnvState values are immutable and safe
    to share between instances.
    """

    spec: EnvSpec
    state_codec: FieldCodec
    obs_codec: FieldCodec
    #: episode return at or above which an evaluation episode counts as a success
    success_return: float

    def __init__(self):
        self._state: EnvState | None = None
        self._done = True
        self.teleport_count = 0

    # -- public contract ----------------------------------------------------

    def reset(self, seed: int) -> tuple[EnvState, list[np.ndarray], np.ndarray]:
        state = self._initial_state(seed)
        self._state = state
        self._done = False
        return state, self._observations(state), self._avail(state)

    def step(self, actions) -> StepResult:
        if self._state is None:
            raise ContractViolation("step() before reset()/set_state()")
        if self._done:
            raise ContractViolation("step() on a finished episode")
        actions = np.asarray(actions, dtype=np.int64)
        if actions.shape != (self.spec.n_agents,):
            raise ContractViolation(f"joint action must have shape ({self.spec.n_agents},)")
        avail = self._avail(self._state)
        for a, u in enumerate(actions):
            if u < 0 or u >= self.spec.n_actions or not avail[a, u]:
                raise ContractViolation(f"agent {a}: action {int(u)} unavailable")
        nxt, reward, done = self._transition(self._state, actions)
        self._state = nxt
        self._done = done
        return StepResult(nxt, self._observations(nxt), float(reward), done, self._avail(nxt))

    def get_state(self) -> EnvState:
        if self._state is None:
            raise ContractViolation("get_state() before reset()/set_state()")
        return self._state

    def set_state(self, state: EnvState) -> tuple[list[np.ndarray], np.ndarray]:
        """Teleport to `state`. Raises ContractViolation naming the violated invariant."""
        self._validate_state(state)
        self._state = state
        self._done = self.is_terminal(state)
        self.teleport_count += 1
        return self._observations(state), self._avail(state)

    @property
    def done(self) -> bool:
        return self._done

    def observations(self, state: EnvState) -> list[np.ndarray]:
        """Per-agent observation vectors; a pure function of the state."""
        return self._observations(state)

    def avail_actions(self, state: EnvState) -> np.ndarray:
        return self._avail(state)

    # -- hooks ---------------------------------------------------------------

    def _initial_state(self, seed: int) -> EnvState:
        raise NotImplementedError

    def _transition(self, state: EnvState, actions: np.ndarray) -> tuple[EnvState, float, bool]:
        raise NotImplementedError

    def _observations(self, state: EnvState) -> list[np.ndarray]:
        raise NotImplementedError

    def _avail(self, state: EnvState) -> np.ndarray:
        raise NotImplementedError

    def _validate_state(self, state: EnvState) -> None:
        raise NotImplementedError

    def is_terminal(self, state: EnvState) -> bool:
        raise NotImplementedError

    # -- codecs --------------------------------------------------------------

    def state_vector(self, state: EnvState) -> np.ndarray:
        """Flat float features of a state (length spec.state_dim)."""
        raise NotImplementedError

    def state_fields(self, state: EnvState) -> np.ndarray:
        """Factored categorical encoding of the non-timestep state components."""
        raise NotImplementedError

    def state_from_fields(self, fields: np.ndarray, timestep: int) -> EnvState:
        raise NotImplementedError

    def state_field_mask(self, index: int, partial: list[int]) -> np.ndarray:
        """Valid values of state field `index` given fields 0..index-1 (for decoding)."""
        return np.ones(self.state_codec.cardinalities[index], dtype=bool)

    def obs_fields(self, obs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def obs_from_fields(self, fields: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def pack_fields(values) -> bytes:
    """Canonical byte payload for a short tuple of small nonnegative ints."""
    return struct.pack(f"<{len(values)}B", *[int(v) for v in values])


def unpack_fields(payload: bytes) -> tuple[int, ...]:
    return struct.unpack(f"<{len(payload)}B", payload)
