"""A five-cell chain ending in the classic climb matrix game.

Two agents with three actions share a position ``p`` on a 5-cell chain.
On steps 0..3 the chain advances by one cell when both agents pick the same
action and stays put otherwise; those steps pay zero reward. The fifth and
final step pays out the climb payoff for the joint action, but only if the
chain reached its last cell; the episode then ends. The whole thing is small
enough (270 distinct states) that joint policies, Q-tables and counterfactual
enumerations can be brute-forced exactly, which is what this environment is
for.
"""

from __future__ import annotations

import numpy as np

from .base import (
    ContractViolation,
    EnvSpec,
    EnvState,
    FieldCodec,
    TeleportEnv,
    pack_fields,
    unpack_fields,
)

CHAIN_LEN = 5
HORIZON = 5
N_ACTIONS = 3

# climb game: coordinating on (0,0) is optimal but miscoordination around it
# is heavily punished, making (1,1) the risk-averse attractor
CLIMB_PAYOFF = np.array(
    [
        [11.0, -30.0, 0.0],
        [-30.0, 7.0, 6.0],
        [0.0, 0.0, 5.0],
    ]
)


class TabularClimb(TeleportEnv):
    """Oracle environment: shared chain plus a terminal climb game."""

    def __init__(self, payoff: np.ndarray | None = None):
        super().__init__()
        self.payoff = CLIMB_PAYOFF if payoff is None else np.asarray(payoff, dtype=float)
        if self.payoff.shape != (N_ACTIONS, N_ACTIONS):
            raise ValueError("payoff matrix must be 3x3")
        # state fields: chain position, each agent's previous action
        self.state_codec = FieldCodec((CHAIN_LEN, N_ACTIONS, N_ACTIONS))
        # obs fields: chain position, timestep, own previous action
        self.obs_codec = FieldCodec((CHAIN_LEN, HORIZON + 1, N_ACTIONS))
        self.spec = EnvSpec(
            n_agents=2,
            n_actions=N_ACTIONS,
            state_dim=CHAIN_LEN + 1 + 2 * N_ACTIONS,
            obs_dim=CHAIN_LEN + (HORIZON + 1) + N_ACTIONS,
            max_episode_steps=HORIZON,
            reward_lo=float(self.payoff.min()),
            reward_hi=float(self.payoff.max()),
        )
        self.success_return = float(self.payoff.max())

    # -- dynamics -------------------------------------------------------------

    def _initial_state(self, seed: int) -> EnvState:
        return EnvState(payload=pack_fields((0, 0, 0)), timestep=0)

    def _decode(self, state: EnvState) -> tuple[int, int, int]:
        p, la0, la1 = unpack_fields(state.payload)
        return p, la0, la1

    def _transition(self, state, actions):
        p, _, _ = self._decode(state)
        t = state.timestep
        u0, u1 = int(actions[0]), int(actions[1])
        if t < HORIZON - 1:
            p_next = min(p + 1, CHAIN_LEN - 1) if u0 == u1 else p
            reward = 0.0
        else:
            p_next = p
            reward = float(self.payoff[u0, u1]) if p == CHAIN_LEN - 1 else 0.0
        nxt = EnvState(payload=pack_fields((p_next, u0, u1)), timestep=t + 1)
        return nxt, reward, t + 1 >= HORIZON

    def _observations(self, state):
        p, la0, la1 = self._decode(state)
        t = min(state.timestep, HORIZON)
        out = []
        for la in (la0, la1):
            v = np.zeros(self.spec.obs_dim, dtype=np.float32)
            v[p] = 1.0
            v[CHAIN_LEN + t] = 1.0
            v[CHAIN_LEN + HORIZON + 1 + la] = 1.0
            out.append(v)
        return out

    def _avail(self, state):
        return np.ones((2, N_ACTIONS), dtype=bool)

    def _validate_state(self, state):
        if len(state.payload) != 3:
            raise ContractViolation("TabularClimb payload must be 3 bytes")
        p, la0, la1 = self._decode(state)
        if not 0 <= p < CHAIN_LEN:
            raise ContractViolation(f"chain position {p} out of range")
        if not (0 <= la0 < N_ACTIONS and 0 <= la1 < N_ACTIONS):
            raise ContractViolation("previous action out of range")
        if not 0 <= state.timestep <= HORIZON:
            raise ContractViolation(f"timestep {state.timestep} out of range")

    def is_terminal(self, state):
        return state.timestep >= HORIZON

    # -- codecs ---------------------------------------------------------------

    def state_vector(self, state):
        p, la0, la1 = self._decode(state)
        v = np.zeros(self.spec.state_dim, dtype=np.float32)
        v[p] = 1.0
        v[CHAIN_LEN] = state.timestep / HORIZON
        v[CHAIN_LEN + 1 + la0] = 1.0
        v[CHAIN_LEN + 1 + N_ACTIONS + la1] = 1.0
        return v

    def state_fields(self, state):
        return np.array(self._decode(state), dtype=np.int64)

    def state_from_fields(self, fields, timestep):
        self.state_codec.validate(np.asarray(fields))
        p, la0, la1 = (int(x) for x in fields)
        return EnvState(payload=pack_fields((p, la0, la1)), timestep=int(timestep))

    def obs_fields(self, obs):
        obs = np.asarray(obs)
        p = int(np.argmax(obs[:CHAIN_LEN]))
        t = int(np.argmax(obs[CHAIN_LEN : CHAIN_LEN + HORIZON + 1]))
        la = int(np.argmax(obs[CHAIN_LEN + HORIZON + 1 :]))
        return np.array([p, t, la], dtype=np.int64)

    def obs_from_fields(self, fields):
        self.obs_codec.validate(np.asarray(fields))
        p, t, la = (int(x) for x in fields)
        v = np.zeros(self.spec.obs_dim, dtype=np.float32)
        v[p] = 1.0
        v[CHAIN_LEN + t] = 1.0
        v[CHAIN_LEN + HORIZON + 1 + la] = 1.0
        return v

    def all_states(self):
        """Every syntactically valid state (superset of the reachable set)."""
        for t in range(HORIZON + 1):
            for p in range(CHAIN_LEN):
                for la0 in range(N_ACTIONS):
                    for la1 in range(N_ACTIONS):
                        yield EnvState(payload=pack_fields((p, la0, la1)), timestep=t)
