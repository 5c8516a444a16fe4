"""PassGrid: a two-room, switch-and-door gridworld with a sparse team reward.

Layout (7 rows x 9 columns)::

    . . . . # . . . .
    . 0 . . # . . G .      #  wall (column 4)
    . . . . # . . . .      D  door cell, in the wall
    . . . S D . . . .      S  switch cell
    . . . . # . . . .      0  start of agent 0
    . 1 . . # . . G .      1  start of agent 1
    . . . . # . . . .      G  goal cells

Rules, in the order they are applied each step:

- Actions are {up, down, left, right, stay}. A move into a wall cell, out of
  bounds, or into the door cell while the door is closed leaves the agent in
  place (the chosen action is still recorded as its last action).
- The door flag used for blocking is the one carried in the state, i.e. the
  flag computed at the end of the previous step. After all moves resolve, the
  flag is recomputed: the door is open iff some agent now stands on the
  switch. An agent standing on the switch can therefore step onto the door
  cell (the door is still open from its own switch visit) and leave through
  it on the next step, but only because the flag persists for one step.
- If both agents try to enter the same cell, agent 0 wins and agent 1 stays.
  Moving into the cell an agent is vacating is allowed; swapping cells is
  not (both stay).
- Reward is +10 and the episode ends when the agents occupy the two goal
  cells simultaneously (in either assignment). All other steps pay 0. The
  episode also ends, with 0 reward, when the step counter reaches the
  horizon (50).

Each agent observes its own normalized position, a 3x3 window of
wall/door/agent/goal occupancy channels centred on itself, the door-open
flag when the door cell lies inside the window, and its own last action as
a one-hot. The other agent is visible only when it enters the window, so
the task is genuinely partially observable.
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

ROWS = 7
COLS = 9
WALL_COL = 4
DOOR = (3, 4)
SWITCH = (3, 3)
STARTS = ((1, 1), (5, 1))
GOALS = ((1, 7), (5, 7))
HORIZON = 50
GOAL_REWARD = 10.0

UP, DOWN, LEFT, RIGHT, STAY = range(5)
DELTAS = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1), STAY: (0, 0)}
N_ACTIONS = 5

# observation layout: [row, col] + 9 window cells x 4 channels + door flag + last action
OBS_DIM = 2 + 9 * 4 + 1 + N_ACTIONS
WINDOW_OFFSETS = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1)]


def _is_wall(r: int, c: int) -> bool:
    if not (0 <= r < ROWS and 0 <= c < COLS):
        return True
    return c == WALL_COL and (r, c) != DOOR


class PassGrid(TeleportEnv):
    """Two agents must hold a switch, slip through a door, and meet on the goals."""

    def __init__(self, horizon: int = HORIZON, goal_reward: float = GOAL_REWARD):
        super().__init__()
        self.horizon = int(horizon)
        self.goal_reward = float(goal_reward)
        self.state_codec = FieldCodec((ROWS, COLS, ROWS, COLS, 2, N_ACTIONS, N_ACTIONS))
        card_obs = [ROWS, COLS] + [2] * 36 + [2, N_ACTIONS]
        self.obs_codec = FieldCodec(tuple(card_obs))
        self.spec = EnvSpec(
            n_agents=2,
            n_actions=N_ACTIONS,
            state_dim=ROWS + COLS + ROWS + COLS + 1 + 2 * N_ACTIONS + 1,
            obs_dim=OBS_DIM,
            max_episode_steps=self.horizon,
            reward_lo=0.0,
            reward_hi=self.goal_reward,
        )
        self.success_return = self.goal_reward

    # -- state packing --------------------------------------------------------

    @staticmethod
    def _encode(positions, door_open, last_actions, timestep) -> EnvState:
        (r0, c0), (r1, c1) = positions
        payload = pack_fields((r0, c0, r1, c1, int(door_open), last_actions[0], last_actions[1]))
        return EnvState(payload=payload, timestep=int(timestep))

    @staticmethod
    def _decode(state: EnvState):
        r0, c0, r1, c1, door, la0, la1 = unpack_fields(state.payload)
        return [(r0, c0), (r1, c1)], bool(door), [la0, la1]

    # -- dynamics -------------------------------------------------------------

    def _initial_state(self, seed: int) -> EnvState:
        return self._encode(STARTS, False, [STAY, STAY], 0)

    def _transition(self, state, actions):
        positions, door_open, _ = self._decode(state)
        proposed = []
        for i, (pos, u) in enumerate(zip(positions, actions)):
            dr, dc = DELTAS[int(u)]
            tgt = (pos[0] + dr, pos[1] + dc)
            if _is_wall(*tgt) or (tgt == DOOR and not door_open):
                tgt = pos
            proposed.append(tgt)

        # conflict resolution for two agents
        p0, p1 = proposed
        if p0 == p1:
            p1 = positions[1]  # agent 0 wins the contested cell
        if p0 == positions[1] and p1 == positions[0]:
            p0, p1 = positions  # swap attempt: both blocked
        elif p0 == positions[1] and p1 == positions[1]:
            p0 = positions[0]  # target did not vacate
        elif p1 == positions[0] and p0 == positions[0]:
            p1 = positions[1]
        new_positions = [p0, p1]

        new_door = any(pos == SWITCH for pos in new_positions)
        t_next = state.timestep + 1
        nxt = self._encode(new_positions, new_door, [int(actions[0]), int(actions[1])], t_next)
        if set(new_positions) == set(GOALS):
            return nxt, self.goal_reward, True
        return nxt, 0.0, t_next >= self.horizon

    def _observations(self, state):
        positions, door_open, last_actions = self._decode(state)
        out = []
        for i, (r, c) in enumerate(positions):
            v = np.zeros(OBS_DIM, dtype=np.float32)
            v[0] = r / (ROWS - 1)
            v[1] = c / (COLS - 1)
            door_in_window = False
            for k, (dr, dc) in enumerate(WINDOW_OFFSETS):
                cell = (r + dr, c + dc)
                base = 2 + 4 * k
                if _is_wall(*cell):
                    v[base] = 1.0
                if cell == DOOR:
                    v[base + 1] = 1.0
                    door_in_window = True
                if cell in positions:
                    v[base + 2] = 1.0
                if cell in GOALS:
                    v[base + 3] = 1.0
            if door_in_window and door_open:
                v[2 + 36] = 1.0
            v[2 + 36 + 1 + last_actions[i]] = 1.0
            out.append(v)
        return out

    def _avail(self, state):
        return np.ones((2, N_ACTIONS), dtype=bool)

    def _validate_state(self, state):
        if len(state.payload) != 7:
            raise ContractViolation("PassGrid payload must be 7 bytes")
        positions, _, last_actions = self._decode(state)
        for i, (r, c) in enumerate(positions):
            if not (0 <= r < ROWS and 0 <= c < COLS):
                raise ContractViolation(f"agent {i} position {(r, c)} out of bounds")
            if _is_wall(r, c):
                raise ContractViolation(f"agent {i} position {(r, c)} inside the wall")
        if positions[0] == positions[1]:
            raise ContractViolation("agents may not share a cell")
        for i, la in enumerate(last_actions):
            if not 0 <= la < N_ACTIONS:
                raise ContractViolation(f"agent {i} last action {la} out of range")
        if not 0 <= state.timestep <= self.horizon:
            raise ContractViolation(f"timestep {state.timestep} outside [0, {self.horizon}]")

    def is_terminal(self, state):
        positions, _, _ = self._decode(state)
        return state.timestep >= self.horizon or set(positions) == set(GOALS)

    # -- codecs ---------------------------------------------------------------

    def state_vector(self, state):
        positions, door_open, last_actions = self._decode(state)
        v = np.zeros(self.spec.state_dim, dtype=np.float32)
        off = 0
        for (r, c) in positions:
            v[off + r] = 1.0
            off += ROWS
            v[off + c] = 1.0
            off += COLS
        v[off] = float(door_open)
        off += 1
        for la in last_actions:
            v[off + la] = 1.0
            off += N_ACTIONS
        v[off] = state.timestep / self.horizon
        return v

    def state_fields(self, state):
        positions, door_open, last_actions = self._decode(state)
        (r0, c0), (r1, c1) = positions
        return np.array([r0, c0, r1, c1, int(door_open)] + last_actions, dtype=np.int64)

    def state_from_fields(self, fields, timestep):
        self.state_codec.validate(np.asarray(fields))
        r0, c0, r1, c1, door, la0, la1 = (int(x) for x in fields)
        state = self._encode([(r0, c0), (r1, c1)], bool(door), [la0, la1], timestep)
        self._validate_state(state)
        return state

    def state_field_mask(self, index, partial):
        card = self.state_codec.cardinalities[index]
        mask = np.ones(card, dtype=bool)
        if index == 1:  # agent 0 column given its row
            r0 = partial[0]
            for c in range(COLS):
                if _is_wall(r0, c):
                    mask[c] = False
        elif index == 3:  # agent 1 column: avoid walls and agent 0's cell
            r0, c0, r1 = partial[0], partial[1], partial[2]
            for c in range(COLS):
                if _is_wall(r1, c) or (r1, c) == (r0, c0):
                    mask[c] = False
        return mask

    def obs_fields(self, obs):
        obs = np.asarray(obs)
        fields = np.zeros(self.obs_codec.n_fields, dtype=np.int64)
        fields[0] = int(round(float(obs[0]) * (ROWS - 1)))
        fields[1] = int(round(float(obs[1]) * (COLS - 1)))
        for k in range(36):
            fields[2 + k] = int(round(float(obs[2 + k])))
        fields[38] = int(round(float(obs[38])))
        fields[39] = int(np.argmax(obs[39:44]))
        return fields

    def obs_from_fields(self, fields):
        self.obs_codec.validate(np.asarray(fields))
        v = np.zeros(OBS_DIM, dtype=np.float32)
        v[0] = fields[0] / (ROWS - 1)
        v[1] = fields[1] / (COLS - 1)
        for k in range(36):
            v[2 + k] = float(fields[2 + k])
        v[38] = float(fields[38])
        v[39 + int(fields[39])] = 1.0
        return v

    # -- diagnostics ----------------------------------------------------------

    def goal_distance(self, state) -> float:
        """Mean per-agent Manhattan distance to the goals, best assignment."""
        positions, _, _ = self._decode(state)
        d = lambda p, g: abs(p[0] - g[0]) + abs(p[1] - g[1])
        a = d(positions[0], GOALS[0]) + d(positions[1], GOALS[1])
        b = d(positions[0], GOALS[1]) + d(positions[1], GOALS[0])
        return min(a, b) / 2.0

    def door_open(self, state) -> bool:
        return self._decode(state)[1]
