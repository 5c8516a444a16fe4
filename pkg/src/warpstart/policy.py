"""Recurrent per-agent Q-networks with a monotone mixing network.

All agents share one GRU-based utility network; a two-layer mixing network
whose weights are produced by state-conditioned hypernetworks (passed through
an absolute value, so the joint value is nondecreasing in every per-agent
utility) combines the chosen utilities into a joint Q-value. Training is
standard episode-batched TD with a periodically synced target copy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F


@dataclass
class PolicyConfig:
    obs_dim: int
    state_dim: int
    n_agents: int
    n_actions: int
    hidden_dim: int = 64
    mixing_dim: int = 32
    lr: float = 5e-4
    gamma: float = 0.99
    grad_clip: float = 10.0
    target_interval: int = 200
    optimizer: str = "rmsprop"


@dataclass
class AgentMemory:
    """Recurrent memory of one agent: GRU hidden state plus its previous action."""

    hidden: torch.Tensor
    last_action: int | None = None

    def clone(self) -> "AgentMemory":
        return AgentMemory(self.hidden.clone(), self.last_action)


class AgentNetwork(nn.Module):
    """Shared utility network: Linear -> GRUCell -> Linear, fed (obs, last action)."""

    def __init__(self, obs_dim, n_actions, hidden_dim):
        super().__init__()
        self.n_actions = n_actions
        self.hidden_dim = hidden_dim
        self.fc_in = nn.Linear(obs_dim + n_actions, hidden_dim)
        self.rnn = nn.GRUCell(hidden_dim, hidden_dim)
        self.fc_out = nn.Linear(hidden_dim, n_actions)

    def forward(self, obs, last_action_onehot, hidden):
        x = F.relu(self.fc_in(torch.cat([obs, last_action_onehot], dim=-1)))
        h = self.rnn(x, hidden)
        return self.fc_out(h), h


class MonotonicMixer(nn.Module):
    """Two-layer mixing network with |W| hypernetwork weights and a state bias."""

    def __init__(self, state_dim, n_agents, mixing_dim):
        super().__init__()
        self.n_agents = n_agents
        self.mixing_dim = mixing_dim
        self.hyper_w1 = nn.Linear(state_dim, n_agents * mixing_dim)
        self.hyper_b1 = nn.Linear(state_dim, mixing_dim)
        self.hyper_w2 = nn.Linear(state_dim, mixing_dim)
        self.value = nn.Sequential(
            nn.Linear(state_dim, mixing_dim), nn.ReLU(), nn.Linear(mixing_dim, 1)
        )

    def forward(self, agent_qs, states):
        # agent_qs [B, n], states [B, state_dim] -> [B]
        B = agent_qs.shape[0]
        w1 = self.hyper_w1(states).abs().view(B, self.n_agents, self.mixing_dim)
        b1 = self.hyper_b1(states).view(B, 1, self.mixing_dim)
        hidden = F.elu(torch.bmm(agent_qs.unsqueeze(1), w1) + b1)
        w2 = self.hyper_w2(states).abs().view(B, self.mixing_dim, 1)
        v = self.value(states).view(B, 1, 1)
        return (torch.bmm(hidden, w2) + v).view(B)


class JointPolicy:
    """The learnable joint policy: shared agent nets, mixer, target copies, optimizer."""

    def __init__(self, cfg: PolicyConfig, state_vector_fn=None):
        self.cfg = cfg
        self.state_vector_fn = state_vector_fn
        self.agent = AgentNetwork(cfg.obs_dim, cfg.n_actions, cfg.hidden_dim)
        self.mixer = MonotonicMixer(cfg.state_dim, cfg.n_agents, cfg.mixing_dim)
        self.target_agent = AgentNetwork(cfg.obs_dim, cfg.n_actions, cfg.hidden_dim)
        self.target_mixer = MonotonicMixer(cfg.state_dim, cfg.n_agents, cfg.mixing_dim)
        self.update_target()
        params = list(self.agent.parameters()) + list(self.mixer.parameters())
        if cfg.optimizer == "rmsprop":
            self.opt = torch.optim.RMSprop(params, lr=cfg.lr, alpha=0.99, eps=1e-5)
        elif cfg.optimizer == "adam":
            self.opt = torch.optim.Adam(params, lr=cfg.lr)
        else:
            raise ValueError(f"unknown optimizer '{cfg.optimizer}'")
        self.train_steps = 0
        for net in (self.target_agent, self.target_mixer):
            for p in net.parameters():
                p.requires_grad_(False)

    # -- inference -------------------------------------------------------------

    def init_memory(self) -> list[AgentMemory]:
        return [
            AgentMemory(torch.zeros(self.cfg.hidden_dim), None)
            for _ in range(self.cfg.n_agents)
        ]

    def _last_action_onehot(self, last_action):
        v = torch.zeros(self.cfg.n_actions)
        if last_action is not None:
            v[last_action] = 1.0
        return v

    @torch.no_grad()
    def agent_q(self, obs, mem: AgentMemory, agent_id: int):
        """Q-values for one agent given its observation and memory."""
        obs_t = torch.as_tensor(np.asarray(obs), dtype=torch.float32).view(1, -1)
        la = self._last_action_onehot(mem.last_action).view(1, -1)
        q, h = self.agent(obs_t, la, mem.hidden.view(1, -1))
        if not torch.isfinite(q).all():
            raise FloatingPointError(f"non-finite Q-values for agent {agent_id}")
        return q.view(-1).numpy(), AgentMemory(h.view(-1), mem.last_action)

    @torch.no_grad()
    def team_q(self, obs_all, mems: list[AgentMemory]):
        """Batched agent_q over the whole team. Returns (q [n, A], new mems)."""
        obs_t = torch.as_tensor(np.asarray(obs_all), dtype=torch.float32)
        la = torch.stack([self._last_action_onehot(m.last_action) for m in mems])
        h = torch.stack([m.hidden for m in mems])
        q, h_new = self.agent(obs_t, la, h)
        if not torch.isfinite(q).all():
            raise FloatingPointError("non-finite Q-values")
        return q.numpy(), [AgentMemory(h_new[i], mems[i].last_action) for i in range(len(mems))]

    @torch.no_grad()
    def q_from_memory(self, mem: AgentMemory) -> np.ndarray:
        """Read the Q head off an already-updated hidden state."""
        return self.agent.fc_out(mem.hidden.view(1, -1)).view(-1).numpy()

    @torch.no_grad()
    def mix(self, per_agent_q, state) -> float:
        """Joint value of chosen per-agent utilities at a state (EnvState or features)."""
        vec = self._state_vec(state)
        q = torch.as_tensor(np.asarray(per_agent_q), dtype=torch.float32).view(1, -1)
        return float(self.mixer(q, vec.view(1, -1)))

    @torch.no_grad()
    def mix_batch(self, per_agent_q, state) -> np.ndarray:
        """Joint values for a batch of utility vectors at one shared state."""
        vec = self._state_vec(state)
        q = torch.as_tensor(np.asarray(per_agent_q), dtype=torch.float32)
        states = vec.view(1, -1).expand(q.shape[0], -1)
        return self.mixer(q, states).numpy()

    def _state_vec(self, state) -> torch.Tensor:
        if isinstance(state, (np.ndarray, torch.Tensor)):
            return torch.as_tensor(np.asarray(state), dtype=torch.float32)
        if self.state_vector_fn is None:
            raise ValueError("policy has no state_vector_fn; pass feature vectors directly")
        return torch.as_tensor(self.state_vector_fn(state), dtype=torch.float32)

    @staticmethod
    def select_actions(q, avail, epsilon, rng) -> np.ndarray:
        """Per-agent epsilon-greedy over available actions; ties -> lowest index."""
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        q = np.asarray(q, dtype=np.float64)
        avail = np.asarray(avail, dtype=bool)
        if not avail.any(axis=1).all():
            raise ValueError("an agent has no available action")
        masked = np.where(avail, q, -np.inf)
        greedy = masked.argmax(axis=1)
        actions = greedy.copy()
        for a in range(q.shape[0]):
            if rng.random() < epsilon:
                choices = np.flatnonzero(avail[a])
                actions[a] = int(choices[rng.integers(len(choices))])
        return actions

    # -- imagination hand-off ----------------------------------------------------

    @torch.no_grad()
    def init_memory_from_imagination(self, traj) -> list[AgentMemory]:
        """Replay an imagined prefix through the agent network to warm the memory.

        Step t feeds (imagined obs_t, imagined action_{t-1}); the result is the
        memory an agent would hold after living through the same prefix.
        """
        mems = self.init_memory()
        if len(traj.steps) == 0:
            return mems
        for step in traj.steps:
            if len(step.obs) != self.cfg.n_agents:
                raise ValueError(
                    f"imagined step has {len(step.obs)} observations, expected {self.cfg.n_agents}"
                )
        last = None
        for step in traj.steps:
            for a in range(self.cfg.n_agents):
                mems[a].last_action = None if last is None else int(last[a])
            _, mems = self.team_q(np.stack(step.obs), mems)
            last = step.actions
        for a in range(self.cfg.n_agents):
            mems[a].last_action = int(last[a])
        return mems

    # -- training ------------------------------------------------------------

    def _batch_tensors(self, episodes):
        n, A = self.cfg.n_agents, self.cfg.n_actions
        B = len(episodes)
        L = max(ep.length for ep in episodes)
        obs = torch.zeros(B, L + 1, n, self.cfg.obs_dim)
        states = torch.zeros(B, L + 1, self.cfg.state_dim)
        avail = torch.zeros(B, L + 1, n, A, dtype=torch.bool)
        avail[..., 0] = True  # padding rows keep one legal action
        actions = torch.zeros(B, L, n, dtype=torch.int64)
        rewards = torch.zeros(B, L)
        mask = torch.zeros(B, L)
        terminated = torch.zeros(B, L)
        for i, ep in enumerate(episodes):
            T = ep.length
            obs[i, : T + 1] = torch.as_tensor(ep.obs)
            states[i, : T + 1] = torch.as_tensor(ep.state_vecs)
            avail[i, : T + 1] = torch.as_tensor(ep.avail)
            actions[i, :T] = torch.as_tensor(ep.actions)
            rewards[i, :T] = torch.as_tensor(ep.rewards)
            mask[i, :T] = 1.0
            if ep.terminated:
                terminated[i, T - 1] = 1.0
        return obs, states, avail, actions, rewards, mask, terminated

    def _unroll(self, net, obs, actions):
        """Q-values at every step by unrolling the GRU from zeros.

        obs [B, L+1, n, obs_dim]; actions [B, L, n] provide the last-action
        inputs (zeros at t=0). Returns q [B, L+1, n, A].
        """
        B, Lp1, n, _ = obs.shape
        A = self.cfg.n_actions
        last = torch.zeros(B, Lp1, n, A)
        onehot = F.one_hot(actions, A).float()
        last[:, 1:] = onehot
        h = torch.zeros(B * n, self.cfg.hidden_dim)
        qs = []
        for t in range(Lp1):
            q, h = net(obs[:, t].reshape(B * n, -1), last[:, t].reshape(B * n, -1), h)
            qs.append(q.view(B, n, A))
        return torch.stack(qs, dim=1)

    def td_loss(self, episodes) -> torch.Tensor:
        """Masked MSE between the mixed joint Q and the one-step TD target.

        The joint max in the target is taken via per-agent greedy actions
        under the target networks; terminal steps bootstrap with zero.
        """
        obs, states, avail, actions, rewards, mask, terminated = self._batch_tensors(episodes)
        B = rewards.shape[0]
        q_all = self._unroll(self.agent, obs, actions)
        chosen = torch.gather(q_all[:, :-1], 3, actions.unsqueeze(-1)).squeeze(-1)  # [B, L, n]
        q_joint = self.mixer(
            chosen.reshape(-1, self.cfg.n_agents),
            states[:, :-1].reshape(-1, self.cfg.state_dim),
        ).view(B, -1)
        with torch.no_grad():
            tq_all = self._unroll(self.target_agent, obs, actions)
            tq_masked = tq_all.masked_fill(~avail, -float("inf"))
            greedy = tq_masked.argmax(dim=3)
            t_chosen = torch.gather(tq_all, 3, greedy.unsqueeze(-1)).squeeze(-1)
            t_joint = self.target_mixer(
                t_chosen[:, 1:].reshape(-1, self.cfg.n_agents),
                states[:, 1:].reshape(-1, self.cfg.state_dim),
            ).view(B, -1)
            target = rewards + self.cfg.gamma * (1.0 - terminated) * t_joint
        err = (q_joint - target) * mask
        return (err**2).sum() / mask.sum()

    def td_update(self, episodes) -> float:
        """One TD step on a batch of episodes; returns the scalar loss."""
        loss = self.td_loss(episodes)
        if not torch.isfinite(loss):
            lengths = [ep.length for ep in episodes]
            raise FloatingPointError(f"non-finite TD loss on batch with lengths {lengths}")
        self.opt.zero_grad()
        loss.backward()
        nn.utils.clip_grad_norm_(
            [p for g in self.opt.param_groups for p in g["params"]], self.cfg.grad_clip
        )
        self.opt.step()
        self.train_steps += 1
        if self.cfg.target_interval and self.train_steps % self.cfg.target_interval == 0:
            self.update_target()
        return float(loss)

    def update_target(self):
        self.target_agent.load_state_dict(self.agent.state_dict())
        self.target_mixer.load_state_dict(self.mixer.state_dict())

    # -- persistence -----------------------------------------------------------

    def named_modules_for_checkpoint(self):
        return {
            "agent": self.agent,
            "mixer": self.mixer,
            "target_agent": self.target_agent,
            "target_mixer": self.target_mixer,
        }
