"""Entropy-regularized actor-critic for the robot's continuous actions.

The learner controls only the robot action; the human action of each stored
transition enters the critic input, so values are estimated for the joint
behavior while the policy is a function of the world state alone. Updates
consume the transitions' learned rewards and never any environment
ground-truth reward.
"""

from __future__ import annotations

import math
from typing import Protocol, runtime_checkable

import numpy as np
import torch
import torch.nn as nn

from .game import WorldState

LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0


@runtime_checkable
class PolicyLearner(Protocol):
    """Contract the trainer drives; any planner honoring it can substitute."""

    def select_action(
        self, state: WorldState, explore: bool, rng: np.random.Generator | None = None
    ) -> np.ndarray: ...

    def update(self, batch: dict) -> dict: ...


def _mlp(in_dim: int, out_dim: int, hidden) -> nn.Sequential:
    layers: list[nn.Module] = []
    prev = in_dim
    for h in hidden:
        layers += [nn.Linear(prev, h), nn.ReLU()]
        prev = h
    layers.append(nn.Linear(prev, out_dim))
    return nn.Sequential(*layers)


class SACLearner:
    """Twin-critic soft actor-critic with a learnable temperature."""

    def __init__(
        self,
        obs_dim: int,
        human_dim: int,
        robot_dim: int,
        robot_low: np.ndarray,
        robot_high: np.ndarray,
        hidden=(128, 128),
        lr: float = 3e-4,
        gamma: float = 0.99,
        tau: float = 0.005,
        target_update_freq: int = 2,
        init_temperature: float = 0.1,
        noise_seed: int = 0,
    ):
        self.obs_dim, self.human_dim, self.robot_dim = obs_dim, human_dim, robot_dim
        self.gamma, self.tau = gamma, tau
        self.target_update_freq = target_update_freq
        self._scale = torch.as_tensor((robot_high - robot_low) / 2.0, dtype=torch.float32)
        self._center = torch.as_tensor((robot_high + robot_low) / 2.0, dtype=torch.float32)

        self.actor = _mlp(obs_dim, 2 * robot_dim, hidden)
        q_in = obs_dim + human_dim + robot_dim
        self.q1, self.q2 = _mlp(q_in, 1, hidden), _mlp(q_in, 1, hidden)
        self.q1_target, self.q2_target = _mlp(q_in, 1, hidden), _mlp(q_in, 1, hidden)
        self.q1_target.load_state_dict(self.q1.state_dict())
        self.q2_target.load_state_dict(self.q2.state_dict())
        for p in list(self.q1_target.parameters()) + list(self.q2_target.parameters()):
            p.requires_grad_(False)

        self.log_alpha = torch.tensor(
            math.log(init_temperature), requires_grad=True, dtype=torch.float32
        )
        self.target_entropy = -float(robot_dim)
        self.actor_opt = torch.optim.Adam(self.actor.parameters(), lr=lr, betas=(0.9, 0.999))
        self.critic_opt = torch.optim.Adam(
            list(self.q1.parameters()) + list(self.q2.parameters()), lr=lr, betas=(0.9, 0.999)
        )
        self.alpha_opt = torch.optim.Adam([self.log_alpha], lr=lr, betas=(0.9, 0.999))
        self._noise = torch.Generator().manual_seed(int(noise_seed))
        self.updates_done = 0

    # -- acting ---------------------------------------------------------

    def select_action(self, state, explore, rng=None) -> np.ndarray:
        obs = torch.as_tensor(state.features, dtype=torch.float32)[None, :]
        with torch.no_grad():
            mu, log_std = self._policy_params(obs)
            if explore:
                eps = torch.randn(mu.shape, generator=self._noise)
                pre = mu + log_std.exp() * eps
            else:
                pre = mu
            action = torch.tanh(pre) * self._scale + self._center
        return action[0].numpy().astype(np.float64)

    def _policy_params(self, obs: torch.Tensor):
        out = self.actor(obs)
        mu, log_std = out[:, : self.robot_dim], out[:, self.robot_dim :]
        return mu, torch.clamp(log_std, LOG_STD_MIN, LOG_STD_MAX)

    def _sample_with_logp(self, obs: torch.Tensor):
        mu, log_std = self._policy_params(obs)
        std = log_std.exp()
        eps = torch.randn(mu.shape, generator=self._noise)
        pre = mu + std * eps
        squashed = torch.tanh(pre)
        log_p = (-0.5 * eps.pow(2) - log_std - 0.5 * math.log(2 * math.pi)).sum(
            dim=1, keepdim=True
        )
        # tanh change of variables, in the overflow-free softplus form
        log_p = log_p - (
            2.0 * (math.log(2.0) - pre - nn.functional.softplus(-2.0 * pre))
        ).sum(dim=1, keepdim=True)
        return squashed * self._scale + self._center, log_p

    # -- learning -------------------------------------------------------

    def update(self, batch: dict) -> dict:
        obs = torch.as_tensor(batch["obs"], dtype=torch.float32)
        human = torch.as_tensor(batch["human"], dtype=torch.float32)
        robot = torch.as_tensor(batch["robot"], dtype=torch.float32)
        next_obs = torch.as_tensor(batch["next_obs"], dtype=torch.float32)
        next_human = torch.as_tensor(batch["next_human"], dtype=torch.float32)
        reward = torch.as_tensor(batch["reward"], dtype=torch.float32)[:, None]
        done = torch.as_tensor(batch["done"], dtype=torch.float32)[:, None]
        alpha = self.log_alpha.exp().detach()

        with torch.no_grad():
            next_robot, next_logp = self._sample_with_logp(next_obs)
            target_in = torch.cat([next_obs, next_human, next_robot], dim=1)
            q_next = torch.min(self.q1_target(target_in), self.q2_target(target_in))
            target = reward + self.gamma * (1.0 - done) * (q_next - alpha * next_logp)

        q_in = torch.cat([obs, human, robot], dim=1)
        critic_loss = ((self.q1(q_in) - target) ** 2).mean() + (
            (self.q2(q_in) - target) ** 2
        ).mean()
        self.critic_opt.zero_grad()
        critic_loss.backward()
        self.critic_opt.step()

        new_robot, logp = self._sample_with_logp(obs)
        pi_in = torch.cat([obs, human, new_robot], dim=1)
        q_pi = torch.min(self.q1(pi_in), self.q2(pi_in))
        actor_loss = (alpha * logp - q_pi).mean()
        self.actor_opt.zero_grad()
        actor_loss.backward()
        self.actor_opt.step()

        alpha_loss = -(self.log_alpha * (logp.detach() + self.target_entropy)).mean()
        self.alpha_opt.zero_grad()
        alpha_loss.backward()
        self.alpha_opt.step()

        self.updates_done += 1
        if self.updates_done % self.target_update_freq == 0:
            with torch.no_grad():
                for tgt, src in (
                    (self.q1_target, self.q1),
                    (self.q2_target, self.q2),
                ):
                    for tp, p in zip(tgt.parameters(), src.parameters()):
                        tp.mul_(1.0 - self.tau).add_(self.tau * p)

        return {
            "critic_loss": float(critic_loss.item()),
            "actor_loss": float(actor_loss.item()),
            "alpha": float(alpha.item()),
        }

    # -- persistence ----------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "actor": self.actor.state_dict(),
            "q1": self.q1.state_dict(),
            "q2": self.q2.state_dict(),
            "q1_target": self.q1_target.state_dict(),
            "q2_target": self.q2_target.state_dict(),
            "log_alpha": self.log_alpha.detach().clone(),
            "updates_done": self.updates_done,
        }

    def save(self, path) -> None:
        torch.save(self.state_dict(), path)

    def load(self, path) -> None:
        state = torch.load(path, weights_only=True)
        self.actor.load_state_dict(state["actor"])
        self.q1.load_state_dict(state["q1"])
        self.q2.load_state_dict(state["q2"])
        self.q1_target.load_state_dict(state["q1_target"])
        self.q2_target.load_state_dict(state["q2_target"])
        with torch.no_grad():
            self.log_alpha.copy_(state["log_alpha"])
        self.updates_done = int(state["updates_done"])
