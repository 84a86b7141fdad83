"""Environment contract: pure state machines over WorldState.

An environment owns no mutable episode state; ``step`` maps (state, action)
to (next state, done), so instances are freely movable between threads when
not shared and trivially cloneable for evaluation rollouts.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from ..game import JointAction, WorldState


class Environment(ABC):
    env_id: str
    observation_dim: int
    max_episode_steps: int
    human_action_low: np.ndarray
    human_action_high: np.ndarray
    robot_action_low: np.ndarray
    robot_action_high: np.ndarray

    @abstractmethod
    def reset(self, rng: np.random.Generator) -> WorldState:
        """Start a fresh episode."""

    @abstractmethod
    def step(
        self, state: WorldState, action: JointAction, rng: np.random.Generator
    ) -> tuple[WorldState, bool]:
        """Advance one step; returns (next state, done)."""

    @abstractmethod
    def is_terminal(self, state: WorldState) -> bool:
        """Whether no further step may be taken from ``state``."""

    @abstractmethod
    def true_reward(self, state: WorldState, action: JointAction) -> float:
        """The human's internal preference reward. Evaluation and oracle
        labeling only; never an input to policy learning."""

    @abstractmethod
    def frame(self, features: np.ndarray) -> list[dict]:
        """Entity poses for rendering one recorded state:
        [{"entity", "x", "y", "heading"}, ...]."""

    @abstractmethod
    def render_meta(self) -> dict:
        """Static geometry the renderer needs (track extent, entity sizes...)."""

    def observe(self, state: WorldState) -> np.ndarray:
        """The shared feature vector both agents see (identity here; states
        are stored pre-flattened)."""
        return state.features

    def metadata(self) -> dict:
        """JSON descriptor consumed by the CLI and the labeling UI."""
        return {
            "env_id": self.env_id,
            "observation_dim": self.observation_dim,
            "max_episode_steps": self.max_episode_steps,
            "human_action": {
                "dim": len(self.human_action_low),
                "low": self.human_action_low.tolist(),
                "high": self.human_action_high.tolist(),
            },
            "robot_action": {
                "dim": len(self.robot_action_low),
                "low": self.robot_action_low.tolist(),
                "high": self.robot_action_high.tolist(),
            },
            "render": self.render_meta(),
        }
