"""Point-mass mover with a split action space: the human drives the x-force,
the robot the y-force, so progress along a diagonal target needs both.

Dynamics per step: velocity += force * force_gain * dt - drag * velocity * dt,
then position += velocity * dt. The team reward is the velocity component
along the target direction minus a small penalty on the orthogonal
component, so the joint velocity pays off most when both agents push and
keep it near the target line.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..game import JointAction, WorldState
from .base import Environment

DT = 0.1  # s
FORCE_GAIN = 2.0
DRAG = 0.5  # 1/s
MAX_STEPS = 200
ORTHO_PENALTY = 0.1
DEFAULT_TARGET = (1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0))

# feature layout: (px, py, vx, vy, tx, ty)
OBS_DIM = 6


@dataclass(frozen=True)
class MoverState:
    position: tuple  # (px, py) m
    velocity: tuple  # (vx, vy) m/s
    target_direction: tuple  # unit vector

    def __post_init__(self):
        norm = float(np.hypot(*self.target_direction))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"target_direction must be unit length, |t| = {norm}")


def decode(features: np.ndarray) -> MoverState:
    f = np.asarray(features, dtype=np.float64)
    return MoverState(tuple(f[0:2]), tuple(f[2:4]), tuple(f[4:6]))


def encode(state: MoverState) -> np.ndarray:
    return np.asarray(
        state.position + state.velocity + state.target_direction, dtype=np.float64
    )


def mover_step(state: MoverState, action: JointAction, dt: float = DT) -> MoverState:
    fx = float(action.human[0])
    fy = float(action.robot[0])
    vx, vy = state.velocity
    vx = vx + fx * FORCE_GAIN * dt - DRAG * vx * dt
    vy = vy + fy * FORCE_GAIN * dt - DRAG * vy * dt
    px = state.position[0] + vx * dt
    py = state.position[1] + vy * dt
    return MoverState((px, py), (vx, vy), state.target_direction)


def mover_reward(state: MoverState) -> float:
    vx, vy = state.velocity
    tx, ty = state.target_direction
    along = vx * tx + vy * ty
    ortho = abs(vx * ty - vy * tx)
    return along - ORTHO_PENALTY * ortho


class MoverEnv(Environment):
    env_id = "ma-mover"
    observation_dim = OBS_DIM
    max_episode_steps = MAX_STEPS

    def __init__(self, target: tuple = DEFAULT_TARGET):
        self.target = (float(target[0]), float(target[1]))
        box = np.ones(1)
        self.human_action_low, self.human_action_high = -box, box
        self.robot_action_low, self.robot_action_high = -box.copy(), box.copy()

    def reset(self, rng: np.random.Generator) -> WorldState:
        state = MoverState((0.0, 0.0), (0.0, 0.0), self.target)
        return WorldState(encode(state), episode_step=0)

    def step(self, state, action, rng):
        nxt = mover_step(decode(state.features), action)
        step = state.episode_step + 1
        return WorldState(encode(nxt), episode_step=step), step >= self.max_episode_steps

    def is_terminal(self, state: WorldState) -> bool:
        return state.episode_step >= self.max_episode_steps

    def true_reward(self, state, action) -> float:
        return mover_reward(decode(state.features))

    def frame(self, features: np.ndarray) -> list[dict]:
        s = decode(features)
        heading = float(np.arctan2(s.velocity[1], s.velocity[0]))
        target_heading = float(np.arctan2(s.target_direction[1], s.target_direction[0]))
        return [
            {"entity": "mover", "x": s.position[0], "y": s.position[1], "heading": heading},
            {"entity": "target", "x": s.position[0] + 5.0 * s.target_direction[0],
             "y": s.position[1] + 5.0 * s.target_direction[1], "heading": target_heading},
        ]

    def render_meta(self) -> dict:
        return {"kind": "mover", "arena_halfwidth": 80.0, "mover_radius": 1.0}
