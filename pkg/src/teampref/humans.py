"""The human side of the game: the admissible policy set (flexibility), the
per-episode policy sampler, the budgeted action pathway with random fallback,
and the scripted preference oracle.

Flexibility is the size of the policy set: a 1-policy human always plays the
same strategy; a 3-policy human re-draws uniformly at every episode start.
The access budget front-loads policy queries into the first Q of N training
episodes; afterwards the robot only sees uniform random human actions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .envs.base import Environment
from .envs.highway import LANE_CENTERS
from .game import HumanSource, JointAction, Segment, WorldState, segment_return

RewardFn = Callable[[WorldState, JointAction], float]


@dataclass(frozen=True)
class HumanPolicy:
    """A deterministic mapping from world state to human action."""

    id: str
    act: Callable[[WorldState, np.random.Generator], np.ndarray]


@dataclass(frozen=True)
class AccessBudget:
    """Front-loaded episode budget for querying the human policy.

    fraction = Q / N. Policy queries are permitted exactly in episodes
    1..Q; full access (fraction 1.0) never expires, even if the realized
    episode count overshoots the estimate N.
    """

    fraction: float
    total_episodes: int
    allocation: str = "front_loaded"

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("budget fraction must lie in [0, 1]")
        if self.total_episodes < 1:
            raise ValueError("total_episodes must be >= 1")
        if self.allocation != "front_loaded":
            raise ValueError(f"unknown allocation {self.allocation!r}")

    @property
    def allowed_episodes(self) -> int:
        return round(self.fraction * self.total_episodes)

    def allows(self, episode_id: int) -> bool:
        if self.fraction >= 1.0:
            return True
        return episode_id <= self.allowed_episodes


@dataclass(frozen=True)
class HumanProfile:
    """Policy set, access budget, and internal preference reward."""

    policy_set: tuple
    access_budget: AccessBudget
    preference_reward: RewardFn
    action_low: np.ndarray
    action_high: np.ndarray

    def __post_init__(self):
        if len(self.policy_set) < 1:
            raise ValueError("policy_set must contain at least one policy")

    @property
    def epsilon(self) -> int:
        return len(self.policy_set)

    @property
    def specified_orchestration(self) -> bool:
        return self.epsilon == 1 and self.access_budget.fraction == 1.0


def select_episode_policy(
    profile: HumanProfile, episode_id: int, rng: np.random.Generator
) -> HumanPolicy:
    """Uniform draw from the policy set, fixed for the whole episode.

    A 1-policy profile always returns that policy without consuming
    randomness, so Specified Orchestration runs are stream-for-stream
    identical regardless of the sampler."""
    if len(profile.policy_set) == 1:
        return profile.policy_set[0]
    return profile.policy_set[int(rng.integers(len(profile.policy_set)))]


def human_action(
    profile: HumanProfile,
    active_policy: HumanPolicy,
    state: WorldState,
    episode_id: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, HumanSource]:
    """The budgeted human-action pathway: the real policy while the access
    budget covers this episode, a uniform draw over the human action box
    afterwards."""
    if episode_id < 1:
        raise ValueError("episode ids start at 1")
    if profile.access_budget.allows(episode_id):
        return np.asarray(active_policy.act(state, rng), dtype=np.float64), HumanSource.POLICY
    sample = rng.uniform(profile.action_low, profile.action_high)
    return np.asarray(sample, dtype=np.float64), HumanSource.RANDOM_FALLBACK


def oracle_preference(
    sigma0: Segment,
    sigma1: Segment,
    preference_reward: RewardFn,
    rng: np.random.Generator,
) -> int:
    """Scripted labeler: prefer the segment with the larger summed preference
    reward; break exact ties with a fair coin."""
    if len(sigma0) != len(sigma1):
        raise ValueError("query segments must have equal length")
    r0 = segment_return(sigma0, preference_reward)
    r1 = segment_return(sigma1, preference_reward)
    if r0 > r1:
        return 0
    if r0 < r1:
        return 1
    return int(rng.integers(2))


def _lane_keep_policy(v_target: float) -> HumanPolicy:
    """Hold the current lane at a target speed.

    Steering damps heading and lateral offset from the nearest lane center;
    throttle is a proportional speed controller (zero exactly at the target
    speed)."""

    def act(state: WorldState, rng: np.random.Generator) -> np.ndarray:
        y2, v2, h2 = state.features[5], state.features[6], state.features[7]
        lane_y = min(LANE_CENTERS, key=lambda c: abs(c - y2))
        steer = float(np.clip(-4.0 * h2 - 0.2 * (y2 - lane_y), -1.0, 1.0))
        throttle = float(np.clip(0.5 * (v_target - v2), -1.0, 1.0))
        return np.array([steer, throttle])

    return HumanPolicy(id=f"lane-keep-{v_target:g}", act=act)


def make_highway_human_policies() -> list[HumanPolicy]:
    """Three lane-keeping styles at different cruise speeds, all consistent
    with letting the robot do the overtaking."""
    return [_lane_keep_policy(20.0), _lane_keep_policy(15.0), _lane_keep_policy(25.0)]


def make_mover_human_policies() -> list[HumanPolicy]:
    """Three x-force profiles, all pushing toward the target's x component."""

    def full(state, rng):
        return np.array([1.0])

    def soft(state, rng):
        return np.array([0.7])

    def pulsed(state, rng):
        # 10 steps on, 10 steps off: a 0.5 duty cycle keyed off the step index
        on = (state.episode_step // 10) % 2 == 0
        return np.array([1.0 if on else 0.0])

    return [
        HumanPolicy("push-full", full),
        HumanPolicy("push-soft", soft),
        HumanPolicy("push-pulsed", pulsed),
    ]


def profile_for_env(
    env: Environment,
    hb_fraction: float,
    epsilon: int,
    total_episodes: int,
) -> HumanProfile:
    """Build the human profile the experiment configs describe: the first
    ``epsilon`` policies of the env's scripted triple, a front-loaded budget,
    and the env's hand-crafted reward as the internal preference reward."""
    if env.env_id == "ma-mover":
        policies = make_mover_human_policies()
    elif env.env_id.startswith("ma-highway-"):
        policies = make_highway_human_policies()
    else:
        raise ValueError(f"no scripted human policies for env {env.env_id!r}")
    if not 1 <= epsilon <= len(policies):
        raise ValueError(f"epsilon must be in [1, {len(policies)}], got {epsilon}")
    return HumanProfile(
        policy_set=tuple(policies[:epsilon]),
        access_budget=AccessBudget(hb_fraction, total_episodes),
        preference_reward=env.true_reward,
        action_low=env.human_action_low.copy(),
        action_high=env.human_action_high.copy(),
    )
