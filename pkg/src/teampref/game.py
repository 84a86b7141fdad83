"""Core two-player game machinery: states, joint actions, transitions,
segments, preference records, and the replay/segment buffers shared by the
training loop, the reward model, and the feedback plumbing.

The game is fixed at two players, a human H and a robot R, acting jointly on
a shared world state. Both observe the full state; actions live in
per-agent continuous boxes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover - import cycle guard for annotations only
    from .envs.base import Environment
    from .rewards import RewardEnsemble


class HumanSource(enum.Enum):
    """Where a human action came from."""

    POLICY = "policy"
    RANDOM_FALLBACK = "random_fallback"
    NONE = "none"


@dataclass(frozen=True)
class WorldState:
    """Shared environment state: a flat feature vector plus the step index."""

    features: np.ndarray
    episode_step: int = 0

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        object.__setattr__(self, "features", feats)
        if feats.ndim != 1:
            raise ValueError(f"state features must be 1-D, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise ValueError("state features must be finite")
        if self.episode_step < 0:
            raise ValueError("episode_step must be non-negative")


@dataclass(frozen=True)
class JointAction:
    """The (human, robot) action pair applied in one step."""

    human: np.ndarray
    robot: np.ndarray
    human_source: HumanSource = HumanSource.NONE

    def __post_init__(self):
        object.__setattr__(self, "human", np.asarray(self.human, dtype=np.float64))
        object.__setattr__(self, "robot", np.asarray(self.robot, dtype=np.float64))


@dataclass
class Transition:
    """One step of experience. ``learned_reward`` holds the current ensemble
    mean at (state, action); it is re-established exactly by every buffer
    relabel (during entropy pretraining it temporarily holds the intrinsic
    novelty bonus, which the first relabel overwrites)."""

    state: WorldState
    action: JointAction
    next_state: WorldState
    learned_reward: float
    done: bool


@dataclass(frozen=True)
class Segment:
    """Fixed-length contiguous slice of one episode: the unit of preference
    queries. Steps are (state, joint action) pairs in time order."""

    steps: tuple
    env_id: str = ""
    episode_id: int = 0

    def __len__(self) -> int:
        return len(self.steps)

    def input_matrix(self) -> np.ndarray:
        """(L, obs+dh+dr) matrix of stacked (state, human, robot) rows,
        the reward-model input layout."""
        rows = [
            np.concatenate([s.features, a.human, a.robot]) for s, a in self.steps
        ]
        return np.asarray(rows, dtype=np.float64)


@dataclass(frozen=True)
class PreferenceRecord:
    """A labeled query: y = 0 means sigma0 preferred, y = 1 means sigma1."""

    sigma0: Segment
    sigma1: Segment
    label: int
    source: str = "oracle"  # "oracle" | "human" | "pseudo"

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if len(self.sigma0) != len(self.sigma1):
            raise ValueError("preference segments must have equal length")


class QueryStrategy(enum.Enum):
    UNIFORM = "uniform"
    DISAGREEMENT = "disagreement"


class ReplayBuffer:
    """Bounded FIFO of transitions with column storage for fast batching.

    Eviction is strictly oldest-first. Columns are lazily sized on the first
    push (the buffer learns the observation/action dims from the data).
    """

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self._size = 0
        self._head = 0  # next write slot
        self._states = None
        self._steps = None
        self._human = None
        self._robot = None
        self._next_states = None
        self._next_steps = None
        self._rewards = None
        self._dones = None
        self._sources = None

    def __len__(self) -> int:
        return self._size

    def _alloc(self, tr: Transition) -> None:
        cap = self.capacity
        obs = len(tr.state.features)
        dh, dr = len(tr.action.human), len(tr.action.robot)
        self._states = np.zeros((cap, obs))
        self._next_states = np.zeros((cap, obs))
        self._human = np.zeros((cap, dh))
        self._robot = np.zeros((cap, dr))
        self._steps = np.zeros(cap, dtype=np.int64)
        self._next_steps = np.zeros(cap, dtype=np.int64)
        self._rewards = np.zeros(cap)
        self._dones = np.zeros(cap, dtype=bool)
        self._sources = np.empty(cap, dtype=object)

    def push(self, tr: Transition) -> None:
        if self._states is None:
            self._alloc(tr)
        i = self._head
        self._states[i] = tr.state.features
        self._steps[i] = tr.state.episode_step
        self._human[i] = tr.action.human
        self._robot[i] = tr.action.robot
        self._next_states[i] = tr.next_state.features
        self._next_steps[i] = tr.next_state.episode_step
        self._rewards[i] = tr.learned_reward
        self._dones[i] = tr.done
        self._sources[i] = tr.action.human_source
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _slot(self, index: int) -> int:
        if not 0 <= index < self._size:
            raise IndexError(index)
        if self._size < self.capacity:
            return index
        return (self._head + index) % self.capacity  # oldest-first ordering

    def _slots(self, indices: np.ndarray) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.intp)
        if self._size < self.capacity:
            return idx
        return (self._head + idx) % self.capacity

    def __getitem__(self, index: int) -> Transition:
        s = self._slot(index)
        return Transition(
            state=WorldState(self._states[s].copy(), int(self._steps[s])),
            action=JointAction(
                self._human[s].copy(), self._robot[s].copy(), self._sources[s]
            ),
            next_state=WorldState(self._next_states[s].copy(), int(self._next_steps[s])),
            learned_reward=float(self._rewards[s]),
            done=bool(self._dones[s]),
        )

    def reward_input_matrix(self) -> np.ndarray:
        """(n, obs+dh+dr) matrix of (state, human, robot) rows in FIFO order."""
        idx = self._slots(np.arange(self._size))
        return np.hstack([self._states[idx], self._human[idx], self._robot[idx]])

    def set_rewards(self, values: np.ndarray) -> None:
        if len(values) != self._size:
            raise ValueError("reward vector length must match buffer size")
        self._rewards[self._slots(np.arange(self._size))] = values

    def rewards(self) -> np.ndarray:
        return self._rewards[self._slots(np.arange(self._size))].copy()

    def sample_batch(self, indices: np.ndarray) -> dict:
        """Assemble a training batch. ``next_human`` is the human action taken
        at the following step of the same episode (needed by the critic
        bootstrap); it is undefined on terminal rows, where done masks it out.
        The newest row is excluded from sampling by the caller so i+1 exists.
        """
        idx = np.asarray(indices, dtype=np.intp)
        slots = self._slots(idx)
        nxt = self._slots((idx + 1) % self._size)
        return {
            "obs": self._states[slots].copy(),
            "human": self._human[slots].copy(),
            "robot": self._robot[slots].copy(),
            "next_obs": self._next_states[slots].copy(),
            "next_human": self._human[nxt].copy(),
            "reward": self._rewards[slots].copy(),
            "done": self._dones[slots].astype(np.float64),
        }


class SegmentBank:
    """Bounded FIFO of query-ready segments, copied by value at episode end."""

    def __init__(self, capacity: int = 1000):
        self.capacity = int(capacity)
        self._segments: list[Segment] = []

    def __len__(self) -> int:
        return len(self._segments)

    def __getitem__(self, i: int) -> Segment:
        return self._segments[i]

    def push(self, segment: Segment) -> None:
        self._segments.append(segment)
        if len(self._segments) > self.capacity:
            del self._segments[0 : len(self._segments) - self.capacity]

    def add_episode(self, episode: Sequence[Transition], length: int,
                    env_id: str, episode_id: int) -> int:
        """Cut an episode into non-overlapping windows of ``length`` and bank
        them; the trailing partial window is discarded. Returns the count."""
        n = 0
        for start in range(0, len(episode) - length + 1, length):
            self.push(extract_segment(episode, start, length, env_id, episode_id))
            n += 1
        return n


def step_game(
    env: "Environment",
    state: WorldState,
    action: JointAction,
    rng: np.random.Generator,
    reward_fn: Callable[[WorldState, JointAction], float] | None = None,
) -> Transition:
    """Advance the game one step.

    Raises ValueError on out-of-bounds actions or when stepping a terminated
    episode. ``reward_fn`` fills the learned reward (0 when no model exists
    yet).
    """
    if env.is_terminal(state):
        raise ValueError("cannot step a terminated episode")
    _check_bounds(action.human, env.human_action_low, env.human_action_high, "human")
    _check_bounds(action.robot, env.robot_action_low, env.robot_action_high, "robot")
    next_state, done = env.step(state, action, rng)
    reward = float(reward_fn(state, action)) if reward_fn is not None else 0.0
    return Transition(state, action, next_state, reward, done)


def _check_bounds(a: np.ndarray, low: np.ndarray, high: np.ndarray, who: str) -> None:
    if a.shape != low.shape:
        raise ValueError(f"{who} action has dim {a.shape}, expected {low.shape}")
    if np.any(a < low) or np.any(a > high):
        raise ValueError(f"{who} action {a} outside bounds [{low}, {high}]")


def extract_segment(
    episode: Sequence[Transition],
    start: int,
    length: int,
    env_id: str = "",
    episode_id: int = 0,
) -> Segment:
    """Contiguous, order-preserving slice [start, start+length) of an episode."""
    if start < 0 or length < 0 or start + length > len(episode):
        raise ValueError(
            f"slice [{start}, {start + length}) out of range for episode of "
            f"length {len(episode)}"
        )
    steps = tuple((tr.state, tr.action) for tr in episode[start : start + length])
    return Segment(steps=steps, env_id=env_id, episode_id=episode_id)


def segment_return(
    segment: Segment, reward_fn: Callable[[WorldState, JointAction], float]
) -> float:
    """Undiscounted sum of ``reward_fn`` over the segment's steps."""
    return float(sum(reward_fn(s, a) for s, a in segment.steps))


def sample_query_pair(
    segments: Sequence[Segment] | SegmentBank,
    strategy: QueryStrategy,
    ensemble: "RewardEnsemble | None",
    rng: np.random.Generator,
    pool_size: int = 10,
) -> tuple[Segment, Segment]:
    """Draw a query pair of two distinct segments.

    UNIFORM draws a pair without replacement. DISAGREEMENT draws a uniform
    candidate pool of pairs and returns the one whose preference probability
    varies the most across ensemble members (ties broken uniformly, so a
    degenerate ensemble reduces to a pool-uniform draw).
    """
    n = len(segments)
    if n < 2:
        raise ValueError("need at least 2 segments to form a query pair")
    if strategy == QueryStrategy.UNIFORM:
        i, j = rng.choice(n, size=2, replace=False)
        return segments[int(i)], segments[int(j)]
    if ensemble is None:
        raise ValueError("disagreement sampling requires a reward ensemble")
    pool = [tuple(rng.choice(n, size=2, replace=False)) for _ in range(pool_size)]
    variances = np.array(
        [
            np.var(ensemble.member_preference_probabilities(segments[int(i)], segments[int(j)]))
            for i, j in pool
        ]
    )
    best = np.flatnonzero(variances == variances.max())
    pick = pool[int(rng.choice(best))]
    return segments[int(pick[0])], segments[int(pick[1])]
