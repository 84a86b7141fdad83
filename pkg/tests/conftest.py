import numpy as np
import pytest

from teampref import JointAction, Segment, Transition, WorldState


def make_step(features, human=(0.0,), robot=(0.0,)):
    return WorldState(np.asarray(features, dtype=float)), JointAction(
        np.asarray(human, dtype=float), np.asarray(robot, dtype=float)
    )


def make_segment(feature_rows, human=(0.0,), robot=(0.0,), env_id="test", episode_id=0):
    steps = tuple(make_step(row, human, robot) for row in feature_rows)
    return Segment(steps=steps, env_id=env_id, episode_id=episode_id)


def random_segment(rng, length=5, dim=3, env_id="test"):
    return make_segment(rng.normal(size=(length, dim)), env_id=env_id)


def make_transitions(rewards, dim=3):
    """A fake episode with the given learned rewards; features encode the index."""
    transitions = []
    for i, r in enumerate(rewards):
        s = WorldState(np.full(dim, float(i)), episode_step=i)
        s2 = WorldState(np.full(dim, float(i + 1)), episode_step=i + 1)
        a = JointAction(np.zeros(1), np.zeros(1))
        transitions.append(Transition(s, a, s2, float(r), i == len(rewards) - 1))
    return transitions


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
