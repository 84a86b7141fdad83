import numpy as np
import torch

from teampref import PolicyLearner, SACLearner, WorldState


def make_learner(seed=0):
    torch.manual_seed(seed)
    return SACLearner(
        obs_dim=4,
        human_dim=1,
        robot_dim=2,
        robot_low=np.array([-1.0, -1.0]),
        robot_high=np.array([1.0, 1.0]),
        hidden=(32, 32),
        noise_seed=seed,
    )


def random_batch(rng, n=32):
    return {
        "obs": rng.normal(size=(n, 4)),
        "human": rng.uniform(-1, 1, size=(n, 1)),
        "robot": rng.uniform(-1, 1, size=(n, 2)),
        "next_obs": rng.normal(size=(n, 4)),
        "next_human": rng.uniform(-1, 1, size=(n, 1)),
        "reward": rng.uniform(-1, 1, size=n),
        "done": (rng.random(n) < 0.1).astype(float),
    }


class TestSelectAction:
    def test_actions_stay_in_bounds(self, rng):
        learner = make_learner()
        for _ in range(50):
            state = WorldState(rng.normal(scale=10.0, size=4))
            for explore in (True, False):
                a = learner.select_action(state, explore)
                assert np.all(a >= -1.0) and np.all(a <= 1.0)

    def test_deterministic_mode_is_repeatable(self, rng):
        learner = make_learner()
        state = WorldState(rng.normal(size=4))
        a1 = learner.select_action(state, explore=False)
        a2 = learner.select_action(state, explore=False)
        assert np.array_equal(a1, a2)

    def test_seeded_exploration_is_reproducible(self, rng):
        state = WorldState(rng.normal(size=4))
        seqs = []
        for _ in range(2):
            learner = make_learner(seed=3)
            seqs.append([learner.select_action(state, True) for _ in range(5)])
        assert all(np.array_equal(a, b) for a, b in zip(*seqs))


class TestUpdate:
    def test_losses_finite_and_targets_track(self, rng):
        learner = make_learner()
        before = [p.clone() for p in learner.q1_target.parameters()]
        for _ in range(4):
            losses = learner.update(random_batch(rng))
            assert np.isfinite(losses["critic_loss"])
            assert np.isfinite(losses["actor_loss"])
        after = list(learner.q1_target.parameters())
        assert any(not torch.equal(a, b) for a, b in zip(before, after))

    def test_alpha_stays_positive(self, rng):
        learner = make_learner()
        for _ in range(10):
            losses = learner.update(random_batch(rng))
        assert losses["alpha"] > 0


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path, rng):
        learner = make_learner()
        for _ in range(3):
            learner.update(random_batch(rng))
        state = WorldState(rng.normal(size=4))
        expected = learner.select_action(state, explore=False)
        path = tmp_path / "learner.pt"
        learner.save(path)
        fresh = make_learner(seed=99)
        fresh.load(path)
        assert np.array_equal(fresh.select_action(state, explore=False), expected)
        assert fresh.updates_done == learner.updates_done


class TestContract:
    def test_sac_satisfies_protocol(self):
        assert isinstance(make_learner(), PolicyLearner)

    def test_scripted_learner_substitutes(self, rng):
        class ConstantPush:
            def select_action(self, state, explore, rng=None):
                return np.array([1.0])

            def update(self, batch):
                return {}

        assert isinstance(ConstantPush(), PolicyLearner)
