import numpy as np
import pytest

from teampref import JointAction, make_env
from teampref.envs import ENV_IDS, env_metadata
from teampref.envs.highway import (
    ACCEL_GAIN,
    DT,
    HighwayState,
    V_MAX,
    VARIANTS,
    decode,
    encode,
    highway_reward,
)
from teampref.envs.mover import MoverState, mover_reward, mover_step

RIGHT = VARIANTS["right"]


def hstate(x1, y1, x2, y2):
    return HighwayState(robot=(x1, y1, 20.0, 0.0), human=(x2, y2, 20.0, 0.0),
                        traffic=())


class TestHighwayRewardTable:
    """Spot checks straight from the hand-crafted table; the acceptance suite
    sweeps the full grid."""

    def test_same_lane_behind(self):
        assert highway_reward(hstate(0.0, 10.0, 30.0, 10.0), RIGHT) == -0.5

    def test_same_lane_ahead(self):
        assert highway_reward(hstate(40.0, 10.0, 30.0, 10.0), RIGHT) == 1.0

    def test_adjacent_band_alongside(self):
        assert highway_reward(hstate(30.0, 4.0, 30.0, 10.0), RIGHT) == -1.0

    def test_adjacent_band_far_behind(self):
        assert highway_reward(hstate(10.0, 4.0, 30.0, 10.0), RIGHT) == -0.25

    def test_adjacent_band_cleared_ahead(self):
        assert highway_reward(hstate(45.0, 4.0, 30.0, 10.0), RIGHT) == 0.5

    def test_overtaking_band_flat_quarter(self):
        # y1 = 8 sits in the overtaking band when the human is clear of it
        assert highway_reward(hstate(35.0, 8.0, 30.0, 11.0), RIGHT) == 0.25
        assert highway_reward(hstate(10.0, 7.0, 30.0, 10.0), RIGHT) == 0.25

    def test_same_lane_wins_band_overlap(self):
        # y1 = 9, y2 = 10: inside both the same-lane band and the overtaking
        # band; the same-lane rows are checked first
        assert highway_reward(hstate(40.0, 9.0, 30.0, 10.0), RIGHT) == 1.0

    def test_reward_range(self, rng):
        allowed = {-1.0, -0.5, -0.25, 0.25, 0.5, 1.0}
        for _ in range(500):
            s = hstate(rng.uniform(0, 500), rng.uniform(0, 12),
                       rng.uniform(0, 500), rng.uniform(0, 12))
            for variant in VARIANTS.values():
                assert highway_reward(s, variant) in allowed


class TestHighwayDynamics:
    def test_zero_action_zero_speed_is_stationary(self):
        env = make_env("ma-highway-right")
        state = _still_state(env)
        nxt, _ = env.step(state, _action2(0, 0, 0, 0), np.random.default_rng(0))
        assert np.allclose(nxt.features[:8], state.features[:8])

    def test_full_throttle_closed_form(self):
        env = make_env("ma-highway-right")
        state = _still_state(env)
        rng = np.random.default_rng(0)
        for k in range(1, 80):
            state, done = env.step(state, _action2(0, 0, 0, 1.0), rng)
            v1 = state.features[2]
            assert v1 == pytest.approx(min(k * ACCEL_GAIN * DT, V_MAX), abs=1e-9)
            if done:
                break

    def test_no_steer_keeps_lateral_position(self, rng):
        env = make_env("ma-highway-right")
        state = env.reset(rng)
        y0 = state.features[1]
        for _ in range(20):
            state, done = env.step(state, _action2(0, 0.2, 0, 0.3), rng)
            assert state.features[1] == pytest.approx(y0)
            if done:
                break

    def test_reset_deterministic_given_seed(self):
        env = make_env("ma-highway-right")
        s1 = env.reset(np.random.default_rng(9))
        s2 = env.reset(np.random.default_rng(9))
        assert np.array_equal(s1.features, s2.features)

    def test_human_starts_top_lane_right_variant(self, rng):
        env = make_env("ma-highway-right")
        state = env.reset(rng)
        assert state.features[5] == 10.0

    def test_encode_decode_round_trip(self, rng):
        env = make_env("ma-highway-right")
        feats = env.reset(rng).features
        assert np.array_equal(encode(decode(feats), robot_x=feats[0]), feats)

    def test_states_stay_finite(self, rng):
        env = make_env("ma-highway-middle")
        state = env.reset(rng)
        for _ in range(env.max_episode_steps):
            a = JointAction(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2))
            state, done = env.step(state, a, rng)
            assert np.all(np.isfinite(state.features))
            if done:
                break


def _still_state(env):
    rng = np.random.default_rng(0)
    feats = env.reset(rng).features.copy()
    feats[2] = 0.0  # robot speed
    feats[6] = 0.0  # human speed
    from teampref import WorldState

    return WorldState(feats, episode_step=0)


def _action2(steer_h, throttle_h, steer_r, throttle_r):
    return JointAction(np.array([steer_h, throttle_h], dtype=float),
                       np.array([steer_r, throttle_r], dtype=float))


class TestMover:
    def test_zero_action_zero_velocity_unchanged(self):
        s = MoverState((0.0, 0.0), (0.0, 0.0), (1.0, 0.0))
        nxt = mover_step(s, JointAction(np.zeros(1), np.zeros(1)))
        assert nxt.position == (0.0, 0.0) and nxt.velocity == (0.0, 0.0)

    def test_velocity_converges_to_force_over_drag(self):
        # fixed point of v <- v(1 - drag dt) + f g dt is f g / drag = 4
        s = MoverState((0.0, 0.0), (0.0, 0.0), (1.0 / np.sqrt(2), 1.0 / np.sqrt(2)))
        a = JointAction(np.ones(1), np.ones(1))
        for _ in range(500):
            s = mover_step(s, a)
        assert s.velocity[0] == pytest.approx(4.0, abs=1e-6)
        assert s.velocity[1] == pytest.approx(4.0, abs=1e-6)

    def test_one_sided_push_scores_below_joint_push(self):
        target = (1.0 / np.sqrt(2), 1.0 / np.sqrt(2))
        solo = MoverState((0.0, 0.0), (0.0, 0.0), target)
        both = MoverState((0.0, 0.0), (0.0, 0.0), target)
        for _ in range(30):
            solo = mover_step(solo, JointAction(np.ones(1), np.zeros(1)))
            both = mover_step(both, JointAction(np.ones(1), np.ones(1)))
        assert mover_reward(solo) < mover_reward(both)

    def test_reward_zero_velocity(self):
        assert mover_reward(MoverState((0, 0), (0, 0), (1, 0))) == 0.0

    def test_reward_aligned_speed_two(self):
        t = (1.0 / np.sqrt(2), 1.0 / np.sqrt(2))
        v = (2.0 * t[0], 2.0 * t[1])
        assert mover_reward(MoverState((0, 0), v, t)) == pytest.approx(2.0)

    def test_reward_orthogonal_speed_two(self):
        # purely orthogonal motion scores -penalty * speed
        t = (1.0 / np.sqrt(2), 1.0 / np.sqrt(2))
        v = (-2.0 * t[1], 2.0 * t[0])
        assert mover_reward(MoverState((0, 0), v, t)) == pytest.approx(-0.2)

    def test_unit_target_enforced(self):
        with pytest.raises(ValueError):
            MoverState((0, 0), (0, 0), (1.0, 1.0))

    def test_observation_layout(self, rng):
        env = make_env("ma-mover")
        state = env.reset(rng)
        assert len(state.features) == 6
        px, py, vx, vy, tx, ty = state.features
        assert (px, py, vx, vy) == (0, 0, 0, 0)
        assert (tx, ty) == pytest.approx((1 / np.sqrt(2), 1 / np.sqrt(2)))

    def test_observation_dim_constant_over_episode(self, rng):
        env = make_env("ma-mover")
        state = env.reset(rng)
        for _ in range(10):
            state, _ = env.step(
                state, JointAction(rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 1)), rng
            )
            assert len(state.features) == env.observation_dim

    def test_forced_cooperation_grid_search(self):
        """The single-step optimal joint action uses both force axes for any
        target bounded away from the axes (a 21x21 grid cannot resolve the
        near-axis kink)."""
        grid = np.linspace(-1.0, 1.0, 21)
        for angle_deg in (20, 30, 45, 60, 70, 110, 200, 250):
            angle = np.radians(angle_deg)
            target = (float(np.cos(angle)), float(np.sin(angle)))
            best, best_val = None, -np.inf
            for fx in grid:
                for fy in grid:
                    s = MoverState((0.0, 0.0), (0.0, 0.0), target)
                    nxt = mover_step(s, JointAction(np.array([fx]), np.array([fy])))
                    val = mover_reward(nxt)
                    if val > best_val:
                        best, best_val = (fx, fy), val
            assert abs(best[0]) > 0 and abs(best[1]) > 0, (angle_deg, best)


class TestRegistry:
    def test_all_ids_construct(self):
        for env_id in ENV_IDS:
            env = make_env(env_id)
            assert env.env_id == env_id

    def test_unknown_id(self):
        with pytest.raises(ValueError, match="unknown env_id"):
            make_env("ma-nothing")

    def test_metadata_descriptor(self):
        meta = env_metadata("ma-mover")
        assert meta["observation_dim"] == 6
        assert meta["human_action"]["dim"] == 1
        assert meta["robot_action"]["dim"] == 1
        assert meta["max_episode_steps"] == 200
        meta_h = env_metadata("ma-highway-right")
        assert meta_h["observation_dim"] == 17
        assert meta_h["render"]["lane_centers"] == [2.0, 6.0, 10.0]

    def test_frames_list_all_entities(self, rng):
        env = make_env("ma-highway-right")
        frame = env.frame(env.reset(rng).features)
        names = {e["entity"] for e in frame}
        assert names == {"robot", "human", "traffic0", "traffic1", "traffic2"}
