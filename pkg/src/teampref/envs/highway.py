"""Three-lane highway overtake family.

Two agent cars (human ahead, robot behind) plus constant-speed background
traffic on a straight 500 m track. Lanes are 4 m wide, centered at
y = 2, 6, 10. Cars follow a kinematic bicycle: per step the heading turns
with steering, speed integrates throttle (clamped to [0, v_max]), and the
position advances along the new heading.

The hand-crafted team reward is a piecewise-constant table over the robot's
position relative to the human. Rows are evaluated in order and the first
matching group wins: the same-lane group (robot within 2 m laterally of the
human), then the penalty band (being there at mid-overtake costs -1), then
the preferred overtaking band (+-0.25 regardless of progress). Variants
permute which lateral band is preferred vs penalized and where the human
starts; the right-overtake assignment is the reference one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..game import WorldState
from .base import Environment

DT = 0.1  # s
ACCEL_GAIN = 5.0  # m/s^2 at full throttle
STEER_GAIN = 0.5  # rad/s at full steering
V_MAX = 30.0  # m/s
CAR_LENGTH = 5.0  # m
CAR_WIDTH = 2.0  # m
TRACK_LENGTH = 500.0  # m
LANE_CENTERS = (2.0, 6.0, 10.0)
LANE_WIDTH = 4.0
N_TRAFFIC = 3
TRAFFIC_SPEED = 20.0  # m/s
MAX_STEPS = 200
Y_MAX = 12.0

# feature layout: robot (x1, y1, v1, h1), human (x2, y2, v2, h2),
# then N_TRAFFIC * (x, y, v) sorted by distance to the robot
OBS_DIM = 8 + 3 * N_TRAFFIC


@dataclass(frozen=True)
class HighwayState:
    """Decoded pose view of the flat feature vector."""

    robot: tuple  # (x1, y1, v1, heading1)
    human: tuple  # (x2, y2, v2, heading2)
    traffic: tuple  # ((x, y, v), ...)
    lane_width: float = LANE_WIDTH


@dataclass(frozen=True)
class HighwayVariant:
    """Which lateral band is the preferred overtaking lane and where the
    human starts. ``penalty_band`` carries the -0.25 / 0.5 / -1 rows,
    ``preferred_band`` the flat +-0.25 rows."""

    name: str
    human_start_lane: int
    penalty_band: tuple = (2.0, 6.0)
    preferred_band: tuple = (6.0, 10.0)


VARIANTS = {
    # Reference variant: human on the top-most lane, table used verbatim.
    "right": HighwayVariant("right", human_start_lane=2,
                            penalty_band=(2.0, 6.0), preferred_band=(6.0, 10.0)),
    # Band assignment flipped; human starts mid-lane.
    "middle": HighwayVariant("middle", human_start_lane=1,
                             penalty_band=(6.0, 10.0), preferred_band=(2.0, 6.0)),
    # Same assignment as right but the human holds the bottom lane.
    "left": HighwayVariant("left", human_start_lane=0,
                           penalty_band=(2.0, 6.0), preferred_band=(6.0, 10.0)),
}


def decode(features: np.ndarray) -> HighwayState:
    f = np.asarray(features, dtype=np.float64)
    traffic = tuple(
        (f[8 + 3 * i], f[9 + 3 * i], f[10 + 3 * i]) for i in range(N_TRAFFIC)
    )
    return HighwayState(robot=tuple(f[0:4]), human=tuple(f[4:8]), traffic=traffic)


def encode(state: HighwayState, robot_x: float) -> np.ndarray:
    # traffic slots are sorted nearest-first relative to the robot
    traffic = sorted(state.traffic, key=lambda c: abs(c[0] - robot_x))
    flat = list(state.robot) + list(state.human)
    for c in traffic:
        flat.extend(c)
    return np.asarray(flat, dtype=np.float64)


def highway_reward(state: HighwayState, variant: HighwayVariant) -> float:
    """Piecewise-constant team reward; total on all states.

    Groups in table order, first match wins:
      same lane  (|y1 - y2| <= 2):      -0.5 if x1 <= x2 else 1
      penalty band (y1 in band):        -0.25 if x1 <= x2-10; 0.5 if x1 >= x2+10;
                                        else -1
      preferred band (y1 in band):      0.25 (either side of the human)
      anywhere else:                    -1 (off the expected route)
    """
    x1, y1 = state.robot[0], state.robot[1]
    x2, y2 = state.human[0], state.human[1]
    if y2 - 2.0 <= y1 <= y2 + 2.0:
        return 1.0 if x1 > x2 else -0.5
    lo, hi = variant.penalty_band
    if lo <= y1 <= hi:
        if x1 <= x2 - 10.0:
            return -0.25
        if x1 >= x2 + 10.0:
            return 0.5
        return -1.0
    lo, hi = variant.preferred_band
    if lo <= y1 <= hi:
        return 0.25
    return -1.0


def _collides(ax, ay, bx, by) -> bool:
    return abs(ax - bx) < CAR_LENGTH and abs(ay - by) < CAR_WIDTH


def _bicycle(x, y, v, h, steer, throttle):
    h = h + steer * STEER_GAIN * DT
    v = float(np.clip(v + throttle * ACCEL_GAIN * DT, 0.0, V_MAX))
    x = x + v * np.cos(h) * DT
    y = float(np.clip(y + v * np.sin(h) * DT, 0.0, Y_MAX - 0.01))
    return x, y, v, h


class HighwayEnv(Environment):
    max_episode_steps = MAX_STEPS
    observation_dim = OBS_DIM

    def __init__(self, variant: str = "right"):
        if variant not in VARIANTS:
            raise ValueError(f"unknown highway variant {variant!r}")
        self.variant = VARIANTS[variant]
        self.env_id = f"ma-highway-{variant}"
        box = np.ones(2)  # (steering, throttle), both agents
        self.human_action_low, self.human_action_high = -box, box
        self.robot_action_low, self.robot_action_high = -box.copy(), box.copy()

    def reset(self, rng: np.random.Generator) -> WorldState:
        lane_y = LANE_CENTERS[self.variant.human_start_lane]
        robot = (0.0, lane_y, 20.0, 0.0)
        human = (30.0, lane_y, 20.0, 0.0)
        other_lanes = [c for i, c in enumerate(LANE_CENTERS)
                       if i != self.variant.human_start_lane]
        traffic = tuple(
            (60.0 + 70.0 * i + float(rng.uniform(0.0, 20.0)),
             other_lanes[i % len(other_lanes)],
             TRAFFIC_SPEED)
            for i in range(N_TRAFFIC)
        )
        state = HighwayState(robot=robot, human=human, traffic=traffic)
        return WorldState(encode(state, robot_x=0.0), episode_step=0)

    def step(self, state, action, rng):
        s = decode(state.features)
        steer_h, throttle_h = action.human
        steer_r, throttle_r = action.robot
        robot = _bicycle(*s.robot, steer_r, throttle_r)
        human = _bicycle(*s.human, steer_h, throttle_h)
        traffic = tuple((x + v * DT, y, v) for x, y, v in s.traffic)
        nxt = HighwayState(robot=robot, human=human, traffic=traffic)
        step = state.episode_step + 1
        done = (
            self._collision(nxt)
            or robot[0] > TRACK_LENGTH
            or step >= self.max_episode_steps
        )
        return WorldState(encode(nxt, robot_x=robot[0]), episode_step=step), done

    def _collision(self, s: HighwayState) -> bool:
        x1, y1 = s.robot[0], s.robot[1]
        x2, y2 = s.human[0], s.human[1]
        if _collides(x1, y1, x2, y2):
            return True
        for (x, y, _v) in s.traffic:
            if _collides(x1, y1, x, y) or _collides(x2, y2, x, y):
                return True
        return False

    def is_terminal(self, state: WorldState) -> bool:
        s = decode(state.features)
        return (
            state.episode_step >= self.max_episode_steps
            or s.robot[0] > TRACK_LENGTH
            or self._collision(s)
        )

    def true_reward(self, state, action) -> float:
        return highway_reward(decode(state.features), self.variant)

    def frame(self, features: np.ndarray) -> list[dict]:
        s = decode(features)
        entities = [
            {"entity": "robot", "x": s.robot[0], "y": s.robot[1], "heading": s.robot[3]},
            {"entity": "human", "x": s.human[0], "y": s.human[1], "heading": s.human[3]},
        ]
        for i, (x, y, _v) in enumerate(s.traffic):
            entities.append({"entity": f"traffic{i}", "x": x, "y": y, "heading": 0.0})
        return entities

    def render_meta(self) -> dict:
        return {
            "kind": "highway",
            "track_length": TRACK_LENGTH,
            "lane_centers": list(LANE_CENTERS),
            "lane_width": LANE_WIDTH,
            "car_length": CAR_LENGTH,
            "car_width": CAR_WIDTH,
        }
