"""Environment registry keyed by string IDs."""

from __future__ import annotations

from .base import Environment
from .highway import HighwayEnv, HighwayState, HighwayVariant, VARIANTS, highway_reward
from .mover import MoverEnv, MoverState, mover_reward, mover_step

ENV_IDS = ("ma-highway-right", "ma-highway-middle", "ma-highway-left", "ma-mover")


def make_env(env_id: str) -> Environment:
    if env_id == "ma-mover":
        return MoverEnv()
    if env_id.startswith("ma-highway-"):
        variant = env_id.removeprefix("ma-highway-")
        if variant in VARIANTS:
            return HighwayEnv(variant)
    raise ValueError(f"unknown env_id {env_id!r}; known: {', '.join(ENV_IDS)}")


def env_metadata(env_id: str) -> dict:
    return make_env(env_id).metadata()


__all__ = [
    "ENV_IDS",
    "Environment",
    "HighwayEnv",
    "HighwayState",
    "HighwayVariant",
    "MoverEnv",
    "MoverState",
    "VARIANTS",
    "env_metadata",
    "highway_reward",
    "make_env",
    "mover_reward",
    "mover_step",
]
