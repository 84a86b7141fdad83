"""Run configuration: one flat record covering the trainer, the learner, the
reward ensemble, and the experiment condition (env, algorithm, human budget
and flexibility).

`defaults_for` bakes in the published hyperparameters for each environment
family and algorithm (feedback cadence, query counts, label budgets, segment
lengths, pretraining lengths, learning rates, ensemble size). Desk-scale
knobs that the reference settings leave open (network widths, batch size,
update cadence, buffer sizes, evaluation cadence) are chosen so a full
condition sweep runs on a laptop core in minutes.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

ALGORITHMS = ("pebble", "rune", "surf")

# segment length by (env family, algorithm)
_HIGHWAY_SEGMENT_LENGTH = {"pebble": 30, "rune": 20, "surf": 15}
_MOVER_SEGMENT_LENGTH = {"pebble": 50, "rune": 50, "surf": 50}


@dataclass
class TrainerConfig:
    env_id: str = "ma-mover"
    algorithm: str = "pebble"
    seed: int = 1

    # condition axes
    hb_fraction: float = 1.0
    epsilon: int = 1

    # schedule
    total_steps: int = 120_000
    pretrain_steps: int = 2_000
    feedback_frequency: int = 2_000  # env steps between feedback sessions (K)
    queries_per_session: int = 14  # M
    max_feedback_budget: int = 1_400
    segment_length: int = 50  # L
    eval_every: int = 2_000
    eval_episodes: int = 10

    # storage
    buffer_capacity: int = 50_000
    segment_bank_capacity: int = 1_000

    # policy learner
    gamma: float = 0.99
    sac_lr: float = 3e-4
    sac_batch_size: int = 256
    sac_hidden: tuple = (128, 128)
    sac_tau: float = 0.005
    sac_target_update_freq: int = 2
    sac_init_temperature: float = 0.1
    sac_update_every: int = 2  # one gradient step per this many env steps

    # reward ensemble
    reward_lr: float = 3e-4
    reward_epochs: int = 10
    reward_batch_size: int = 32
    reward_hidden: tuple = (256, 256, 256)
    n_ensemble_members: int = 3

    # variant knobs
    rune_beta0: float = 0.05
    rune_beta_decay: float = 1e-5
    surf_tau: float = 0.95
    surf_mu: int = 4
    surf_loss_weight: float = 1.0
    surf_pool_size: int = 256

    # query selection
    query_pool_size: int = 10
    # whether exploration-phase episodes feed the query bank
    bank_pretrain_segments: bool = True

    # entropy pretraining
    knn_k: int = 5
    knn_window: int = 512

    # plumbing
    remote_timeout: float = 120.0
    torch_threads: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(
                f"algorithm: expected one of {ALGORITHMS}, got {self.algorithm!r}"
            )
        if not 0.0 <= self.hb_fraction <= 1.0:
            raise ValueError(f"hb_fraction: must lie in [0, 1], got {self.hb_fraction}")
        if self.epsilon < 1:
            raise ValueError(f"epsilon: must be >= 1, got {self.epsilon}")
        self.sac_hidden = tuple(self.sac_hidden)
        self.reward_hidden = tuple(self.reward_hidden)

    @property
    def condition(self) -> str:
        return f"hb{self.hb_fraction:g}-eps{self.epsilon}"

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sac_hidden"] = list(self.sac_hidden)
        d["reward_hidden"] = list(self.reward_hidden)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TrainerConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {', '.join(sorted(unknown))}")
        if "env_id" not in data:
            raise ValueError("env_id: required")
        base = defaults_for(data["env_id"], data.get("algorithm", "pebble"))
        merged = {**dataclasses.asdict(base), **data}
        return cls(**merged)


def defaults_for(env_id: str, algorithm: str = "pebble") -> TrainerConfig:
    """Published defaults per environment family and algorithm."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"algorithm: expected one of {ALGORITHMS}, got {algorithm!r}")
    if env_id.startswith("ma-highway-"):
        return TrainerConfig(
            env_id=env_id,
            algorithm=algorithm,
            total_steps=60_000,
            pretrain_steps=1_000,
            feedback_frequency=500,
            queries_per_session=25,
            max_feedback_budget=800,
            segment_length=_HIGHWAY_SEGMENT_LENGTH[algorithm],
        )
    if env_id == "ma-mover":
        return TrainerConfig(
            env_id=env_id,
            algorithm=algorithm,
            total_steps=120_000,
            pretrain_steps=2_000,
            feedback_frequency=2_000,
            queries_per_session=14,
            max_feedback_budget=1_400,
            segment_length=_MOVER_SEGMENT_LENGTH[algorithm],
        )
    raise ValueError(f"env_id: unknown environment {env_id!r}")


def load_config(path, overrides: dict | None = None) -> TrainerConfig:
    """Read a YAML config file and apply CLI overrides on top."""
    raw = yaml.safe_load(Path(path).read_text())
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValueError(f"config file {path} must contain a mapping")
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    return TrainerConfig.from_dict(raw)


def save_resolved(config: TrainerConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config.to_dict(), sort_keys=True))
