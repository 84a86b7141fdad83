"""The interleaved reward-learning / policy-learning loop.

Structure of one run:
  1. entropy pretraining: roll out with an intrinsic novelty reward (distance
     to the k-th nearest neighbor among recently visited states) so the
     buffer and segment bank start with diverse behavior;
  2. the main loop: at every episode boundary the human re-draws a policy
     from their admissible set; every K steps a feedback session queries M
     segment pairs, trains the reward ensemble on all labels so far, and
     relabels the entire replay buffer; every step the human acts through
     the budgeted pathway, the robot acts from the learner, and the learner
     takes a gradient step on the stored learned rewards.

Labels stop once the feedback budget is spent; training continues on the
frozen reward. Evaluation rolls out deterministically under the same human
access regime the team deploys with and scores with the true preference
reward, which never reaches the learner.
"""

from __future__ import annotations

import dataclasses
import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .config import TrainerConfig
from .envs import make_env
from .envs.base import Environment
from .feedback import FeedbackSource, OracleFeedbackSource
from .game import (
    HumanSource,
    JointAction,
    QueryStrategy,
    ReplayBuffer,
    SegmentBank,
    WorldState,
    sample_query_pair,
    step_game,
)
from .humans import (
    AccessBudget,
    HumanProfile,
    human_action,
    profile_for_env,
    select_episode_policy,
)
from .rewards import PreferenceDataset, RewardEnsemble, relabel_buffer, train_reward
from .rng import RngPool
from .sac import PolicyLearner, SACLearner


class KnnNovelty:
    """Intrinsic exploration signal: distance from a state to its k-th
    nearest neighbor among the last ``window`` visited states."""

    def __init__(self, k: int = 5, window: int = 512):
        self.k = k
        self._states: deque = deque(maxlen=window)

    def score(self, features: np.ndarray) -> float:
        if not self._states:
            return 0.0
        arr = np.asarray(self._states)
        dists = np.linalg.norm(arr - features, axis=1)
        k_eff = min(self.k, len(dists))
        return float(np.partition(dists, k_eff - 1)[k_eff - 1])

    def add(self, features: np.ndarray) -> None:
        self._states.append(np.array(features, dtype=np.float64))

    def __len__(self) -> int:
        return len(self._states)


@dataclass
class EvalResult:
    mean_return: float
    std_return: float
    returns: list


def evaluate_policy(
    learner: PolicyLearner,
    env: Environment,
    profile: HumanProfile,
    episodes: int,
    rng: np.random.Generator,
) -> EvalResult:
    """Deterministic-policy rollouts scored with the true preference reward.

    Evaluation is a miniature deployment under the profile's access regime:
    the human executes a policy drawn per episode from their admissible set
    in exactly the budgeted fraction of evaluation episodes (front-loaded,
    through the same budgeted-action pathway as training) and is replaced by
    the uniform random fallback in the rest. Under full access every episode
    is a policy episode; with no access the team is scored with the human
    side random, which is what the robot actually gets to deploy with."""
    if episodes <= 0:
        raise ValueError("evaluation needs at least one episode")
    eval_profile = dataclasses.replace(
        profile,
        access_budget=AccessBudget(profile.access_budget.fraction, episodes),
    )
    returns = []
    for ep in range(1, episodes + 1):
        policy = select_episode_policy(eval_profile, ep, rng)
        state = env.reset(rng)
        total = 0.0
        while not env.is_terminal(state):
            a_h, source = human_action(eval_profile, policy, state, ep, rng)
            a_r = learner.select_action(state, explore=False)
            action = JointAction(a_h, a_r, source)
            total += eval_profile.preference_reward(state, action)
            state, _done = env.step(state, action, rng)
        returns.append(total)
    arr = np.asarray(returns)
    return EvalResult(float(arr.mean()), float(arr.std()), returns)


def rune_intrinsic(
    ensemble: RewardEnsemble, inputs: np.ndarray, beta_t: float
) -> np.ndarray:
    """Uncertainty exploration bonus: beta_t times the ensemble disagreement."""
    if beta_t < 0:
        raise ValueError("beta_t must be non-negative")
    return beta_t * ensemble.disagreement_many(inputs)


@dataclass
class RunMetrics:
    records: list = field(default_factory=list)

    def add(self, **kwargs) -> None:
        self.records.append(kwargs)

    def write_jsonl(self, path) -> None:
        with open(path, "w") as f:
            for rec in self.records:
                f.write(json.dumps(rec) + "\n")

    @classmethod
    def read_jsonl(cls, path) -> "RunMetrics":
        records = [json.loads(line) for line in Path(path).read_text().splitlines() if line]
        return cls(records=records)

    @property
    def final_mean_return(self) -> float:
        return self.records[-1]["mean_return"]


class Trainer:
    """Owns one run: env, human profile, learner, ensemble, buffers."""

    def __init__(
        self,
        config: TrainerConfig,
        feedback_source: FeedbackSource | None = None,
        env: Environment | None = None,
        learner: PolicyLearner | None = None,
        profile: HumanProfile | None = None,
        record_trace: bool = False,
        audit: bool = False,
    ):
        self.config = config
        torch.set_num_threads(config.torch_threads)
        torch.manual_seed(config.seed)
        self.rngs = RngPool(config.seed)

        self.env = env if env is not None else make_env(config.env_id)
        total_env_steps = config.pretrain_steps + config.total_steps
        self.estimated_episodes = max(
            1, math.ceil(total_env_steps / self.env.max_episode_steps)
        )
        self.profile = profile if profile is not None else profile_for_env(
            self.env, config.hb_fraction, config.epsilon, self.estimated_episodes
        )

        obs_dim = self.env.observation_dim
        dh = len(self.env.human_action_low)
        dr = len(self.env.robot_action_low)
        # member nets draw their initializations from the torch seed above
        self.ensemble = RewardEnsemble(
            obs_dim + dh + dr,
            n_members=config.n_ensemble_members,
            hidden=config.reward_hidden,
            lr=config.reward_lr,
        )
        self.learner = learner if learner is not None else SACLearner(
            obs_dim,
            dh,
            dr,
            self.env.robot_action_low,
            self.env.robot_action_high,
            hidden=config.sac_hidden,
            lr=config.sac_lr,
            gamma=config.gamma,
            tau=config.sac_tau,
            target_update_freq=config.sac_target_update_freq,
            init_temperature=config.sac_init_temperature,
            noise_seed=self.rngs.child_seed("sac-noise", 0),
        )
        self.feedback_source = feedback_source if feedback_source is not None else (
            OracleFeedbackSource(self.profile.preference_reward, self.rngs.stream("oracle"))
        )

        self.buffer = ReplayBuffer(config.buffer_capacity)
        self.bank = SegmentBank(config.segment_bank_capacity)
        self.dataset = PreferenceDataset(max_size=config.max_feedback_budget)
        self.novelty = KnnNovelty(config.knn_k, config.knn_window)
        self.metrics = RunMetrics()

        self.global_step = 0
        self.episode_id = 0
        self.labels_used = 0
        self.sessions_done = 0
        self.sessions_deferred = 0
        self.last_reward_loss: float | None = None
        self.source_counts = {HumanSource.POLICY: 0, HumanSource.RANDOM_FALLBACK: 0}
        self.phase = "idle"

        self.record_trace = record_trace
        self.trace: list = []
        self.audit = audit
        self.events: list = []
        self.relabel_audits: list = []

    # -- orchestration ----------------------------------------------------

    def run(self) -> RunMetrics:
        cfg = self.config
        state: WorldState | None = None
        active_policy = None
        episode_transitions: list = []
        total = cfg.pretrain_steps + cfg.total_steps

        for t in range(1, total + 1):
            self.global_step = t
            post = t - cfg.pretrain_steps  # <= 0 while pretraining
            if post >= 1 and (post - 1) % cfg.feedback_frequency == 0:
                self._feedback_session()

            if state is None:
                self.episode_id += 1
                active_policy = select_episode_policy(
                    self.profile, self.episode_id, self.rngs.stream("human")
                )
                state = self.env.reset(self.rngs.stream("env"))
                episode_transitions = []
                self._event("episode_start", episode=self.episode_id,
                            policy=active_policy.id)

            self.phase = "rollout"
            a_h, source = human_action(
                self.profile, active_policy, state, self.episode_id,
                self.rngs.stream("human"),
            )
            a_r = self.learner.select_action(state, explore=True)
            action = JointAction(a_h, a_r, source)
            tr = step_game(self.env, state, action, self.rngs.stream("env"))
            if post < 1:
                tr.learned_reward = self.novelty.score(tr.next_state.features)
                self.novelty.add(tr.next_state.features)
            else:
                tr.learned_reward = self.ensemble.rollout_predict(
                    state.features, a_h, a_r
                )
            self.buffer.push(tr)
            episode_transitions.append(tr)
            self.source_counts[source] += 1
            if self.record_trace:
                self.trace.append(
                    (t, tuple(a_h), tuple(a_r), tuple(tr.next_state.features),
                     tr.learned_reward)
                )

            if tr.done:
                banked = 0
                if post >= 1 or cfg.bank_pretrain_segments:
                    banked = self.bank.add_episode(
                        episode_transitions, cfg.segment_length, self.env.env_id,
                        self.episode_id,
                    )
                self._event("episode_end", episode=self.episode_id, banked=banked)
                state = None
            else:
                state = tr.next_state

            if len(self.buffer) >= cfg.sac_batch_size and t % cfg.sac_update_every == 0:
                self.phase = "update"
                self.learner.update(self._learner_batch())
                self._event("learner_update", step=t)

            if post >= 1 and post % cfg.eval_every == 0:
                self._evaluate(post)

        self.phase = "idle"
        return self.metrics

    # -- pieces -----------------------------------------------------------

    def _learner_batch(self) -> dict:
        n = len(self.buffer)
        # the newest row is excluded so every sampled row has a successor
        idx = self.rngs.stream("sac").integers(0, n - 1, size=self.config.sac_batch_size)
        batch = self.buffer.sample_batch(idx)
        if self.config.algorithm == "rune" and self.config.rune_beta0 > 0.0:
            beta_t = self.config.rune_beta0 * math.exp(
                -self.config.rune_beta_decay * self.global_step
            )
            inputs = np.hstack([batch["obs"], batch["human"], batch["robot"]])
            batch["reward"] = batch["reward"] + rune_intrinsic(
                self.ensemble, inputs, beta_t
            )
        return batch

    def _feedback_session(self) -> None:
        cfg = self.config
        if self.labels_used >= cfg.max_feedback_budget:
            return
        if len(self.bank) < 2:
            self._event("session_skipped", reason="bank_too_small")
            return
        self.phase = "session"
        self._event("session_start", step=self.global_step)
        strategy = (
            QueryStrategy.UNIFORM
            if self.sessions_done == 0
            else QueryStrategy.DISAGREEMENT
        )
        n_queries = min(cfg.queries_per_session, cfg.max_feedback_budget - self.labels_used)
        pairs = [
            sample_query_pair(
                self.bank, strategy, self.ensemble, self.rngs.stream("query"),
                pool_size=cfg.query_pool_size,
            )
            for _ in range(n_queries)
        ]
        records = self.feedback_source.request_labels(pairs)
        if not records:
            self.sessions_deferred += 1
            self._event("session_deferred", step=self.global_step)
            self.phase = "rollout"
            return
        for rec in records:
            self.dataset.add(rec)
            self.labels_used += 1
        self._event("labels_consumed", count=len(records), step=self.global_step)

        surf_pool = None
        if cfg.algorithm == "surf":
            surf_rng = self.rngs.stream("surf")
            n = len(self.bank)
            surf_pool = [
                tuple(self.bank[int(i)] for i in surf_rng.choice(n, 2, replace=False))
                for _ in range(cfg.surf_pool_size)
            ]
        report = train_reward(
            self.ensemble,
            self.dataset,
            epochs=cfg.reward_epochs,
            batch_size=cfg.reward_batch_size,
            rng=self.rngs.stream("reward"),
            surf_pool=surf_pool,
            surf_tau=cfg.surf_tau,
            surf_mu=cfg.surf_mu,
            surf_lambda=cfg.surf_loss_weight,
            surf_rng=self.rngs.stream("surf"),
        )
        self.last_reward_loss = report["mean_final_loss"]
        relabel_buffer(self.ensemble, self.buffer)
        if self.audit:
            self.relabel_audits.append(self._audit_relabel())
        self.sessions_done += 1
        self._event("session_end", step=self.global_step)
        self.phase = "rollout"

    def _audit_relabel(self, sample: int = 100) -> bool:
        """Stored rewards must equal fresh ensemble-mean predictions exactly;
        the recomputation uses the same canonical batched path as relabel."""
        fresh = self.ensemble.predict_many(self.buffer.reward_input_matrix())
        stored = self.buffer.rewards()
        idx = self.rngs.stream("audit").integers(0, len(stored), size=min(sample, len(stored)))
        return bool(np.all(stored[idx] == fresh[idx]))

    def _evaluate(self, post_step: int) -> None:
        self.phase = "eval"
        eval_index = post_step // self.config.eval_every
        rng = np.random.default_rng(self.rngs.child_seed("eval", eval_index))
        result = evaluate_policy(
            self.learner, self.env, self.profile, self.config.eval_episodes, rng
        )
        acted = sum(self.source_counts.values())
        self.metrics.add(
            step=post_step,
            mean_return=result.mean_return,
            std_return=result.std_return,
            labels_used=self.labels_used,
            policy_source_ratio=(
                self.source_counts[HumanSource.POLICY] / acted if acted else 0.0
            ),
            reward_loss=self.last_reward_loss,
        )
        self._event("eval", step=post_step, mean_return=result.mean_return)
        self.phase = "rollout"

    def _event(self, kind: str, **payload) -> None:
        if self.audit:
            self.events.append({"kind": kind, **payload})

    # -- persistence -------------------------------------------------------

    def save_checkpoints(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.ensemble.save(out / "reward_ensemble.bin")
        if isinstance(self.learner, SACLearner):
            self.learner.save(out / "learner.pt")


def run_training(
    config: TrainerConfig,
    feedback_source: FeedbackSource | None = None,
    **trainer_kwargs,
) -> RunMetrics:
    return Trainer(config, feedback_source=feedback_source, **trainer_kwargs).run()


def explore_pretrain(
    env: Environment,
    learner: PolicyLearner,
    profile: HumanProfile,
    steps: int,
    seed: int = 0,
    segment_length: int = 50,
    **config_kwargs,
) -> tuple[ReplayBuffer, SegmentBank]:
    """Run only the entropy-pretraining phase; returns the seeded replay
    buffer and the initial segment bank."""
    cfg = TrainerConfig.from_dict(
        {
            "env_id": env.env_id,
            "seed": seed,
            "total_steps": 0,
            "pretrain_steps": steps,
            "segment_length": segment_length,
            **config_kwargs,
        }
    )
    trainer = Trainer(cfg, env=env, learner=learner, profile=profile)
    trainer.run()
    return trainer.buffer, trainer.bank
