"""Ensemble preference-reward learning.

Each member is an MLP over the stacked (state, human action, robot action)
vector with three 256-unit hidden layers and a tanh output, so per-step
predictions are bounded to [-1, 1]. The pairwise preference predictor is the
logistic of the difference of summed per-step rewards; training minimizes
the binary cross-entropy of that predictor against the stored labels.

Numerical conventions that the tests lean on:
  - probability/loss arithmetic happens in float64 regardless of net dtype,
    and the logistic is evaluated in its overflow-free form;
  - log-probabilities are clamped at -30 so saturated predictions keep the
    loss finite;
  - batched prediction (`predict_many`) is the canonical path: buffer
    relabeling and its audits go through it with a fixed chunk size, because
    CPU GEMM kernels are only bitwise-reproducible for a fixed batch shape.
"""

from __future__ import annotations

import json
import math
from typing import Sequence

import numpy as np
import torch
import torch.nn as nn

from .game import PreferenceRecord, ReplayBuffer, Segment

DEFAULT_HIDDEN = (256, 256, 256)
LOG_PROB_FLOOR = -30.0
PREDICT_CHUNK = 4096


class RewardNet(nn.Module):
    """Per-step reward approximator r(s, a_h, a_r) in [-1, 1]."""

    def __init__(
        self,
        input_dim: int,
        hidden: Sequence[int] = DEFAULT_HIDDEN,
        dtype: torch.dtype = torch.float32,
    ):
        super().__init__()
        self.input_dim = int(input_dim)
        self.hidden = tuple(int(h) for h in hidden)
        layers: list[nn.Module] = []
        prev = self.input_dim
        for h in self.hidden:
            layers += [nn.Linear(prev, h), nn.ReLU()]
            prev = h
        layers += [nn.Linear(prev, 1), nn.Tanh()]
        self.net = nn.Sequential(*layers).to(dtype)
        self._dtype = dtype

    @property
    def dtype(self) -> torch.dtype:
        return self._dtype

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)

    def step_rewards(self, x: np.ndarray) -> torch.Tensor:
        """(N, input_dim) array -> (N,) per-step rewards (keeps the graph)."""
        t = torch.as_tensor(np.asarray(x), dtype=self._dtype)
        return self.forward(t).squeeze(-1)


def segment_sum(net: RewardNet, segment: Segment) -> float:
    """Predicted return of one segment, accumulated in float64."""
    with torch.no_grad():
        r = net.step_rewards(segment.input_matrix())
    return float(r.double().sum().item())


def _stable_sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def preference_probability(net: RewardNet, sigma0: Segment, sigma1: Segment) -> float:
    """P(sigma0 preferred over sigma1) under the logistic pairwise model,
    computed as sigmoid(sum0 - sum1); the bounded per-step outputs make the
    exponent small enough that this form cannot overflow."""
    if len(sigma0) != len(sigma1):
        raise ValueError("segments must have equal length")
    return _stable_sigmoid(segment_sum(net, sigma0) - segment_sum(net, sigma1))


def ce_loss(
    net: RewardNet,
    records: Sequence[PreferenceRecord],
    weights: Sequence[float] | None = None,
) -> torch.Tensor:
    """Mean binary cross-entropy of the preference predictor over a batch.

    Returns a 0-dim tensor (differentiable); log-probabilities are clamped
    at LOG_PROB_FLOOR."""
    if len(records) == 0:
        raise ValueError("ce_loss needs a non-empty batch")
    x0 = np.concatenate([r.sigma0.input_matrix() for r in records])
    x1 = np.concatenate([r.sigma1.input_matrix() for r in records])
    lengths = [len(r.sigma0) for r in records]
    y = np.array([r.label for r in records], dtype=np.float64)
    return _ce_from_parts(net, x0, x1, lengths, y, weights)


def _ce_from_parts(net, x0, x1, lengths, y, weights=None) -> torch.Tensor:
    r0 = net.step_rewards(x0).double()
    r1 = net.step_rewards(x1).double()
    idx = torch.repeat_interleave(
        torch.arange(len(lengths)), torch.as_tensor(lengths)
    )
    s0 = torch.zeros(len(lengths), dtype=torch.float64).index_add(0, idx, r0)
    s1 = torch.zeros(len(lengths), dtype=torch.float64).index_add(0, idx, r1)
    d = s0 - s1
    y_t = torch.as_tensor(y, dtype=torch.float64)
    log_p0 = torch.clamp(nn.functional.logsigmoid(d), min=LOG_PROB_FLOOR)
    log_p1 = torch.clamp(nn.functional.logsigmoid(-d), min=LOG_PROB_FLOOR)
    per_record = -((1.0 - y_t) * log_p0 + y_t * log_p1)
    if weights is not None:
        per_record = per_record * torch.as_tensor(weights, dtype=torch.float64)
    return per_record.mean()


class PreferenceDataset:
    """Append-only store of labeled queries, capped at the feedback budget.

    Segment input matrices are cached at insertion so training epochs do not
    re-flatten steps."""

    def __init__(self, max_size: int | None = None):
        self.max_size = max_size
        self.records: list[PreferenceRecord] = []
        self._x0: list[np.ndarray] = []
        self._x1: list[np.ndarray] = []
        self._y: list[int] = []

    def __len__(self) -> int:
        return len(self.records)

    def add(self, record: PreferenceRecord) -> None:
        if self.max_size is not None and len(self.records) >= self.max_size:
            raise ValueError(f"preference dataset is at its budget ({self.max_size})")
        self.records.append(record)
        self._x0.append(record.sigma0.input_matrix())
        self._x1.append(record.sigma1.input_matrix())
        self._y.append(record.label)

    def batch_parts(self, indices: np.ndarray):
        x0 = np.concatenate([self._x0[i] for i in indices])
        x1 = np.concatenate([self._x1[i] for i in indices])
        lengths = [len(self._x0[i]) for i in indices]
        y = np.array([self._y[i] for i in indices], dtype=np.float64)
        return x0, x1, lengths, y


class RewardEnsemble:
    """Independently initialized reward nets trained on the same labels."""

    def __init__(
        self,
        input_dim: int,
        n_members: int = 3,
        hidden: Sequence[int] = DEFAULT_HIDDEN,
        lr: float = 3e-4,
        dtype: torch.dtype = torch.float32,
    ):
        self.input_dim = int(input_dim)
        self.lr = float(lr)
        self.members = [RewardNet(input_dim, hidden, dtype) for _ in range(n_members)]
        self.optimizers = [
            torch.optim.Adam(m.parameters(), lr=lr, betas=(0.9, 0.999))
            for m in self.members
        ]
        self.training_step = 0
        self._np_cache = None

    @property
    def n_members(self) -> int:
        return len(self.members)

    @property
    def hidden(self) -> tuple:
        return self.members[0].hidden

    def _member_outputs(self, x: np.ndarray) -> np.ndarray:
        """(n_members, N) per-step rewards, chunked at a fixed batch shape."""
        x = np.asarray(x, dtype=np.float64)
        outs = np.empty((self.n_members, len(x)))
        with torch.no_grad():
            for start in range(0, len(x), PREDICT_CHUNK):
                chunk = x[start : start + PREDICT_CHUNK]
                for m, net in enumerate(self.members):
                    outs[m, start : start + len(chunk)] = (
                        net.step_rewards(chunk).numpy()
                    )
        return outs

    def predict_many(self, x: np.ndarray) -> np.ndarray:
        """Ensemble-mean per-step rewards for (N, input_dim) inputs."""
        return self._member_outputs(x).mean(axis=0)

    def disagreement_many(self, x: np.ndarray) -> np.ndarray:
        """Population standard deviation across members, per input row."""
        return self._member_outputs(x).std(axis=0)

    def predict_reward(self, features: np.ndarray, human: np.ndarray,
                       robot: np.ndarray) -> float:
        row = np.concatenate([features, human, robot])[None, :]
        return float(self.predict_many(row)[0])

    def rollout_predict(self, features: np.ndarray, human: np.ndarray,
                        robot: np.ndarray) -> float:
        """Per-step prediction on the hot rollout path.

        Numerically the same function as predict_reward up to kernel
        rounding (a cached numpy forward instead of torch); every relabel
        overwrites stored rewards with the canonical batched values, so the
        sub-ulp difference never survives a reward update."""
        if self._np_cache is None:
            self._np_cache = [
                [
                    (layer.weight.detach().numpy().T.copy(),
                     layer.bias.detach().numpy().copy())
                    for layer in net.net
                    if isinstance(layer, nn.Linear)
                ]
                for net in self.members
            ]
        x = np.concatenate([features, human, robot]).astype(np.float32)
        total = 0.0
        for layers in self._np_cache:
            h = x
            for w, b in layers[:-1]:
                h = np.maximum(h @ w + b, 0.0)
            w, b = layers[-1]
            total += math.tanh(float(h @ w[:, 0] + b[0]))
        return total / len(self._np_cache)

    def _invalidate_rollout_cache(self) -> None:
        self._np_cache = None

    def member_disagreement(self, features: np.ndarray, human: np.ndarray,
                            robot: np.ndarray) -> float:
        row = np.concatenate([features, human, robot])[None, :]
        return float(self.disagreement_many(row)[0])

    def member_preference_logits(self, sigma0: Segment, sigma1: Segment) -> np.ndarray:
        """Per-member log-odds of preferring sigma0: sum0 - sum1."""
        x0, x1 = sigma0.input_matrix(), sigma1.input_matrix()
        s0 = self._member_outputs(x0).sum(axis=1)
        s1 = self._member_outputs(x1).sum(axis=1)
        return s0 - s1

    def member_preference_probabilities(
        self, sigma0: Segment, sigma1: Segment
    ) -> np.ndarray:
        logits = self.member_preference_logits(sigma0, sigma1)
        return np.array([_stable_sigmoid(d) for d in logits])

    def save(self, path) -> None:
        """Flat little-endian parameter dump behind a one-line JSON header."""
        dtype_tag = "<f8" if self.members[0].dtype == torch.float64 else "<f4"
        header = {
            "format": "reward-ensemble",
            "version": 1,
            "input_dim": self.input_dim,
            "hidden": list(self.hidden),
            "n_members": self.n_members,
            "dtype": dtype_tag,
            "lr": self.lr,
            "training_step": self.training_step,
        }
        with open(path, "wb") as f:
            f.write(json.dumps(header).encode("utf-8") + b"\n")
            for net in self.members:
                for p in net.state_dict().values():
                    f.write(np.ascontiguousarray(p.numpy(), dtype=dtype_tag).tobytes())

    @classmethod
    def load(cls, path) -> "RewardEnsemble":
        with open(path, "rb") as f:
            header = json.loads(f.readline().decode("utf-8"))
            raw = f.read()
        dtype = torch.float64 if header["dtype"] == "<f8" else torch.float32
        ens = cls(
            header["input_dim"],
            n_members=header["n_members"],
            hidden=tuple(header["hidden"]),
            lr=header["lr"],
            dtype=dtype,
        )
        ens.training_step = header["training_step"]
        buf = np.frombuffer(raw, dtype=header["dtype"])
        offset = 0
        for net in ens.members:
            sd = net.state_dict()
            for key, p in sd.items():
                n = p.numel()
                vals = buf[offset : offset + n].reshape(tuple(p.shape))
                sd[key] = torch.as_tensor(vals.copy(), dtype=dtype)
                offset += n
            net.load_state_dict(sd)
        if offset != len(buf):
            raise ValueError("checkpoint payload size mismatch")
        ens._invalidate_rollout_cache()
        return ens


def train_reward(
    ensemble: RewardEnsemble,
    dataset: PreferenceDataset,
    epochs: int = 10,
    batch_size: int = 32,
    rng: np.random.Generator | None = None,
    surf_pool: Sequence[tuple] | None = None,
    surf_tau: float = 0.95,
    surf_mu: int = 4,
    surf_lambda: float = 1.0,
    surf_rng: np.random.Generator | None = None,
) -> dict:
    """Fit every member independently with Adam on the cross-entropy loss.

    Each member shuffles the dataset with its own stream. When ``surf_pool``
    is given, every gradient step additionally draws unlabeled pairs,
    pseudo-labels the confident ones from the ensemble-mean preference
    probability, and adds their loss with weight ``surf_lambda``. The
    augmentation draws come from ``surf_rng`` so the shuffle streams stay
    untouched (turning the augmentation off must not shift them).
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty preference dataset")
    if rng is None:
        rng = np.random.default_rng()
    member_rngs = rng.spawn(ensemble.n_members)
    if surf_pool is not None:
        surf_member_rngs = (surf_rng or np.random.default_rng()).spawn(
            ensemble.n_members
        )
    n = len(dataset)
    pseudo_count = 0
    for m_index, (net, opt, m_rng) in enumerate(
        zip(ensemble.members, ensemble.optimizers, member_rngs)
    ):
        for _ in range(epochs):
            order = m_rng.permutation(n)
            for start in range(0, n, batch_size):
                idx = order[start : start + batch_size]
                x0, x1, lengths, y = dataset.batch_parts(idx)
                loss = _ce_from_parts(net, x0, x1, lengths, y)
                if surf_pool is not None:
                    pseudo = surf_augment(
                        ensemble, len(idx), surf_pool, surf_tau, surf_mu,
                        surf_member_rngs[m_index],
                    )
                    if pseudo:
                        pseudo_count += len(pseudo)
                        loss = loss + surf_lambda * ce_loss(net, pseudo)
                if not torch.isfinite(loss):
                    raise RuntimeError(
                        f"reward training diverged: loss={loss.item()} on a batch "
                        f"of {len(idx)} records at training step {ensemble.training_step}"
                    )
                opt.zero_grad()
                loss.backward()
                opt.step()
                ensemble.training_step += 1
    ensemble._invalidate_rollout_cache()
    return _training_report(ensemble, dataset, pseudo_count)


def _training_report(ensemble, dataset, pseudo_count) -> dict:
    members = []
    if len(dataset) > 0:
        all_idx = np.arange(len(dataset))
        x0, x1, lengths, y = dataset.batch_parts(all_idx)
        for net in ensemble.members:
            with torch.no_grad():
                loss = float(_ce_from_parts(net, x0, x1, lengths, y).item())
                r0 = net.step_rewards(x0).double()
                r1 = net.step_rewards(x1).double()
            idx = torch.repeat_interleave(
                torch.arange(len(lengths)), torch.as_tensor(lengths)
            )
            s0 = torch.zeros(len(lengths), dtype=torch.float64).index_add(0, idx, r0)
            s1 = torch.zeros(len(lengths), dtype=torch.float64).index_add(0, idx, r1)
            predicted = (s0 < s1).numpy().astype(np.float64)
            members.append(
                {"final_loss": loss, "accuracy": float((predicted == y).mean())}
            )
    return {
        "members": members,
        "mean_final_loss": float(np.mean([m["final_loss"] for m in members])),
        "n_records": len(dataset),
        "pseudo_labeled": pseudo_count,
    }


def surf_augment(
    ensemble: RewardEnsemble,
    labeled_batch_size: int,
    unlabeled_pool: Sequence[tuple],
    tau: float,
    mu: int,
    rng: np.random.Generator,
) -> list[PreferenceRecord]:
    """Pseudo-label confident unlabeled pairs.

    Draws up to ``mu * labeled_batch_size`` pairs from the pool; a pair is
    kept when the ensemble-mean preference probability clears ``tau`` on
    either side, and its pseudo-label is the preferred side. The confidence
    test compares min(P, 1-P) against 1-tau with both sides accumulated
    independently, which stays exact where naive 1-P would round to 0; at
    tau = 1.0 nothing can pass because member probabilities are strictly
    inside (0, 1).
    """
    if not 0.5 < tau <= 1.0:
        raise ValueError("tau must lie in (0.5, 1]")
    if mu < 1:
        raise ValueError("mu must be >= 1")
    if len(unlabeled_pool) == 0:
        return []
    n_draw = min(mu * labeled_batch_size, len(unlabeled_pool))
    picks = rng.choice(len(unlabeled_pool), size=n_draw, replace=False)
    kept: list[PreferenceRecord] = []
    for i in picks:
        sigma0, sigma1 = unlabeled_pool[int(i)]
        logits = ensemble.member_preference_logits(sigma0, sigma1)
        p_mean = float(np.mean([_stable_sigmoid(d) for d in logits]))
        q_mean = float(np.mean([_stable_sigmoid(-d) for d in logits]))
        if min(p_mean, q_mean) <= 1.0 - tau:
            label = 0 if p_mean >= q_mean else 1
            kept.append(PreferenceRecord(sigma0, sigma1, label, source="pseudo"))
    return kept


def relabel_buffer(ensemble: RewardEnsemble, buffer: ReplayBuffer) -> int:
    """Overwrite every stored transition's learned reward with the current
    ensemble-mean prediction. Returns the number of transitions relabeled."""
    if len(buffer) == 0:
        return 0
    buffer.set_rewards(ensemble.predict_many(buffer.reward_input_matrix()))
    return len(buffer)
