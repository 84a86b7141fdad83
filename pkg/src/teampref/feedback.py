"""Feedback-source plumbing between the trainer and whoever answers queries.

Two sources implement the same contract:
  - the scripted oracle answers synchronously from the preference reward;
  - the remote source turns each query pair into a ticket (segment frames
    serialized for rendering), exposes the pending queue over a mailbox, and
    blocks the requesting session until labels arrive or a timeout passes.
    Unanswered tickets stay pending; their labels are collected at the next
    session. Tickets not answered within the expiry window are marked
    Expired and their pairs re-enqueued on the following request.

The mailbox is the only object in the system shared across threads:
HTTP handlers produce into it, the single trainer thread consumes.
"""

from __future__ import annotations

import enum
import itertools
import queue
import threading
import time
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from .envs.base import Environment
from .game import PreferenceRecord, Segment
from .humans import HumanProfile, oracle_preference

QueryPair = tuple[Segment, Segment]


class TicketStatus(enum.Enum):
    PENDING = "pending"
    LABELED = "labeled"
    EXPIRED = "expired"


@dataclass
class QueryTicket:
    query_id: str
    env_id: str
    sigma0_frames: list
    sigma1_frames: list
    created_at: float
    status: TicketStatus = TicketStatus.PENDING

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "env_id": self.env_id,
            "created_at": self.created_at,
            "status": self.status.value,
            "sigma0_frames": self.sigma0_frames,
            "sigma1_frames": self.sigma1_frames,
        }


class FeedbackSource(Protocol):
    def request_labels(self, pairs: Sequence[QueryPair]) -> list[PreferenceRecord]: ...


class OracleFeedbackSource:
    """Labels every query synchronously with the scripted oracle rule."""

    def __init__(self, preference_reward, rng: np.random.Generator):
        self.preference_reward = preference_reward
        self.rng = rng

    def request_labels(self, pairs: Sequence[QueryPair]) -> list[PreferenceRecord]:
        return [
            PreferenceRecord(
                s0, s1, oracle_preference(s0, s1, self.preference_reward, self.rng),
                source="oracle",
            )
            for s0, s1 in pairs
        ]


def oracle_source(profile: HumanProfile, rng: np.random.Generator) -> OracleFeedbackSource:
    return OracleFeedbackSource(profile.preference_reward, rng)


class FeedbackService:
    """Ticket store + label mailbox backing the HTTP endpoints."""

    def __init__(
        self,
        env: Environment,
        expiry_seconds: float = 600.0,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.env = env
        self.expiry_seconds = expiry_seconds
        self.clock = clock
        self.mailbox: "queue.Queue[tuple[str, PreferenceRecord]]" = queue.Queue()
        self._lock = threading.Lock()
        self._tickets: dict[str, QueryTicket] = {}
        self._pairs: dict[str, QueryPair] = {}
        self._pending: list[str] = []
        self._expired_pairs: list[QueryPair] = []
        self._counter = itertools.count(1)

    def enqueue_query(self, pair: QueryPair, env_id: str | None = None) -> QueryTicket:
        sigma0, sigma1 = pair
        frames0 = [self.env.frame(s.features) for s, _ in sigma0.steps]
        frames1 = [self.env.frame(s.features) for s, _ in sigma1.steps]
        ticket = QueryTicket(
            query_id=f"q{next(self._counter):06d}",
            env_id=env_id or sigma0.env_id or self.env.env_id,
            sigma0_frames=frames0,
            sigma1_frames=frames1,
            created_at=self.clock(),
        )
        with self._lock:
            self._tickets[ticket.query_id] = ticket
            self._pairs[ticket.query_id] = pair
            self._pending.append(ticket.query_id)
        return ticket

    def _expire_stale(self) -> None:
        # caller holds the lock
        now = self.clock()
        keep = []
        for qid in self._pending:
            ticket = self._tickets[qid]
            if now - ticket.created_at > self.expiry_seconds:
                ticket.status = TicketStatus.EXPIRED
                self._expired_pairs.append(self._pairs[qid])
            else:
                keep.append(qid)
        self._pending[:] = keep

    def next_pending(self) -> QueryTicket | None:
        with self._lock:
            self._expire_stale()
            return self._tickets[self._pending[0]] if self._pending else None

    def get(self, query_id: str) -> QueryTicket | None:
        with self._lock:
            return self._tickets.get(query_id)

    def submit_label(self, query_id: str, preference, source: str = "human") -> str:
        """Returns "ok" | "not_found" | "conflict" | "invalid"."""
        if preference not in (0, 1):
            return "invalid"
        with self._lock:
            ticket = self._tickets.get(query_id)
            if ticket is None:
                return "not_found"
            if ticket.status is not TicketStatus.PENDING:
                return "conflict"
            ticket.status = TicketStatus.LABELED
            self._pending.remove(query_id)
            sigma0, sigma1 = self._pairs[query_id]
        record = PreferenceRecord(sigma0, sigma1, int(preference), source=source)
        self.mailbox.put((query_id, record))
        return "ok"

    def take_expired_pairs(self) -> list[QueryPair]:
        with self._lock:
            self._expire_stale()
            pairs, self._expired_pairs = self._expired_pairs, []
            return pairs


class RemoteFeedbackSource:
    """Trainer-side view of a FeedbackService: enqueue, block, collect."""

    def __init__(self, service: FeedbackService, timeout: float = 120.0):
        self.service = service
        self.timeout = timeout
        self.deferred_sessions = 0

    def request_labels(self, pairs: Sequence[QueryPair]) -> list[PreferenceRecord]:
        records: list[PreferenceRecord] = []
        # stragglers answered since the previous session
        while True:
            try:
                records.append(self.service.mailbox.get_nowait()[1])
            except queue.Empty:
                break
        to_enqueue = list(self.service.take_expired_pairs()) + list(pairs)
        outstanding = {
            self.service.enqueue_query(p).query_id for p in to_enqueue
        }
        deadline = self.service.clock() + self.timeout
        while outstanding:
            remaining = deadline - self.service.clock()
            if remaining <= 0:
                self.deferred_sessions += 1
                break
            try:
                qid, record = self.service.mailbox.get(timeout=min(remaining, 0.25))
            except queue.Empty:
                continue
            records.append(record)
            outstanding.discard(qid)
        return records
