"""Resumable labeling sessions: loop state, append-only log, crash-safe replay."""
from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .dataset import Dataset, split as make_split, standardize
from .forest import ClassProbs, ForestParams
from .metric import LearnerParams, MetricWeights
from .oracle import Answer, LabeledTripletSet, Triplet, TripletRecord
from .selection import (
    ActiveLoop,
    SelectionParams,
    SimulatedOracle,
    bootstrap_candidate,
)

SCHEMA_VERSION = 1

HEADER_FILE = "session.json"
ANSWERS_FILE = "answers.jsonl"
METRIC_FILE = "metric.json"

AWAITING = "awaiting_answer"
COMPUTING = "computing"
DONE = "done"


class SessionError(RuntimeError):
    pass


class SessionSchemaError(SessionError):
    """Persisted session was written by an incompatible schema version."""


@dataclass(frozen=True)
class SessionConfig:
    budget: int
    seed: int = 0
    oracle: str = "human"  # "human" | "simulated"
    noise_rate: float = 0.0
    test_fraction: float = 0.5
    standardize: bool = True
    pool_factor: int = 100
    epsilon_report: float = 0.001
    learner: LearnerParams = field(default_factory=LearnerParams)
    forest: ForestParams = field(default_factory=ForestParams)

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.oracle not in ("human", "simulated"):
            raise ValueError(f"unknown oracle kind {self.oracle!r}")

    def to_json_dict(self) -> dict:
        return {
            "budget": self.budget,
            "seed": self.seed,
            "oracle": self.oracle,
            "noise_rate": self.noise_rate,
            "test_fraction": self.test_fraction,
            "standardize": self.standardize,
            "pool_factor": self.pool_factor,
            "epsilon_report": self.epsilon_report,
            "learner": asdict(self.learner),
            "forest": asdict(self.forest),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SessionConfig":
        return cls(
            budget=int(obj["budget"]),
            seed=int(obj["seed"]),
            oracle=obj["oracle"],
            noise_rate=float(obj["noise_rate"]),
            test_fraction=float(obj["test_fraction"]),
            standardize=bool(obj["standardize"]),
            pool_factor=int(obj["pool_factor"]),
            epsilon_report=float(obj["epsilon_report"]),
            learner=LearnerParams(**obj["learner"]),
            forest=ForestParams(**obj["forest"]),
        )


def _dataset_to_json(ds: Dataset) -> dict:
    return {
        "features": [[float(v) for v in row] for row in ds.features],
        "ids": list(ds.ids),
        "labels": None if ds.labels is None else [int(v) for v in ds.labels],
        "num_classes": ds.num_classes,
    }


def _dataset_from_json(obj: dict) -> Dataset:
    labels = obj["labels"]
    return Dataset(
        features=np.array(obj["features"], dtype=np.float64),
        ids=tuple(obj["ids"]),
        labels=None if labels is None else np.array(labels, dtype=np.int64),
        num_classes=obj["num_classes"],
    )


class Session:
    """Single-oracle labeling session around one ActiveLoop.

    One writer: submit() is serialized end to end and appends to the
    answers log (fsync) before anything else, so an acknowledged answer
    survives any crash; a restart replays the log through a fresh engine.
    The selection pipeline runs outside the state lock, so readers observe
    a consistent "computing" snapshot while it grinds.
    """

    BOOTSTRAP_TARGET = 2

    def __init__(self, dataset: Dataset, config: SessionConfig, out_dir: Optional[Path] = None):
        if dataset.labels is None and config.oracle == "simulated":
            raise SessionError("simulated oracle needs a labeled dataset")
        if dataset.num_classes is None:
            raise SessionError("sessions need a labeled dataset (class count drives clustering)")
        self.dataset = dataset
        self.config = config
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self._state_lock = threading.RLock()
        self._submit_lock = threading.Lock()

        self.split = make_split(dataset, config.test_fraction, config.seed)
        data = standardize(dataset, self.split) if config.standardize else dataset
        self.train = data.view(self.split.train_indices)

        self._oracle = (
            SimulatedOracle(self.train.labels, config.noise_rate, seed=config.seed)
            if config.oracle == "simulated"
            else None
        )
        self.labeled = LabeledTripletSet()
        self.loop: Optional[ActiveLoop] = None
        self.phase = "bootstrap"
        self.status = COMPUTING
        self.pending: Optional[Triplet] = None
        self.pending_score: Optional[float] = None
        self._bootstrap_attempt = 0
        self._bootstrap_yes_no = 0
        self._applied = 0  # answers applied through submit/replay (= log lines)

    # -- construction -------------------------------------------------------

    @classmethod
    def create(cls, dataset: Dataset, config: SessionConfig, out_dir: str | Path) -> "Session":
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        header = out / HEADER_FILE
        if header.exists():
            raise SessionError(f"{header} already exists; use load_session to resume")
        sess = cls(dataset, config, out)
        payload = {
            "schema_version": SCHEMA_VERSION,
            "created_ts": time.time(),
            "config": config.to_json_dict(),
            "dataset": _dataset_to_json(dataset),
        }
        tmp = header.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload, sort_keys=True))
        os.replace(tmp, header)
        (out / ANSWERS_FILE).touch()
        sess._advance()
        sess._write_metric_snapshot()
        return sess

    @classmethod
    def load(cls, out_dir: str | Path) -> "Session":
        out = Path(out_dir)
        header_path = out / HEADER_FILE
        if not header_path.exists():
            raise SessionError(f"no {HEADER_FILE} in {out}")
        try:
            header = json.loads(header_path.read_text())
        except json.JSONDecodeError as exc:
            raise SessionError(f"corrupt session header: {exc}") from exc
        version = header.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SessionSchemaError(f"session schema {version} != supported {SCHEMA_VERSION}")
        config = SessionConfig.from_json_dict(header["config"])
        dataset = _dataset_from_json(header["dataset"])

        records = []
        answers_path = out / ANSWERS_FILE
        if answers_path.exists():
            with open(answers_path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        records.append(TripletRecord.from_json(line))
                    except (json.JSONDecodeError, KeyError, ValueError) as exc:
                        raise SessionError(
                            f"{answers_path}:{lineno}: truncated or corrupt record: {exc}"
                        ) from exc

        sess = cls(dataset, config, out)
        sess._advance()
        for rec in records:
            if sess.status == DONE:
                raise SessionError("answer log continues past session completion")
            if rec.triplet != sess.pending:
                raise SessionError(
                    f"log replay diverged: recorded {rec.triplet}, engine expected {sess.pending}"
                )
            sess._apply_answer(rec.answer, rec.source, rec.ts)
            sess._advance()
        sess._write_metric_snapshot()
        return sess

    # -- accounting ---------------------------------------------------------

    @property
    def budget(self) -> int:
        return self.config.budget

    @property
    def budget_used(self) -> int:
        """Spent queries: every human answer counts; simulated bootstrap
        rejections are free, so only loop queries count there."""
        if self.config.oracle == "human":
            return self._applied
        return self.loop.queries_made if self.loop is not None else 0

    @property
    def remaining(self) -> int:
        return max(0, self.budget - self.budget_used)

    # -- engine -------------------------------------------------------------

    def _advance(self):
        """Compute the next pending query, or finish. Heavy; runs unlocked."""
        if self.remaining == 0:
            self._finish()
            return
        if self.phase == "bootstrap":
            if self.config.oracle == "simulated":
                self._bootstrap_simulated()
            else:
                nxt = self._next_bootstrap_candidate()
                with self._state_lock:
                    self.pending = nxt
                    self.pending_score = None
                    self.status = AWAITING
                return
        if self.loop.done:
            self._finish()
            return
        t, score = self.loop.next_query()
        with self._state_lock:
            self.pending = t
            self.pending_score = score
            self.status = AWAITING

    def _next_bootstrap_candidate(self) -> Triplet:
        while True:
            t = bootstrap_candidate(len(self.train), self.config.seed, self._bootstrap_attempt)
            if t not in self.labeled:
                return t
            self._bootstrap_attempt += 1

    def _bootstrap_simulated(self):
        """Free rejection sampling: dk draws are neither kept nor logged."""
        while self._bootstrap_yes_no < self.BOOTSTRAP_TARGET:
            t = self._next_bootstrap_candidate()
            self._bootstrap_attempt += 1
            a = self._oracle(t)
            if a is Answer.DK:
                continue
            self.labeled.add(t, a, source="simulated", ts=0.0)
            self._bootstrap_yes_no += 1
        self._enter_active_phase()

    def _enter_active_phase(self):
        self.phase = "active"
        params = SelectionParams(
            pool_factor=self.config.pool_factor,
            epsilon_report=self.config.epsilon_report,
            budget=max(1, self.remaining),
            seed=self.config.seed,
        )
        self.loop = ActiveLoop(
            self.train,
            self.train.num_classes,
            params,
            learner=self.config.learner,
            forest=self.config.forest,
            policy="info",
            initial_labeled=self.labeled,
        )
        self.labeled = self.loop.labeled  # single source of truth from here on

    def _finish(self):
        if self.loop is not None:
            self.loop.ensure_metric()
        with self._state_lock:
            self.pending = None
            self.pending_score = None
            self.status = DONE

    def _apply_answer(self, answer: Answer, source: str, ts: float):
        """Fold one answer for the pending query into the engine state."""
        t = self.pending
        if self.phase == "bootstrap":
            self._bootstrap_attempt += 1
            self.labeled.add(t, answer, source=source, ts=ts)
            self._applied += 1
            if answer is not Answer.DK:
                self._bootstrap_yes_no += 1
            if self._bootstrap_yes_no >= self.BOOTSTRAP_TARGET and self.remaining > 0:
                self._enter_active_phase()
        else:
            self.loop.next_query()  # cached; aligns the loop's pending with ours
            self.loop.record(t, answer, source=source, ts=ts)
            self._applied += 1
        self.pending = None
        self.pending_score = None

    # -- public surface ------------------------------------------------------

    @property
    def weights(self) -> MetricWeights:
        if self.loop is not None:
            return self.loop.weights
        return MetricWeights.identity(self.train.dim)

    @property
    def class_probs(self) -> ClassProbs:
        if self.loop is not None:
            return self.loop.class_probs
        return ClassProbs.uniform(len(self.train), self.train.num_classes)

    def status_payload(self) -> dict:
        with self._state_lock:
            return {
                "status": self.status,
                "phase": self.phase,
                "budget": self.budget,
                "budget_used": self.budget_used,
                "remaining": self.remaining,
                "query_id": self._applied if self.status == AWAITING else None,
            }

    def query_payload(self) -> dict:
        with self._state_lock:
            if self.status == DONE:
                return {
                    "type": "done",
                    "budget": self.budget,
                    "budget_used": self.budget_used,
                    "weights": self.weights.to_list(),
                }
            if self.status != AWAITING or self.pending is None:
                return {"type": "computing"}
            t = self.pending
            cp = self.class_probs.probs
            feats = self.train.features
            ids = self.train.ids
            roles = ("anchor", "option_a", "option_b")
            instances = [
                {
                    "role": role,
                    "index": int(idx),
                    "id": ids[idx],
                    "features": [float(v) for v in feats[idx]],
                    "class_probs": [float(v) for v in cp[idx]],
                }
                for role, idx in zip(roles, t)
            ]
            return {
                "type": "query",
                "query_id": self._applied,
                "phase": self.phase,
                "budget": self.budget,
                "budget_used": self.budget_used,
                "remaining": self.remaining,
                "triplet": {"i": t.i, "j": t.j, "k": t.k},
                "instances": instances,
                "scatter": self._scatter_payload(t),
            }

    def _scatter_payload(self, t: Triplet) -> dict:
        w = self.weights.w
        order = np.argsort(-w, kind="stable")
        dims = [int(order[0]), int(order[1] if len(w) > 1 else order[0])]
        feats = self.train.features
        return {
            "dims": dims,
            "xs": [float(v) for v in feats[:, dims[0]]],
            "ys": [float(v) for v in feats[:, dims[1]]],
            "ids": list(self.train.ids),
            "highlight": [t.i, t.j, t.k],
        }

    def history_payload(self) -> dict:
        with self._state_lock:
            return {
                "entries": [
                    {
                        "i": rec.triplet.i,
                        "j": rec.triplet.j,
                        "k": rec.triplet.k,
                        "answer": rec.answer.value,
                        "source": rec.source,
                        "ts": rec.ts,
                    }
                    for rec in self.labeled
                ],
                "budget_used": self.budget_used,
            }

    def metric_payload(self) -> dict:
        with self._state_lock:
            w = self.weights.w
            order = np.argsort(-w, kind="stable")
            return {
                "weights": self.weights.to_list(),
                "top_dims": [int(order[0]), int(order[1] if len(w) > 1 else order[0])],
            }

    def submit(self, answer: str, query_id: Optional[int] = None, source: str = "human") -> dict:
        """Record one answer for the pending query; persisted before the ack.

        query_id (when supplied) must equal the id served with the query, so
        a stale or double-clicked client submission is rejected without any
        state change.
        """
        with self._submit_lock:
            with self._state_lock:
                if self.status == DONE:
                    raise SessionError("session is complete")
                if self.status != AWAITING or self.pending is None:
                    raise SessionError("no pending query (still computing)")
                try:
                    ans = Answer(answer)
                except ValueError:
                    raise SessionError(f"invalid answer {answer!r}") from None
                if query_id is not None and query_id != self._applied:
                    raise SessionError(
                        f"stale submission: query_id {query_id} != pending {self._applied}"
                    )
                ts = time.time()
                rec = TripletRecord(self.pending, ans, source, ts)
                self._persist_record(rec)
                self._apply_answer(ans, source, ts)
                self.status = COMPUTING
            self._advance()  # heavy: outside the state lock
            self._write_metric_snapshot()
            with self._state_lock:
                return {
                    "recorded": {
                        "i": rec.triplet.i,
                        "j": rec.triplet.j,
                        "k": rec.triplet.k,
                        "answer": ans.value,
                    },
                    "status": self.status,
                    "budget_used": self.budget_used,
                    "remaining": self.remaining,
                }

    def run_simulated(self) -> None:
        """Drive a simulated-oracle session to completion, logging answers."""
        if self._oracle is None:
            raise SessionError("not a simulated session")
        while self.status == AWAITING:
            t = self.pending
            a = self._oracle(t)
            self.submit(a.value, source="simulated")

    # -- persistence ---------------------------------------------------------

    def _persist_record(self, rec: TripletRecord):
        if self.out_dir is None:
            return
        path = self.out_dir / ANSWERS_FILE
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(rec.to_json() + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _write_metric_snapshot(self):
        if self.out_dir is None:
            return
        path = self.out_dir / METRIC_FILE
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps({"weights": self.weights.to_list()}, sort_keys=True))
        os.replace(tmp, path)


def save_session(session: Session, out_dir: str | Path) -> Path:
    """Persist the header and answer log of a session into a directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = out / HEADER_FILE
    payload = {
        "schema_version": SCHEMA_VERSION,
        "created_ts": time.time(),
        "config": session.config.to_json_dict(),
        "dataset": _dataset_to_json(session.dataset),
    }
    tmp = header.with_suffix(".tmp")
    tmp.write_text(json.dumps(payload, sort_keys=True))
    os.replace(tmp, header)
    # only answers that went through submit() belong in the log; with a
    # simulated oracle the bootstrap pair is re-derived on load, not replayed
    skip_bootstrap = session.config.oracle == "simulated"
    with open(out / ANSWERS_FILE, "w", encoding="utf-8") as fh:
        for n, rec in enumerate(session.labeled):
            if skip_bootstrap and n < Session.BOOTSTRAP_TARGET:
                continue
            fh.write(rec.to_json() + "\n")
        fh.flush()
        os.fsync(fh.fileno())
    session.out_dir = out
    session._write_metric_snapshot()
    return out


def load_session(out_dir: str | Path) -> Session:
    return Session.load(out_dir)
