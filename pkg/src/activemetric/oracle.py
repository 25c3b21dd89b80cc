"""Relative-comparison queries and the label-based answer rules."""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, NamedTuple, Optional

import numpy as np


class Answer(str, Enum):
    YES = "yes"
    NO = "no"
    DK = "dk"


# Integer codes used by the vectorized truth table.
YES_CODE, NO_CODE, DK_CODE = 0, 1, 2
_CODE_TO_ANSWER = {YES_CODE: Answer.YES, NO_CODE: Answer.NO, DK_CODE: Answer.DK}


class Triplet(NamedTuple):
    """Query "is instance i more similar to j than to k?" over view-local indices."""

    i: int
    j: int
    k: int


def validate_triplet(t: Triplet, n: int) -> None:
    if not (0 <= t.i < n and 0 <= t.j < n and 0 <= t.k < n):
        raise ValueError(f"triplet {t} outside view of size {n}")
    if t.i == t.j or t.i == t.k or t.j == t.k:
        raise ValueError(f"triplet {t} has repeated indices")


def simulated_answer(
    labels: np.ndarray,
    t: Triplet,
    noise_rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> Answer:
    """Answer a triplet from hidden class labels.

    yes when y_i = y_j != y_k, no when y_i = y_k != y_j, dk otherwise, so
    yes(i, j, k) and no(i, k, j) are the same statement and a "no" really
    does mean the anchor sits with x_k. With noise_rate > 0 a yes/no answer
    is flipped to its opposite with that probability (dk answers are never
    perturbed); the flip consumes exactly one draw from `rng`, so replay is
    position-deterministic.
    """
    if labels is None:
        raise ValueError("missing labels for simulated oracle")
    yi, yj, yk = int(labels[t.i]), int(labels[t.j]), int(labels[t.k])
    if yi == yj != yk:
        answer = Answer.YES
    elif yi == yk != yj:
        answer = Answer.NO
    else:
        return Answer.DK
    if noise_rate > 0.0:
        if rng is None:
            raise ValueError("noise_rate > 0 requires an rng")
        if rng.random() < noise_rate:
            answer = Answer.NO if answer is Answer.YES else Answer.YES
    return answer


class AnswerTable:
    """Deterministic answer for every class-label configuration (y_i, y_j, y_k).

    Stored as a C x C x C integer code array so pool scoring can mask joint
    label configurations without Python-level loops.
    """

    def __init__(self, num_classes: int):
        if num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        c = np.arange(num_classes)
        yi = c[:, None, None]
        yj = c[None, :, None]
        yk = c[None, None, :]
        codes = np.full((num_classes,) * 3, DK_CODE, dtype=np.int8)
        codes[(yi == yj) & (yi != yk)] = YES_CODE
        codes[(yi == yk) & (yi != yj)] = NO_CODE
        self.num_classes = num_classes
        self.codes = codes
        self.codes.setflags(write=False)

    def lookup(self, yi: int, yj: int, yk: int) -> Answer:
        return _CODE_TO_ANSWER[int(self.codes[yi, yj, yk])]


def enumerate_answer_table(num_classes: int) -> dict[tuple[int, int, int], Answer]:
    """Full C^3 truth table consistent with the noiseless simulated oracle."""
    table = AnswerTable(num_classes)
    out = {}
    for yi in range(num_classes):
        for yj in range(num_classes):
            for yk in range(num_classes):
                out[(yi, yj, yk)] = table.lookup(yi, yj, yk)
    return out


@dataclass(frozen=True)
class TripletRecord:
    triplet: Triplet
    answer: Answer
    source: str
    ts: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "i": self.triplet.i,
                "j": self.triplet.j,
                "k": self.triplet.k,
                "answer": self.answer.value,
                "source": self.source,
                "ts": self.ts,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "TripletRecord":
        obj = json.loads(line)
        return cls(
            triplet=Triplet(int(obj["i"]), int(obj["j"]), int(obj["k"])),
            answer=Answer(obj["answer"]),
            source=str(obj["source"]),
            ts=float(obj["ts"]),
        )


class LabeledTripletSet:
    """Append-only log of answered queries; the learner's constraint source.

    The same ordered triplet may appear at most once. The mirrored query
    (i, k, j) is a different triplet and may be present alongside (i, j, k).
    """

    def __init__(self):
        self._entries: list[TripletRecord] = []
        self._seen: set[Triplet] = set()

    def add(
        self,
        triplet: Triplet,
        answer: Answer,
        source: str = "simulated",
        ts: float = 0.0,
    ) -> TripletRecord:
        triplet = Triplet(*map(int, triplet))
        if triplet in self._seen:
            raise ValueError(f"duplicate triplet {triplet}")
        rec = TripletRecord(triplet, Answer(answer), source, float(ts))
        self._entries.append(rec)
        self._seen.add(triplet)
        return rec

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[TripletRecord]:
        return iter(self._entries)

    def __contains__(self, triplet: Triplet) -> bool:
        return triplet in self._seen

    @property
    def triplets(self) -> frozenset[Triplet]:
        return frozenset(self._seen)

    def yes_no_pairs(self) -> list[tuple[Triplet, Answer]]:
        """Constraints usable by the metric learner (dk entries carry none)."""
        return [
            (rec.triplet, rec.answer)
            for rec in self._entries
            if rec.answer is not Answer.DK
        ]

    def instances(self) -> set[int]:
        used: set[int] = set()
        for rec in self._entries:
            used.update(rec.triplet)
        return used

    def count(self, answer: Answer) -> int:
        return sum(1 for rec in self._entries if rec.answer is answer)

    def copy(self) -> "LabeledTripletSet":
        dup = LabeledTripletSet()
        dup._entries = list(self._entries)
        dup._seen = set(self._seen)
        return dup
