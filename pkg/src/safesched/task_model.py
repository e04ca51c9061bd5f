"""Task systems: hard/soft tasks with computation, deadline and inter-arrival data."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from .distributions import FiniteDistribution, epsilon_close, to_fraction


class Kind(enum.Enum):
    HARD = "hard"
    SOFT = "soft"


@dataclass(frozen=True)
class Task:
    computation: FiniteDistribution
    deadline: int
    arrival: FiniteDistribution
    kind: Kind
    miss_cost: Fraction = Fraction(0)

    @property
    def hard(self) -> bool:
        return self.kind is Kind.HARD

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind.value}
        if not self.hard:
            out["cost"] = str(self.miss_cost)
        out["computation"] = self.computation.to_json()
        out["deadline"] = self.deadline
        out["arrival"] = self.arrival.to_json()
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "Task":
        kind = Kind(obj["kind"])
        cost = to_fraction(obj.get("cost", 0)) if kind is Kind.SOFT else Fraction(0)
        return cls(
            computation=FiniteDistribution.from_json(obj["computation"]),
            deadline=int(obj["deadline"]),
            arrival=FiniteDistribution.from_json(obj["arrival"]),
            kind=kind,
            miss_cost=cost,
        )


@dataclass(frozen=True)
class Violation:
    task: int  # 0-based
    kind: str
    detail: str

    def __str__(self) -> str:
        return f"task {self.task + 1}: {self.kind} ({self.detail})"


@dataclass(frozen=True)
class TaskStructure:
    computation_domain: tuple[int, ...]
    deadline: int
    arrival_domain: tuple[int, ...]
    kind: Kind


@dataclass(frozen=True)
class TaskSystem:
    tasks: tuple[Task, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))

    def __len__(self) -> int:
        return len(self.tasks)

    @property
    def hard(self) -> tuple[int, ...]:
        return tuple(i for i, t in enumerate(self.tasks) if t.hard)

    @property
    def soft(self) -> tuple[int, ...]:
        return tuple(i for i, t in enumerate(self.tasks) if not t.hard)

    @property
    def c_max(self) -> int:
        return max(t.computation.support[-1] for t in self.tasks)

    @property
    def a_max(self) -> int:
        return max(t.arrival.support[-1] for t in self.tasks)

    @property
    def d_max(self) -> int:
        return max(t.deadline for t in self.tasks)

    @property
    def arrival_domain_max(self) -> int:
        """max_i |Dom(A_i)|, the quantity written as a blackboard D in the bounds."""
        return max(len(t.arrival) for t in self.tasks)

    @property
    def domain_max(self) -> int:
        """Largest support size over every computation and arrival distribution."""
        return max(len(d) for d in self.distributions())

    def distributions(self) -> list[FiniteDistribution]:
        return [d for t in self.tasks for d in (t.computation, t.arrival)]

    @property
    def pi_max(self) -> Fraction:
        return max(d.max_probability for d in self.distributions())

    @property
    def pi_min_task(self) -> Fraction:
        return min(d.min_probability for d in self.distributions())

    @property
    def max_cost(self) -> Fraction:
        return max((t.miss_cost for t in self.tasks if not t.hard), default=Fraction(0))

    def with_tasks(self, tasks: Sequence[Task]) -> "TaskSystem":
        return TaskSystem(tuple(tasks), name=self.name)

    def scale_costs(self, factor: Fraction) -> "TaskSystem":
        from dataclasses import replace

        return self.with_tasks([replace(t, miss_cost=t.miss_cost * factor) for t in self.tasks])

    # serialisation
    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"tasks": [t.to_json() for t in self.tasks]}
        if self.name:
            out["name"] = self.name
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def from_json(cls, obj: dict[str, Any], name: str = "") -> "TaskSystem":
        return cls(tuple(Task.from_json(t) for t in obj["tasks"]), name=obj.get("name", name))

    @classmethod
    def load(cls, path: str | Path) -> "TaskSystem":
        path = Path(path)
        return cls.from_json(json.loads(path.read_text()), name=path.stem)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps() + "\n")


def validate(sys: TaskSystem) -> list[Violation]:
    out: list[Violation] = []
    if len(sys.tasks) == 0:
        out.append(Violation(-1, "EmptyTaskSystem", "no tasks"))
    for i, t in enumerate(sys.tasks):
        c_max = t.computation.support[-1]
        a_min = t.arrival.support[0]
        if t.computation.support[0] < 1:
            out.append(Violation(i, "ZeroComputationTime", "computation times must be >= 1"))
        if c_max > t.deadline:
            out.append(Violation(i, "ComputationExceedsDeadline", f"{c_max} > {t.deadline}"))
        if t.deadline > a_min:
            out.append(Violation(i, "DeadlineExceedsMinArrival", f"{t.deadline} > {a_min}"))
        if t.deadline < 1:
            out.append(Violation(i, "NonPositiveDeadline", f"deadline {t.deadline}"))
        if t.hard and t.miss_cost != 0:
            out.append(Violation(i, "HardTaskWithCost", f"cost {t.miss_cost}"))
        if not t.hard and t.miss_cost < 0:
            out.append(Violation(i, "NegativeCost", f"cost {t.miss_cost}"))
    return out


def structure(sys: TaskSystem) -> tuple[TaskStructure, ...]:
    return tuple(
        TaskStructure(t.computation.support, t.deadline, t.arrival.support, t.kind) for t in sys.tasks
    )


def systems_epsilon_close(a: TaskSystem, b: TaskSystem, eps) -> bool:
    if structure(a) != structure(b):
        return False
    return all(
        epsilon_close(ta.computation, tb.computation, eps) and epsilon_close(ta.arrival, tb.arrival, eps)
        for ta, tb in zip(a.tasks, b.tasks)
    )


def max_deviation(a: TaskSystem, b: TaskSystem) -> Fraction:
    """Largest pointwise probability gap across all paired distributions.

    Points missing from one side count with probability 0 there.
    """
    worst = Fraction(0)
    for ta, tb in zip(a.tasks, b.tasks):
        for p, q in ((ta.computation, tb.computation), (ta.arrival, tb.arrival)):
            for k in set(p.support) | set(q.support):
                worst = max(worst, abs(p(k) - q(k)))
    return worst
