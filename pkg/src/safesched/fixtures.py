"""Bundled task systems.

``example1`` and ``example2`` are small hand-checkable systems. The others
are desk-scale benchmark systems named by their task mix (4S, 5S, simple,
1H2S, 1H3S, 2H1S). Their distributions were chosen
here; soft costs of the systems that carry an optimal mean-cost reference were
then scaled by one rational factor so that the optimum matches it. The
factor, the raw optimum and the calibrated optimum are stored in each
file's ``notes``.
"""

from __future__ import annotations

import json
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .distributions import FiniteDistribution
from .task_model import Kind, Task, TaskSystem

# target optimal expected mean-cost for the benchmark systems that have one
REFERENCE_OPTIMUM = {"4S": 0.38, "simple": 0.0, "1H2S": 0.07, "1H3S": 0.28, "2H1S": 0.0}

NAMES = ("example1", "example2", "4S", "5S", "simple", "1H2S", "1H3S", "2H1S")
BENCHMARK_NAMES = ("4S", "5S", "simple", "1H2S", "1H3S", "2H1S")


def _t(kind: str, c, d: int, a, cost=0) -> Task:
    return Task(FiniteDistribution(c), d, FiniteDistribution(a), Kind(kind), Fraction(cost))


def _h(c, d, a) -> Task:
    return _t("hard", c, d, a)


def _s(c, d, a, cost) -> Task:
    return _t("soft", c, d, a, cost)


half = "1/2"


def base_system(name: str) -> TaskSystem:
    """Uncalibrated definition of a benchmark fixture."""
    rows = {
        "4S": [
            _s({1: half, 2: half}, 3, {4: half, 5: half}, 1),
            _s({1: "3/10", 2: "7/10"}, 3, {4: 1}, 2),
            _s({1: "3/5", 2: "2/5"}, 2, {3: half, 4: half}, 1),
            _s({1: 1}, 2, {3: half, 5: half}, 3),
        ],
        "5S": [
            _s({1: half, 2: half}, 3, {4: 1}, 1),
            _s({1: 1}, 3, {4: 1}, 2),
            _s({1: "3/5", 2: "2/5"}, 2, {3: half, 4: half}, 1),
            _s({1: 1}, 2, {3: 1}, 3),
            _s({1: 1}, 2, {6: 1}, 1),
        ],
        # one hard and two soft tasks, every arrival Dirac
        "simple": [
            _h({1: 1}, 2, {4: 1}),
            _s({1: half, 2: half}, 3, {4: 1}, 1),
            _s({1: 1}, 4, {4: 1}, 1),
        ],
        "1H2S": [
            _h({1: half, 2: half}, 2, {4: 1}),
            _s({1: half, 2: half}, 3, {4: half, 5: half}, 1),
            _s({1: 1}, 2, {3: half, 4: half}, 1),
        ],
        "1H3S": [
            _h({1: half, 2: half}, 2, {4: 1}),
            _s({1: half, 2: half}, 3, {4: half, 5: half}, 1),
            _s({1: 1}, 2, {3: half, 4: half}, 1),
            _s({1: 1}, 3, {5: half, 6: half}, 2),
        ],
        # two unit hard jobs can be released together with deadlines 2 and 3:
        # any non-hard choice in the wrong tick misses one of them
        "2H1S": [
            _h({1: 1}, 2, {3: half, 4: half}),
            _h({1: 1}, 3, {4: half, 5: half}),
            _s({1: 1}, 3, {4: half, 6: half}, 1),
        ],
    }
    return TaskSystem(tuple(rows[name]), name=name)


def calibrate(sys: TaskSystem, target: float, max_den: int = 1000):
    """Scale soft costs so the optimal gain hits ``target``.

    Returns (calibrated system, scale, raw gain, calibrated gain). Systems
    whose raw optimum is (numerically) zero are returned unscaled.
    """
    from .mdp import build_explicit
    from .mean_cost import optimize_mean_cost
    from .safety import safe_region

    raw = optimize_mean_cost(safe_region(build_explicit(sys))).gain
    if raw < 1e-6 or target == 0:
        return sys, Fraction(1), raw, raw
    scale = Fraction(target / raw).limit_denominator(max_den)
    out = sys.scale_costs(scale)
    gain = optimize_mean_cost(safe_region(build_explicit(out))).gain
    return out, scale, raw, gain


def regenerate(out_dir: str | Path) -> dict[str, dict]:
    """Rebuild the benchmark fixture files; returns their notes."""
    out_dir = Path(out_dir)
    notes_all = {}
    for name in BENCHMARK_NAMES:
        sys = base_system(name)
        notes: dict = {}
        if name in REFERENCE_OPTIMUM:
            target = REFERENCE_OPTIMUM[name]
            sys, scale, raw, gain = calibrate(sys, target)
            notes = {
                "reference_optimum": target,
                "raw_optimum": round(raw, 9),
                "cost_scale": str(scale),
                "calibrated_optimum": round(gain, 9),
            }
        else:
            notes = {"reference_optimum": None}
        obj = sys.to_json()
        obj["name"] = name
        obj["notes"] = notes
        (out_dir / f"{name}.json").write_text(json.dumps(obj, indent=2) + "\n")
        notes_all[name] = notes
    return notes_all


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("safesched") / "data" / f"{name}.json"))


def load_fixture(name: str) -> TaskSystem:
    if name not in NAMES:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(NAMES)}")
    sys = TaskSystem.load(fixture_path(name))
    return TaskSystem(sys.tasks, name=name)


def fixture_notes(name: str) -> dict:
    return json.loads(fixture_path(name).read_text()).get("notes", {})


def hard_fixtures() -> list[str]:
    return [n for n in NAMES if load_fixture(n).hard]
