"""Core domain types for offline combinatorial bandits with triggered arms.

This module owns the pieces every other layer consumes: actions and offline
records, per-arm sufficient statistics, Hoeffding / variance-adaptive
confidence radii, and the data-coverage report that quantifies how well a
collection distribution covers the optimal action.

All operations here are pure functions of their inputs; nothing mutates
shared state, so values can be freely shared across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "Action",
    "OfflineRecord",
    "Dataset",
    "ArmStats",
    "ConfidenceParams",
    "CoverageReport",
    "SmoothnessSpec",
    "MalformedRecordError",
    "InfeasibleActionError",
    "aggregate",
    "lcb",
    "ucb",
    "variance_adaptive_interval",
    "coverage_report",
    "read_dataset_jsonl",
    "write_dataset_jsonl",
]


class MalformedRecordError(ValueError):
    """Raised when an offline record violates the dataset contract."""


class InfeasibleActionError(ValueError):
    """Raised when an action is not feasible in the owning environment."""


@dataclass(frozen=True)
class Action:
    """A combinatorial action: an unordered set or an ordered list of arms.

    Set-kind actions are canonicalized to sorted member order so two sets
    with the same members compare equal.
    """

    kind: str
    members: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.kind not in ("set", "list"):
            raise ValueError(f"unknown action kind {self.kind!r}")
        if len(set(self.members)) != len(self.members):
            raise ValueError("action members must be distinct")
        if self.kind == "set":
            object.__setattr__(self, "members", tuple(sorted(self.members)))

    @staticmethod
    def of_set(members: Iterable[int]) -> "Action":
        return Action("set", tuple(int(i) for i in members))

    @staticmethod
    def of_list(members: Iterable[int]) -> "Action":
        return Action("list", tuple(int(i) for i in members))

    def __contains__(self, arm: int) -> bool:
        return arm in self.members

    def __len__(self) -> int:
        return len(self.members)

    def to_json(self) -> dict:
        return {"kind": self.kind, "members": list(self.members)}

    @staticmethod
    def from_json(obj: Mapping) -> "Action":
        return Action(str(obj["kind"]), tuple(int(i) for i in obj["members"]))


@dataclass(frozen=True)
class OfflineRecord:
    """One logged interaction: the action played, which arms revealed an
    outcome, and the observed values (domain exactly the triggered set)."""

    action: Action
    triggered: frozenset[int]
    outcomes: Mapping[int, float]

    def validate(self, m: int, index: int | None = None) -> None:
        where = "" if index is None else f" (record {index})"
        if set(self.outcomes) != set(self.triggered):
            raise MalformedRecordError(
                f"outcome keys must equal the triggered set{where}"
            )
        for arm, value in self.outcomes.items():
            if not (0 <= arm < m):
                raise MalformedRecordError(f"arm {arm} out of range{where}")
            if not (0.0 <= value <= 1.0):
                raise MalformedRecordError(
                    f"outcome {value} for arm {arm} outside [0,1]{where}"
                )
        for arm in self.action.members:
            if not (0 <= arm < m):
                raise MalformedRecordError(f"arm {arm} out of range{where}")


@dataclass
class Dataset:
    """A sequence of offline records over ``m`` base arms."""

    records: list[OfflineRecord]
    m: int

    def __len__(self) -> int:
        return len(self.records)

    def validate(self) -> None:
        for t, record in enumerate(self.records):
            record.validate(self.m, index=t)


@dataclass
class ArmStats:
    """Per-arm counters and empirical means.

    ``means`` is NaN wherever the counter is zero; estimation code must treat
    unobserved arms through the +/-inf sentinels, never as mean zero.
    """

    counts: np.ndarray
    sums: np.ndarray

    @property
    def m(self) -> int:
        return len(self.counts)

    @property
    def means(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.where(self.counts > 0, self.sums / np.maximum(self.counts, 1), np.nan)


@dataclass(frozen=True)
class ConfidenceParams:
    """Parameters of the Hoeffding-style confidence radius.

    ``log_arg_multiplier`` is the constant inside the log term; different
    algorithm variants pin different defaults (4 for the generic pipeline,
    2 for the cascading specialization).
    """

    delta: float
    n: int
    m: int
    log_arg_multiplier: float = 4.0

    def __post_init__(self) -> None:
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must be in (0,1)")
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be >= 1")
        if self.log_arg_multiplier <= 0:
            raise ValueError("log_arg_multiplier must be positive")

    @property
    def log_term(self) -> float:
        return math.log(self.log_arg_multiplier * self.m * self.n / self.delta)


@dataclass(frozen=True)
class SmoothnessSpec:
    """Reward smoothness coefficient and oracle approximation ratio."""

    b1: float
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if self.b1 <= 0:
            raise ValueError("b1 must be positive")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must be in (0,1]")


@dataclass
class CoverageReport:
    """Triggering probabilities under the optimal action and the collection
    distribution, plus the derived coverage coefficients.

    ``c_inf`` / ``c_one`` are +inf when some arm is needed by the optimal
    action but never observed under the collection distribution. Arms with
    ``p_opt == 0`` contribute nothing. Standard errors are zero where the
    probabilities came from closed forms rather than Monte Carlo.
    """

    p_opt: np.ndarray
    p_data: np.ndarray
    c_inf: float
    c_one: float
    k_bar: float
    k_bar_2: float
    c_inf_arm: int
    p_opt_se: np.ndarray = field(default=None)  # type: ignore[assignment]
    p_data_se: np.ndarray = field(default=None)  # type: ignore[assignment]

    def to_json(self) -> dict:
        return {
            "p_opt": self.p_opt.tolist(),
            "p_data": self.p_data.tolist(),
            "c_inf": self.c_inf,
            "c_one": self.c_one,
            "k_bar": self.k_bar,
            "k_bar_2": self.k_bar_2,
            "c_inf_arm": self.c_inf_arm,
            "p_opt_se": self.p_opt_se.tolist(),
            "p_data_se": self.p_data_se.tolist(),
        }


def aggregate(dataset: Dataset) -> ArmStats:
    """Single-pass counters and empirical means over an offline dataset.

    Rejects malformed records (outcome key outside the triggered set, value
    outside [0,1]) with the offending record index.
    """
    counts = np.zeros(dataset.m, dtype=np.int64)
    sums = np.zeros(dataset.m, dtype=np.float64)
    for t, record in enumerate(dataset.records):
        record.validate(dataset.m, index=t)
        for arm, value in record.outcomes.items():
            counts[arm] += 1
            sums[arm] += value
    return ArmStats(counts=counts, sums=sums)


def _hoeffding_radius(counts: np.ndarray, params: ConfidenceParams) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(
            counts > 0,
            np.sqrt(params.log_term / (2.0 * np.maximum(counts, 1))),
            np.inf,
        )


def _cost_radius(counts: np.ndarray, params: ConfidenceParams) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(
            counts > 0,
            np.sqrt(2.0 * params.log_term / np.maximum(counts, 1)),
            np.inf,
        )


def lcb(stats: ArmStats, params: ConfidenceParams) -> np.ndarray:
    """Per-arm lower confidence bounds; -inf for unobserved arms.

    Values are deliberately not clipped to [0,1]: the oracles are monotone,
    so rank order is unaffected, and clipping would hide how pessimistic an
    estimate is.
    """
    radius = _hoeffding_radius(stats.counts, params)
    means = np.where(stats.counts > 0, stats.means, 0.0)
    return np.where(stats.counts > 0, means - radius, -np.inf)


def ucb(stats: ArmStats, params: ConfidenceParams, form: str = "hoeffding") -> np.ndarray:
    """Per-arm upper confidence bounds; +inf for unobserved arms.

    ``form="hoeffding"`` uses the radius symmetric to :func:`lcb`;
    ``form="cost"`` uses the wider sqrt(2 log(...) / N) radius of the cache
    algorithms.
    """
    if form == "hoeffding":
        radius = _hoeffding_radius(stats.counts, params)
    elif form == "cost":
        radius = _cost_radius(stats.counts, params)
    else:
        raise ValueError(f"unknown radius form {form!r}")
    means = np.where(stats.counts > 0, stats.means, 0.0)
    return np.where(stats.counts > 0, means + radius, np.inf)


def variance_adaptive_interval(p_hat: float, count: int, delta: float) -> float:
    """Bernstein-style radius sqrt(6 p(1-p) log(1/d)/N) + 9 log(1/d)/N.

    Returns +inf when ``count`` is zero. The caller supplies the already
    union-bounded failure probability.
    """
    if not (0.0 <= p_hat <= 1.0):
        raise ValueError("p_hat must be in [0,1]")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must be in (0,1)")
    if count <= 0:
        return math.inf
    log_term = math.log(1.0 / delta)
    return math.sqrt(6.0 * p_hat * (1.0 - p_hat) * log_term / count) + 9.0 * log_term / count


def _mc_trigger_probs(sample_one, mc_samples: int, rng: np.random.Generator, m: int):
    hits = np.zeros(m, dtype=np.float64)
    for _ in range(mc_samples):
        triggered = sample_one(rng)
        hits[list(triggered)] += 1.0
    p = hits / mc_samples
    se = np.sqrt(p * (1.0 - p) / mc_samples)
    return p, se


def coverage_report(
    env,
    data_dist,
    s_star: Action,
    mc_samples: int = 100_000,
    seed: int = 0,
) -> CoverageReport:
    """Estimate the coverage coefficients of a collection distribution.

    ``env`` must expose ``m_arms``, ``feasible(action)`` and
    ``sample_triggered(action, rng)``; environments with closed-form
    triggering probabilities additionally expose ``exact_trigger_probs``
    (returning None when no closed form exists). ``data_dist`` mirrors this
    with ``exact_trigger_probs(env)`` / ``sample_action(env, rng)``.

    Ties in the c_inf argmax are broken toward the lowest arm id.
    """
    if not env.feasible(s_star):
        raise InfeasibleActionError(f"s_star {s_star} is not feasible")
    m = env.m_arms
    rng = np.random.default_rng(seed)

    p_opt = env.exact_trigger_probs(s_star)
    if p_opt is not None:
        p_opt = np.asarray(p_opt, dtype=np.float64)
        p_opt_se = np.zeros(m)
    else:
        p_opt, p_opt_se = _mc_trigger_probs(
            lambda r: env.sample_triggered(s_star, r), mc_samples, rng, m
        )

    exact_data = getattr(data_dist, "exact_trigger_probs", None)
    p_data = exact_data(env) if exact_data is not None else None
    if p_data is not None:
        p_data = np.asarray(p_data, dtype=np.float64)
        p_data_se = np.zeros(m)
    else:

        def sample_one(r: np.random.Generator):
            action = data_dist.sample_action(env, r)
            return env.sample_triggered(action, r)

        p_data, p_data_se = _mc_trigger_probs(sample_one, mc_samples, rng, m)

    relevant = p_opt > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(relevant, p_opt / np.where(p_data > 0, p_data, np.nan), 0.0)
    ratios = np.where(relevant & (p_data == 0.0), np.inf, ratios)
    if relevant.any():
        c_one = float(np.sum(ratios[relevant]))
        # argmax with lowest-id tie-break
        best = int(np.flatnonzero(relevant)[np.argmax(ratios[relevant])])
        c_inf = float(ratios[best])
    else:
        c_one, c_inf, best = 0.0, 0.0, -1
    return CoverageReport(
        p_opt=p_opt,
        p_data=p_data,
        c_inf=c_inf,
        c_one=c_one,
        k_bar=float(np.sum(p_opt)),
        k_bar_2=float(np.sum(np.sqrt(p_opt))),
        c_inf_arm=best,
        p_opt_se=p_opt_se,
        p_data_se=p_data_se,
    )


def record_to_json(record: OfflineRecord, extra: Mapping | None = None) -> dict:
    obj = {
        "action": record.action.to_json(),
        "triggered": sorted(record.triggered),
        "outcomes": {str(k): float(v) for k, v in sorted(record.outcomes.items())},
    }
    if extra:
        obj.update(extra)
    return obj


def record_from_json(obj: Mapping) -> OfflineRecord:
    return OfflineRecord(
        action=Action.from_json(obj["action"]),
        triggered=frozenset(int(i) for i in obj["triggered"]),
        outcomes={int(k): float(v) for k, v in obj["outcomes"].items()},
    )


def write_dataset_jsonl(dataset: Dataset, fp: IO[str]) -> None:
    """Write one JSON object per line: action, triggered set, outcomes."""
    for record in dataset.records:
        fp.write(json.dumps(record_to_json(record), sort_keys=True))
        fp.write("\n")


def read_dataset_jsonl(fp: IO[str], m: int) -> Dataset:
    records = []
    for line in fp:
        line = line.strip()
        if not line:
            continue
        records.append(record_from_json(json.loads(line)))
    dataset = Dataset(records=records, m=m)
    dataset.validate()
    return dataset
