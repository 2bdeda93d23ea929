"""Ground-truth environments and offline dataset generators.

Four environments are provided: cascading ranking, LLM cache, independent
cascade (IC) graphs with node-level feedback, and the k-path hard instance.
Each exposes exact reward/cost evaluators, the triggering probabilities
needed for coverage computation, and a deterministic seeded generator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterator, Mapping, Sequence

import numpy as np

from .core import Action, Dataset, InfeasibleActionError, OfflineRecord
from .oracles import ExactSpreadEvaluator, WeightedGraph, influence_spread, top_k

__all__ = [
    "CascadingInstance",
    "PositionSampler",
    "CacheInstance",
    "CacheRecord",
    "CacheDataset",
    "AlwaysEmptyCaches",
    "FixedExclusionCaches",
    "IcInstance",
    "KPathInstance",
    "KPathCollection",
    "cascade_reward_exact",
    "cascade_generate",
    "cache_cost_exact",
    "cache_generate",
    "ic_generate",
    "kpath_generate",
    "random_cascading_instance",
    "power_law_cache_instance",
    "instance_from_json",
    "instance_to_json",
    "load_instance",
]

REJECTION_CAP = 10_000


# ---------------------------------------------------------------------------
# Cascading ranking


@dataclass(frozen=True)
class CascadingInstance:
    """m items with purchase probabilities mu and ranked lists of length K."""

    m: int
    mu: tuple[float, ...]
    K: int

    def __post_init__(self) -> None:
        if not (1 <= self.K <= self.m):
            raise ValueError("K must satisfy 1 <= K <= m")
        if len(self.mu) != self.m:
            raise ValueError("mu length must equal m")
        if any(not (0.0 <= x <= 1.0) for x in self.mu):
            raise ValueError("mu values must lie in [0,1]")

    @property
    def m_arms(self) -> int:
        return self.m

    def feasible(self, action: Action) -> bool:
        return (
            action.kind == "list"
            and 1 <= len(action) <= self.K
            and all(0 <= i < self.m for i in action.members)
        )

    def reward(self, action: Action) -> float:
        return cascade_reward_exact(self, action)

    def optimal_action(self) -> Action:
        """Top-K items by true mean, descending (ties toward lowest id)."""
        order = sorted(range(self.m), key=lambda i: (-self.mu[i], i))[: self.K]
        return Action.of_list(order)

    def exact_trigger_probs(self, action: Action) -> np.ndarray:
        """Item i at position j is examined iff no earlier item is bought."""
        probs = np.zeros(self.m)
        survive = 1.0
        for i in action.members:
            probs[i] = survive
            survive *= 1.0 - self.mu[i]
        return probs

    def sample_triggered(self, action: Action, rng: np.random.Generator) -> frozenset[int]:
        triggered = []
        for i in action.members:
            triggered.append(i)
            if rng.random() < self.mu[i]:
                break
        return frozenset(triggered)

    def to_json(self) -> dict:
        return {"type": "cascading", "m": self.m, "mu": list(self.mu), "K": self.K}


@dataclass(frozen=True)
class PositionSampler:
    """Data-collection distribution over ranked lists.

    ``uniform`` draws a uniformly random distinct K-item list. ``positional``
    draws each position j from the column distribution q[:, j], rejecting
    draws with repeated items (capped at 10^4 rejections per list).
    """

    mode: str = "uniform"
    q: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("uniform", "positional"):
            raise ValueError(f"unknown sampler mode {self.mode!r}")
        if self.mode == "positional":
            if self.q is None:
                raise ValueError("positional mode requires the q matrix")
            cols = np.asarray(self.q, dtype=np.float64)
            if (cols < 0).any() or (cols.sum(axis=0) > 1.0 + 1e-9).any():
                raise ValueError("each q column must be a sub-distribution")

    def sample_action(self, env: CascadingInstance, rng: np.random.Generator) -> Action:
        if self.mode == "uniform":
            items = rng.permutation(env.m)[: env.K]
            return Action.of_list(int(i) for i in items)
        cols = np.asarray(self.q, dtype=np.float64)
        for _ in range(REJECTION_CAP):
            items = []
            ok = True
            for j in range(env.K):
                col = cols[:, j]
                total = col.sum()
                residual = 1.0 - total
                u = rng.random()
                if u >= total:
                    ok = False
                    break
                items.append(int(np.searchsorted(np.cumsum(col), u, side="right")))
            if ok and len(set(items)) == len(items):
                return Action.of_list(items)
        raise RuntimeError(f"rejection sampling failed after {REJECTION_CAP} draws")

    def exact_trigger_probs(self, env: CascadingInstance) -> None:
        # triggering under a random list has no closed form; coverage falls
        # back to Monte Carlo
        return None


def cascade_reward_exact(instance: CascadingInstance, action: Action) -> float:
    """r(S) = 1 - prod_{i in S}(1 - mu_i); order-independent."""
    if len(set(action.members)) != len(action.members):
        raise InfeasibleActionError("ranked list has duplicate items")
    prod = 1.0
    for i in action.members:
        prod *= 1.0 - instance.mu[i]
    return 1.0 - prod


def cascade_generate(
    instance: CascadingInstance,
    sampler: PositionSampler,
    n: int,
    seed: int,
) -> Dataset:
    """n cascading records: triggered set is the examined prefix through the
    first purchase, or the whole list when nothing is purchased."""
    rng = np.random.default_rng(seed)
    mu = np.asarray(instance.mu)
    records = []
    for _ in range(n):
        action = sampler.sample_action(instance, rng)
        items = np.array(action.members)
        draws = rng.random(len(items)) < mu[items]
        hit = int(np.argmax(draws)) if draws.any() else len(items) - 1
        prefix = items[: hit + 1]
        outcomes = {int(i): float(x) for i, x in zip(prefix, draws[: hit + 1])}
        records.append(
            OfflineRecord(action=action, triggered=frozenset(outcomes), outcomes=outcomes)
        )
    return Dataset(records=records, m=instance.m)


def random_cascading_instance(m: int, K: int, seed: int) -> CascadingInstance:
    rng = np.random.default_rng(seed)
    return CascadingInstance(m=m, mu=tuple(float(x) for x in rng.random(m)), K=K)


# ---------------------------------------------------------------------------
# LLM cache


@dataclass(frozen=True)
class CacheInstance:
    """m queries with arrival distribution p, mean costs c, cache size k.

    In the bandit view there are 2m base arms: arms [0, m) are the per-query
    costs (observed only on a miss) and arms [m, 2m) are the arrival
    indicators (observed every round).
    """

    m: int
    p: tuple[float, ...]
    c: tuple[float, ...]
    k: int
    noise: str = "bernoulli"
    noise_half_width: float = 0.1

    def __post_init__(self) -> None:
        if len(self.p) != self.m or len(self.c) != self.m:
            raise ValueError("p and c must have length m")
        if not math.isclose(sum(self.p), 1.0, abs_tol=1e-9):
            raise ValueError("arrival probabilities must sum to 1")
        if any(not (0.0 <= x <= 1.0) for x in self.c):
            raise ValueError("costs must lie in [0,1]")
        if not (0 <= self.k <= self.m):
            raise ValueError("cache size must satisfy 0 <= k <= m")
        if self.noise not in ("bernoulli", "none", "uniform"):
            raise ValueError(f"unknown noise spec {self.noise!r}")

    @property
    def m_arms(self) -> int:
        return 2 * self.m

    def feasible(self, action: Action) -> bool:
        return (
            action.kind == "set"
            and len(action) <= self.k
            and all(0 <= q < self.m for q in action.members)
        )

    def optimal_cache(self) -> Action:
        """Top-k queries by true expected saved cost p(q)c(q)."""
        return top_k([p * c for p, c in zip(self.p, self.c)], self.k, "max")

    def expected_cost(self, cache: Action) -> float:
        return cache_cost_exact(self, cache)

    def exact_trigger_probs(self, cache: Action) -> np.ndarray:
        """Cost arm of q triggers with p(q) when q is uncached; arrival arms
        always trigger."""
        probs = np.ones(2 * self.m)
        cached = set(cache.members)
        for q in range(self.m):
            probs[q] = 0.0 if q in cached else self.p[q]
        return probs

    def sample_triggered(self, cache: Action, rng: np.random.Generator) -> frozenset[int]:
        q = int(rng.choice(self.m, p=np.asarray(self.p)))
        arrivals = frozenset(range(self.m, 2 * self.m))
        return arrivals if q in cache else arrivals | {q}

    def sample_cost(self, q: int, rng: np.random.Generator) -> float:
        mean = self.c[q]
        if self.noise == "none":
            return mean
        if self.noise == "bernoulli":
            return float(rng.random() < mean)
        lo = max(0.0, mean - self.noise_half_width)
        hi = min(1.0, mean + self.noise_half_width)
        return float(rng.uniform(lo, hi))

    def to_json(self) -> dict:
        return {
            "type": "cache",
            "m": self.m,
            "p": list(self.p),
            "c": list(self.c),
            "k": self.k,
            "noise": self.noise,
            "noise_half_width": self.noise_half_width,
        }


@dataclass(frozen=True)
class CacheRecord:
    """One logged round: the sampled cache, the arriving query, and the
    observed cost (None on a hit)."""

    cache: frozenset[int]
    query: int
    cost: float | None


@dataclass
class CacheDataset:
    records: list[CacheRecord]
    m: int

    def __len__(self) -> int:
        return len(self.records)


class AlwaysEmptyCaches:
    """The empty-cache collection: every query always misses (nu = 1)."""

    def sample_cache(self, instance: CacheInstance, rng: np.random.Generator) -> frozenset[int]:
        return frozenset()

    def nu(self, instance: CacheInstance) -> np.ndarray:
        return np.ones(instance.m)

    def exact_trigger_probs(self, env: CacheInstance) -> np.ndarray:
        probs = np.ones(2 * env.m)
        probs[: env.m] = np.asarray(env.p) * self.nu(env)
        return probs


class FixedExclusionCaches:
    """Each query is cached independently with probability 1 - nu(q).

    Draws exceeding capacity are thinned uniformly at random, which
    perturbs the marginals; the closed-form triggering probabilities are
    only reported when thinning is impossible.
    """

    def __init__(self, nu: Sequence[float]):
        self._nu = np.asarray(nu, dtype=np.float64)
        if ((self._nu < 0) | (self._nu > 1)).any():
            raise ValueError("nu values must lie in [0,1]")

    def sample_cache(self, instance: CacheInstance, rng: np.random.Generator) -> frozenset[int]:
        included = np.flatnonzero(rng.random(instance.m) >= self._nu)
        if len(included) > instance.k:
            included = rng.choice(included, size=instance.k, replace=False)
        return frozenset(int(q) for q in included)

    def nu(self, instance: CacheInstance) -> np.ndarray:
        return self._nu

    def exact_trigger_probs(self, env: CacheInstance) -> np.ndarray | None:
        if int((self._nu < 1.0).sum()) > env.k:
            return None
        probs = np.ones(2 * env.m)
        probs[: env.m] = np.asarray(env.p) * self._nu
        return probs

    def sample_action(self, env: CacheInstance, rng: np.random.Generator) -> Action:
        return Action.of_set(self.sample_cache(env, rng))


def cache_cost_exact(instance: CacheInstance, cache: Action) -> float:
    """Expected per-round cost sum_{q not cached} p(q)c(q)."""
    if len(cache) > instance.k:
        raise InfeasibleActionError(
            f"cache of size {len(cache)} exceeds capacity {instance.k}"
        )
    cached = set(cache.members)
    return sum(p * c for q, (p, c) in enumerate(zip(instance.p, instance.c)) if q not in cached)


def cache_generate(
    instance: CacheInstance,
    collection,
    n: int,
    seed: int,
) -> CacheDataset:
    """n rounds of (sampled cache, arriving query, cost-on-miss)."""
    rng = np.random.default_rng(seed)
    p = np.asarray(instance.p)
    queries = rng.choice(instance.m, size=n, p=p)
    records = []
    for t in range(n):
        cache = collection.sample_cache(instance, rng)
        q = int(queries[t])
        cost = None if q in cache else instance.sample_cost(q, rng)
        records.append(CacheRecord(cache=cache, query=q, cost=cost))
    return CacheDataset(records=records, m=instance.m)


def power_law_cache_instance(
    m: int,
    k: int,
    alpha: float = 0.9,
    seed: int = 0,
    cost_low: float = 0.1,
    cost_high: float = 0.9,
    noise: str = "bernoulli",
) -> CacheInstance:
    """Arrivals P(q_i) proportional to i^-alpha; mean costs uniform in
    [cost_low, cost_high]."""
    weights = np.arange(1, m + 1, dtype=np.float64) ** (-alpha)
    p = weights / weights.sum()
    rng = np.random.default_rng(seed)
    c = rng.uniform(cost_low, cost_high, size=m)
    return CacheInstance(
        m=m, p=tuple(float(x) for x in p), c=tuple(float(x) for x in c), k=k, noise=noise
    )


def write_cache_dataset_jsonl(dataset: CacheDataset, fp: IO[str]) -> None:
    for r in dataset.records:
        obj = {
            "action": {"kind": "set", "members": sorted(r.cache)},
            "triggered": [] if r.cost is None else [r.query],
            "outcomes": {} if r.cost is None else {str(r.query): r.cost},
            "query": r.query,
            "cost": r.cost,
        }
        fp.write(json.dumps(obj, sort_keys=True))
        fp.write("\n")


def read_cache_dataset_jsonl(fp: IO[str], m: int) -> CacheDataset:
    records = []
    for line in fp:
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        cost = obj["cost"]
        records.append(
            CacheRecord(
                cache=frozenset(int(q) for q in obj["action"]["members"]),
                query=int(obj["query"]),
                cost=None if cost is None else float(cost),
            )
        )
    return CacheDataset(records=records, m=m)


# ---------------------------------------------------------------------------
# Independent cascade with node-level feedback


@dataclass(frozen=True)
class IcInstance:
    """IC diffusion environment with a product seed distribution."""

    graph: WeightedGraph
    seed_probs: tuple[float, ...]
    eta: float | None = None
    gamma: float | None = None

    def __post_init__(self) -> None:
        if len(self.seed_probs) != self.graph.node_count:
            raise ValueError("seed_probs length must equal node count")
        if any(not (0.0 <= q <= 1.0) for q in self.seed_probs):
            raise ValueError("seed probabilities must lie in [0,1]")
        if self.eta is not None and self.gamma is not None:
            ok, reason = self.assumption_holds(self.gamma, self.eta)
            if not ok:
                raise ValueError(f"assumption violated: {reason}")

    @property
    def V(self) -> int:
        return self.graph.node_count

    @property
    def m_arms(self) -> int:
        return self.graph.edge_count

    def feasible(self, action: Action) -> bool:
        return action.kind == "set" and all(0 <= v < self.V for v in action.members)

    def p_not_activated(self, v: int, exclude_seed: int | None = None) -> float:
        """P[v not active after one step], optionally conditioned on a given
        node being absent from the seed set."""
        prob = 1.0 - self.seed_probs[v]
        for u, w, puv in self.graph.edges:
            if w == v and u != exclude_seed:
                prob *= 1.0 - self.seed_probs[u] * puv
        return prob

    def assumption_holds(self, gamma: float, eta: float) -> tuple[bool, str]:
        """Bounded seed probabilities and one-step non-activation for every
        edge (checked for all edges, a superset of the triggerable ones)."""
        for u, v, _ in self.graph.edges:
            if not (gamma <= self.seed_probs[u] <= 1.0 - gamma):
                return False, f"q_{u}={self.seed_probs[u]} outside [{gamma}, {1 - gamma}]"
            if self.p_not_activated(v) < eta:
                return False, f"node {v} one-step non-activation below {eta}"
        return True, ""

    def spread(self, seeds: Action, mc: int = 10_000, seed: int = 0, exact: bool = False) -> float:
        return influence_spread(self.graph, seeds, mc=mc, seed=seed, exact=exact)

    def to_json(self) -> dict:
        return {
            "type": "ic",
            "graph": self.graph.to_json(),
            "seed_probs": list(self.seed_probs),
            "eta": self.eta,
            "gamma": self.gamma,
        }


def ic_generate(instance: IcInstance, n: int, seed: int) -> np.ndarray:
    """n influence cascades as a boolean array of shape (n, V, V).

    cascades[t, h] is the active-node indicator after h diffusion steps;
    rows are padded by repetition once the cascade stabilizes.
    """
    rng = np.random.default_rng(seed)
    V = instance.V
    q = np.asarray(instance.seed_probs)
    active = rng.random((n, V)) < q
    out = np.empty((n, V, V), dtype=bool)
    out[:, 0] = active
    newly = active.copy()
    for h in range(1, V):
        attempt_ok = np.zeros((n, V), dtype=bool)
        for u, v, p in instance.graph.edges:
            fired = newly[:, u] & (rng.random(n) < p)
            attempt_ok[:, v] |= fired
        fresh = attempt_ok & ~active
        active = active | fresh
        newly = fresh
        out[:, h] = active
    return out


def cascades_to_json(cascades: np.ndarray) -> list[list[list[int]]]:
    return [
        [sorted(int(v) for v in np.flatnonzero(step)) for step in record]
        for record in cascades
    ]


def cascades_from_json(obj: Sequence, V: int) -> np.ndarray:
    n = len(obj)
    out = np.zeros((n, V, V), dtype=bool)
    for t, record in enumerate(obj):
        for h, step in enumerate(record):
            out[t, h, list(step)] = True
    return out


# ---------------------------------------------------------------------------
# k-path hard instance


@dataclass(frozen=True)
class KPathInstance:
    """m arms split into m/k paths of fully correlated Bernoulli arms."""

    m: int
    k: int
    path_means: tuple[float, ...]
    collection_probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.m % self.k != 0:
            raise ValueError("m must be a multiple of k")
        n_paths = self.m // self.k
        if len(self.path_means) != n_paths or len(self.collection_probs) != n_paths:
            raise ValueError("need one mean and one collection prob per path")
        if not math.isclose(sum(self.collection_probs), 1.0, abs_tol=1e-9):
            raise ValueError("collection probabilities must sum to 1")

    @property
    def n_paths(self) -> int:
        return self.m // self.k

    @property
    def m_arms(self) -> int:
        return self.m

    def path_arms(self, j: int) -> tuple[int, ...]:
        return tuple(range(j * self.k, (j + 1) * self.k))

    def path_action(self, j: int) -> Action:
        return Action.of_set(self.path_arms(j))

    def path_of(self, action: Action) -> int:
        for j in range(self.n_paths):
            if action.members == self.path_arms(j):
                return j
        raise InfeasibleActionError(f"{action} is not a path")

    def feasible(self, action: Action) -> bool:
        try:
            self.path_of(action)
        except InfeasibleActionError:
            return False
        return True

    def reward(self, action: Action) -> float:
        return self.k * self.path_means[self.path_of(action)]

    def optimal_action(self) -> Action:
        best = max(range(self.n_paths), key=lambda j: (self.path_means[j], -j))
        return self.path_action(best)

    def exact_trigger_probs(self, action: Action) -> np.ndarray:
        probs = np.zeros(self.m)
        probs[list(action.members)] = 1.0
        return probs

    def sample_triggered(self, action: Action, rng: np.random.Generator) -> frozenset[int]:
        return frozenset(action.members)

    @property
    def collection(self) -> "KPathCollection":
        return KPathCollection(self.collection_probs)

    def to_json(self) -> dict:
        return {
            "type": "kpath",
            "m": self.m,
            "k": self.k,
            "path_means": list(self.path_means),
            "collection_probs": list(self.collection_probs),
        }


@dataclass(frozen=True)
class KPathCollection:
    probs: tuple[float, ...]

    def sample_action(self, env: KPathInstance, rng: np.random.Generator) -> Action:
        j = int(rng.choice(env.n_paths, p=np.asarray(self.probs)))
        return env.path_action(j)

    def exact_trigger_probs(self, env: KPathInstance) -> np.ndarray:
        probs = np.empty(env.m)
        for j in range(env.n_paths):
            probs[list(env.path_arms(j))] = self.probs[j]
        return probs


def kpath_generate(instance: KPathInstance, n: int, seed: int) -> Dataset:
    """One coin per record: all k arms of the sampled path share the outcome."""
    rng = np.random.default_rng(seed)
    paths = rng.choice(instance.n_paths, size=n, p=np.asarray(instance.collection_probs))
    coins = rng.random(n)
    records = []
    for j, u in zip(paths, coins):
        arms = instance.path_arms(int(j))
        x = float(u < instance.path_means[int(j)])
        records.append(
            OfflineRecord(
                action=Action.of_set(arms),
                triggered=frozenset(arms),
                outcomes={i: x for i in arms},
            )
        )
    return Dataset(records=records, m=instance.m)


# ---------------------------------------------------------------------------
# Instance (de)serialization


def _resolve_vector(spec, size: int) -> tuple[float, ...]:
    """A vector field is either an explicit list or a distribution spec like
    {"dist": "uniform", "low": 0, "high": 1, "seed": 7}."""
    if isinstance(spec, Mapping):
        if spec["dist"] != "uniform":
            raise ValueError(f"unknown vector distribution {spec['dist']!r}")
        rng = np.random.default_rng(int(spec.get("seed", 0)))
        low = float(spec.get("low", 0.0))
        high = float(spec.get("high", 1.0))
        return tuple(float(x) for x in rng.uniform(low, high, size=size))
    if len(spec) != size:
        raise ValueError(f"expected {size} values, got {len(spec)}")
    return tuple(float(x) for x in spec)


def instance_from_json(obj: Mapping):
    kind = obj["type"]
    if kind == "cascading":
        m = int(obj["m"])
        return CascadingInstance(m=m, mu=_resolve_vector(obj["mu"], m), K=int(obj["K"]))
    if kind == "cache":
        m = int(obj["m"])
        p_spec = obj["p"]
        if isinstance(p_spec, Mapping) and p_spec.get("dist") == "power_law":
            weights = np.arange(1, m + 1, dtype=np.float64) ** (-float(p_spec.get("alpha", 0.9)))
            p = tuple(float(x) for x in weights / weights.sum())
        else:
            p = _resolve_vector(p_spec, m)
        return CacheInstance(
            m=m,
            p=p,
            c=_resolve_vector(obj["c"], m),
            k=int(obj["k"]),
            noise=obj.get("noise", "bernoulli"),
            noise_half_width=float(obj.get("noise_half_width", 0.1)),
        )
    if kind == "ic":
        return IcInstance(
            graph=WeightedGraph.from_json(obj["graph"]),
            seed_probs=tuple(float(x) for x in obj["seed_probs"]),
            eta=obj.get("eta"),
            gamma=obj.get("gamma"),
        )
    if kind == "kpath":
        return KPathInstance(
            m=int(obj["m"]),
            k=int(obj["k"]),
            path_means=tuple(float(x) for x in obj["path_means"]),
            collection_probs=tuple(float(x) for x in obj["collection_probs"]),
        )
    raise ValueError(f"unknown instance type {kind!r}")


def instance_to_json(instance) -> dict:
    return instance.to_json()


def load_instance(path: str):
    with open(path) as fp:
        return instance_from_json(json.load(fp))
