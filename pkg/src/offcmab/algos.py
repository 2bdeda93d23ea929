"""Pessimistic offline algorithms and baselines.

Offline learners follow the scikit-learn estimator convention: constructor
takes hyperparameters, ``fit`` consumes a dataset and sets ``action_`` and
``diagnostics_``. The online streaming cache learner is stateful and driven
one round at a time.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .core import (
    Action,
    ArmStats,
    ConfidenceParams,
    Dataset,
    aggregate,
    lcb,
    ucb,
    variance_adaptive_interval,
)
from .envs import CacheDataset
from .oracles import WeightedGraph, greedy_im, top_k

__all__ = [
    "CLCB",
    "CLCBCascade",
    "CLCBLLMStd",
    "CLCBLLMC",
    "CUCBOffline",
    "EMP",
    "LFU",
    "LEC",
    "CLCBIMN",
    "CUCBLLMStream",
    "ALGORITHM_IDS",
    "make_algorithm",
]


class _OfflineEstimator(BaseEstimator):
    """Shared fit plumbing: aggregate counters, weight arms, call the oracle."""

    def fit(self, dataset: Dataset, y=None):
        if len(dataset) == 0:
            raise ValueError("dataset must be non-empty")
        stats = aggregate(dataset)
        weights = self._weights(stats, len(dataset))
        self.action_ = self._solve(weights)
        self.diagnostics_ = {
            "weights": weights,
            "counts": stats.counts,
            "means": stats.means,
        }
        return self

    def _weights(self, stats: ArmStats, n: int) -> np.ndarray:
        raise NotImplementedError

    def _solve(self, weights: np.ndarray) -> Action:
        raise NotImplementedError


class CLCB(_OfflineEstimator):
    """Lower-confidence-bound pipeline with a caller-supplied oracle.

    Unobserved arms get a -inf weight, so the oracle can never prefer them
    over any observed arm.
    """

    def __init__(
        self,
        oracle: Callable[[np.ndarray], Action],
        delta: float = 0.05,
        log_arg_multiplier: float = 4.0,
    ):
        self.oracle = oracle
        self.delta = delta
        self.log_arg_multiplier = log_arg_multiplier

    def _weights(self, stats: ArmStats, n: int) -> np.ndarray:
        params = ConfidenceParams(
            delta=self.delta, n=n, m=stats.m, log_arg_multiplier=self.log_arg_multiplier
        )
        return lcb(stats, params)

    def _solve(self, weights: np.ndarray) -> Action:
        return self.oracle(weights)


class CUCBOffline(CLCB):
    """Optimistic counterpart of the LCB pipeline (baseline)."""

    def _weights(self, stats: ArmStats, n: int) -> np.ndarray:
        params = ConfidenceParams(
            delta=self.delta, n=n, m=stats.m, log_arg_multiplier=self.log_arg_multiplier
        )
        return ucb(stats, params, form="hoeffding")


class EMP(_OfflineEstimator):
    """Plain empirical-mean baseline; unobserved arms default to 0."""

    def __init__(self, oracle: Callable[[np.ndarray], Action], unobserved_value: float = 0.0):
        self.oracle = oracle
        self.unobserved_value = unobserved_value

    def _weights(self, stats: ArmStats, n: int) -> np.ndarray:
        return np.where(stats.counts > 0, np.nan_to_num(stats.means), self.unobserved_value)

    def _solve(self, weights: np.ndarray) -> Action:
        return self.oracle(weights)


class CLCBCascade(_OfflineEstimator):
    """LCB pipeline specialized to ranked lists: top-K by LCB, emitted in
    descending-LCB order. Uses the tighter log multiplier of 2."""

    def __init__(self, K: int, delta: float = 0.05, log_arg_multiplier: float = 2.0):
        self.K = K
        self.delta = delta
        self.log_arg_multiplier = log_arg_multiplier

    def _weights(self, stats: ArmStats, n: int) -> np.ndarray:
        params = ConfidenceParams(
            delta=self.delta, n=n, m=stats.m, log_arg_multiplier=self.log_arg_multiplier
        )
        return lcb(stats, params)

    def _solve(self, weights: np.ndarray) -> Action:
        chosen = top_k(weights, self.K, "max").members
        ordered = sorted(chosen, key=lambda i: (-weights[i], i))
        return Action.of_list(ordered)


def _cache_counters(dataset: CacheDataset):
    m = dataset.m
    n_arrive = np.zeros(m, dtype=np.int64)
    n_cost = np.zeros(m, dtype=np.int64)
    cost_sum = np.zeros(m)
    for r in dataset.records:
        n_arrive[r.query] += 1
        if r.cost is not None:
            n_cost[r.query] += 1
            cost_sum[r.query] += r.cost
    with np.errstate(invalid="ignore"):
        c_hat = np.where(n_cost > 0, cost_sum / np.maximum(n_cost, 1), 0.0)
    return n_arrive, n_cost, c_hat


def _cost_ucb(c_hat, n_cost, log_term):
    with np.errstate(divide="ignore"):
        radius = np.where(n_cost > 0, np.sqrt(2.0 * log_term / np.maximum(n_cost, 1)), np.inf)
    return np.where(n_cost > 0, c_hat + radius, np.inf)


class CLCBLLMStd(BaseEstimator):
    """Cache selection by top-k of UCB(p) * UCB(c).

    Never-missed queries have an infinite cost UCB and are cached eagerly
    whenever capacity allows.
    """

    def __init__(self, k: int, delta: float = 0.05, log_arg_multiplier: float = 4.0):
        self.k = k
        self.delta = delta
        self.log_arg_multiplier = log_arg_multiplier

    def fit(self, dataset: CacheDataset, y=None):
        n, m = len(dataset), dataset.m
        if n == 0:
            raise ValueError("dataset must be non-empty")
        n_arrive, n_cost, c_hat = _cache_counters(dataset)
        log_term = math.log(self.log_arg_multiplier * m * n / self.delta)
        p_hat = n_arrive / n
        p_bar = p_hat + math.sqrt(2.0 * log_term / n)
        c_bar = _cost_ucb(c_hat, n_cost, log_term)
        weights = p_bar * c_bar
        self.action_ = top_k(weights, self.k, "max")
        self.diagnostics_ = {
            "weights": weights,
            "p_hat": p_hat,
            "p_bar": p_bar,
            "c_hat": c_hat,
            "c_bar": c_bar,
            "n_arrive": n_arrive,
            "n_cost": n_cost,
        }
        return self


class CLCBLLMC(BaseEstimator):
    """Cache selection by top-k of empirical p-hat times cost UCB.

    A query that never arrived has p-hat = 0 and an infinite cost UCB; its
    weight is defined as 0 (it is empirically irrelevant), unlike the
    standard variant where the arrival bonus keeps the product infinite.
    """

    def __init__(self, k: int, delta: float = 0.05, log_arg_multiplier: float = 4.0):
        self.k = k
        self.delta = delta
        self.log_arg_multiplier = log_arg_multiplier

    def fit(self, dataset: CacheDataset, y=None):
        n, m = len(dataset), dataset.m
        if n == 0:
            raise ValueError("dataset must be non-empty")
        n_arrive, n_cost, c_hat = _cache_counters(dataset)
        log_term = math.log(self.log_arg_multiplier * m * n / self.delta)
        p_hat = n_arrive / n
        c_bar = _cost_ucb(c_hat, n_cost, log_term)
        with np.errstate(invalid="ignore"):
            weights = np.where(p_hat > 0, p_hat * c_bar, 0.0)
        self.action_ = top_k(weights, self.k, "max")
        self.diagnostics_ = {
            "weights": weights,
            "p_hat": p_hat,
            "c_hat": c_hat,
            "c_bar": c_bar,
            "n_arrive": n_arrive,
            "n_cost": n_cost,
        }
        return self


class LFU(BaseEstimator):
    """Cache the k most frequently arriving queries."""

    def __init__(self, k: int):
        self.k = k

    def fit(self, dataset: CacheDataset, y=None):
        n_arrive, _, _ = _cache_counters(dataset)
        self.action_ = top_k(n_arrive.astype(float), self.k, "max")
        self.diagnostics_ = {"weights": n_arrive.astype(float), "n_arrive": n_arrive}
        return self


class LEC(BaseEstimator):
    """Cache the k queries with the highest empirical expected cost
    p-hat(q) * c-hat(q); unobserved costs count as 0."""

    def __init__(self, k: int):
        self.k = k

    def fit(self, dataset: CacheDataset, y=None):
        n = len(dataset)
        if n == 0:
            raise ValueError("dataset must be non-empty")
        n_arrive, n_cost, c_hat = _cache_counters(dataset)
        weights = (n_arrive / n) * c_hat
        self.action_ = top_k(weights, self.k, "max")
        self.diagnostics_ = {"weights": weights, "c_hat": c_hat, "n_arrive": n_arrive}
        return self


class CLCBIMN(BaseEstimator):
    """Seed selection from node-level cascades via per-edge LCBs.

    Only the seed set and the first diffusion step of each cascade are used.
    Per edge (u, v), intermediate bounds on the seed probability of u and the
    one-step non-activation probabilities of v are combined into a clipped
    edge-weight LCB, then a greedy IM oracle runs on the LCB graph.
    """

    def __init__(
        self,
        edges: Sequence[tuple[int, int]],
        n_nodes: int,
        k: int,
        delta: float = 0.05,
        mc_per_eval: int = 1000,
        oracle_seed: int = 0,
        exact_oracle: bool = False,
    ):
        self.edges = edges
        self.n_nodes = n_nodes
        self.k = k
        self.delta = delta
        self.mc_per_eval = mc_per_eval
        self.oracle_seed = oracle_seed
        self.exact_oracle = exact_oracle

    def edge_lcbs(self, cascades: np.ndarray) -> np.ndarray:
        n = cascades.shape[0]
        E = len(self.edges)
        s0 = cascades[:, 0]
        s1 = cascades[:, 1]
        delta_prime = self.delta / (12 * n * E)
        lcbs = np.empty(E)
        for e, (u, v) in enumerate(self.edges):
            n0_u = int(s0[:, u].sum())
            n0_not_u = n - n0_u
            n1_not_v = int((~s1[:, v]).sum())
            n1_not_u_not_v = int((~s0[:, u] & ~s1[:, v]).sum())
            q_hat = n0_u / n
            p_hat_not_v = n1_not_v / n
            q_bar = min(q_hat + variance_adaptive_interval(q_hat, n, delta_prime), 1.0)
            p_bar_not_v = min(
                p_hat_not_v + variance_adaptive_interval(p_hat_not_v, n, delta_prime), 1.0
            )
            if n0_not_u == 0:
                lcbs[e] = 0.0
                continue
            p_hat_cond = n1_not_u_not_v / n0_not_u
            p_lcb_cond = max(
                p_hat_cond - variance_adaptive_interval(p_hat_cond, n0_not_u, delta_prime),
                0.0,
            )
            if p_lcb_cond <= 0.0 or q_bar <= 0.0:
                lcbs[e] = 0.0
                continue
            lcbs[e] = min(1.0, max(0.0, (1.0 - p_bar_not_v / p_lcb_cond) / q_bar))
        return lcbs

    def fit(self, cascades: np.ndarray, y=None):
        lcbs = self.edge_lcbs(np.asarray(cascades, dtype=bool))
        lcb_graph = WeightedGraph(
            self.n_nodes, tuple((u, v, float(w)) for (u, v), w in zip(self.edges, lcbs))
        )
        self.action_ = greedy_im(
            lcb_graph,
            self.k,
            mc_per_eval=self.mc_per_eval,
            seed=self.oracle_seed,
            exact=self.exact_oracle,
        )
        self.diagnostics_ = {"edge_lcbs": lcbs}
        self.lcb_graph_ = lcb_graph
        return self


class CUCBLLMStream:
    """Online streaming cache with single-slot replacement.

    Maintains arrival frequencies and a cost LCB per query; on a miss the
    arriving query fills spare capacity or replaces the cached query with
    the smallest p-hat * cost-LCB weight when its own weight is at least as
    large (ties replace).

    The cost LCB of a query is only refreshed when that query misses; the
    radius of every other query is left at its last computed value, which is
    what keeps the cache equal to the global top-k of the maintained weights
    after every round.
    """

    def __init__(self, m: int, k: int):
        self.m = m
        self.k = k
        self.t = 0
        self.cache: set[int] = set()
        self.n_arrive = np.zeros(m, dtype=np.int64)
        self.n_cost = np.zeros(m, dtype=np.int64)
        self.c_hat = np.zeros(m)
        self.c_lcb = np.zeros(m)

    @property
    def p_hat(self) -> np.ndarray:
        return self.n_arrive / max(self.t, 1)

    @property
    def weights(self) -> np.ndarray:
        return self.p_hat * self.c_lcb

    def step(self, query: int, cost: float | None) -> bool:
        """Process one arrival; ``cost`` is consumed only on a miss.

        Returns True on a hit.
        """
        self.t += 1
        self.n_arrive[query] += 1
        if query in self.cache:
            return True
        if cost is None:
            raise ValueError("a miss requires an observed cost")
        self.n_cost[query] += 1
        self.c_hat[query] += (cost - self.c_hat[query]) / self.n_cost[query]
        radius = math.sqrt(6.0 * math.log(self.t) / self.n_cost[query])
        self.c_lcb[query] = max(self.c_hat[query] - radius, 0.0)
        if len(self.cache) < self.k:
            self.cache.add(query)
        elif self.k > 0:
            w = self.weights
            q_min = min(self.cache, key=lambda q: (w[q], q))
            if w[q_min] <= w[query]:
                self.cache.discard(q_min)
                self.cache.add(query)
        return False

    def run(self, instance, T: int, seed: int) -> np.ndarray:
        """Drive the learner against a cache environment for T rounds;
        returns the per-round exact regret trace."""
        from .core import Action
        from .envs import cache_cost_exact

        rng = np.random.default_rng(seed)
        p = np.asarray(instance.p)
        optimal = cache_cost_exact(instance, instance.optimal_cache())
        regret = np.empty(T)
        for t in range(T):
            regret[t] = (
                cache_cost_exact(instance, Action.of_set(self.cache)) - optimal
            )
            q = int(rng.choice(instance.m, p=p))
            cost = None if q in self.cache else instance.sample_cost(q, rng)
            self.step(q, cost)
        return regret


ALGORITHM_IDS = (
    "clcb",
    "clcb-cascade",
    "clcb-llm-std",
    "clcb-llm-c",
    "cucb-llm-s",
    "clcb-im-n",
    "cucb-offline",
    "emp",
    "lfu",
    "lec",
)


def make_algorithm(alg_id: str, **kwargs):
    """Instantiate an algorithm by its stable string identifier."""
    table = {
        "clcb": CLCB,
        "clcb-cascade": CLCBCascade,
        "clcb-llm-std": CLCBLLMStd,
        "clcb-llm-c": CLCBLLMC,
        "cucb-llm-s": CUCBLLMStream,
        "clcb-im-n": CLCBIMN,
        "cucb-offline": CUCBOffline,
        "emp": EMP,
        "lfu": LFU,
        "lec": LEC,
    }
    if alg_id not in table:
        raise ValueError(f"unknown algorithm id {alg_id!r}")
    return table[alg_id](**kwargs)
