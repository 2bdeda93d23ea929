"""Combinatorial approximation solvers used by the LCB-family algorithms.

Provides heap-based top-k selection, greedy influence maximization with
Monte Carlo or exact spread evaluation, and an exhaustive argmax reference
used by tests and by the harness on small instances.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from typing import IO, Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import Action

__all__ = [
    "WeightedGraph",
    "top_k",
    "greedy_im",
    "influence_spread",
    "ExactSpreadEvaluator",
    "brute_force_best",
]

MAX_BRUTE_FORCE = 10**6
MAX_EXACT_EDGES = 20


@dataclass(frozen=True)
class WeightedGraph:
    """Directed graph with edge success probabilities in [0,1]."""

    node_count: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self) -> None:
        for u, v, p in self.edges:
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise ValueError(f"edge ({u},{v}) out of range")
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"edge weight {p} outside [0,1]")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def out_adjacency(self) -> list[list[tuple[int, float]]]:
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.node_count)]
        for u, v, p in self.edges:
            adj[u].append((v, p))
        return adj

    def reweighted(self, weights: Sequence[float]) -> "WeightedGraph":
        """Same topology with new edge weights, in edge order."""
        if len(weights) != len(self.edges):
            raise ValueError("weight count does not match edge count")
        return WeightedGraph(
            self.node_count,
            tuple((u, v, float(w)) for (u, v, _), w in zip(self.edges, weights)),
        )

    def to_json(self) -> dict:
        return {"nodes": self.node_count, "edges": [[u, v, p] for u, v, p in self.edges]}

    @staticmethod
    def from_json(obj: Mapping) -> "WeightedGraph":
        return WeightedGraph(
            int(obj["nodes"]),
            tuple((int(u), int(v), float(p)) for u, v, p in obj["edges"]),
        )

    def write(self, fp: IO[str]) -> None:
        json.dump(self.to_json(), fp)

    @staticmethod
    def read(fp: IO[str]) -> "WeightedGraph":
        return WeightedGraph.from_json(json.load(fp))


def top_k(weights: Sequence[float], k: int, direction: str = "max") -> Action:
    """Select the k extremal-weight arms; ties broken by lowest arm id.

    Runs in O(m log k) via a bounded heap. Sentinel +/-inf values are
    ordered like any other real.
    """
    m = len(weights)
    if k > m:
        raise ValueError(f"k={k} exceeds arm count m={m}")
    if direction == "max":
        keyed = ((-float(w), i) for i, w in enumerate(weights))
    elif direction == "min":
        keyed = ((float(w), i) for i, w in enumerate(weights))
    else:
        raise ValueError(f"unknown direction {direction!r}")
    chosen = heapq.nsmallest(k, keyed)
    return Action.of_set(i for _, i in chosen)


def _simulate_ic(
    adj: list[list[tuple[int, float]]],
    seeds: Iterable[int],
    rng: np.random.Generator,
) -> int:
    active = set(seeds)
    frontier = list(active)
    while frontier:
        fresh = []
        for u in frontier:
            for v, p in adj[u]:
                if v not in active and rng.random() < p:
                    active.add(v)
                    fresh.append(v)
        frontier = fresh
    return len(active)


class ExactSpreadEvaluator:
    """Exact IC spread by enumerating live-edge worlds.

    Precomputes, for every world, the per-node reachability bitmask; spread
    queries then cost one pass over the worlds. Edges with weight 0 or 1 are
    collapsed out of the enumeration, so the guard applies to the remaining
    random edges only.
    """

    def __init__(self, graph: WeightedGraph):
        random_edges = [(u, v, p) for u, v, p in graph.edges if 0.0 < p < 1.0]
        if len(random_edges) > MAX_EXACT_EDGES:
            raise ValueError(
                f"{len(random_edges)} random edges exceed the exact-enumeration "
                f"limit of {MAX_EXACT_EDGES}"
            )
        self.graph = graph
        sure = [(u, v) for u, v, p in graph.edges if p == 1.0]
        V = graph.node_count
        self.probs: list[float] = []
        self.reach: list[list[int]] = []
        for world in range(1 << len(random_edges)):
            prob = 1.0
            live = list(sure)
            for j, (u, v, p) in enumerate(random_edges):
                if world >> j & 1:
                    prob *= p
                    live.append((u, v))
                else:
                    prob *= 1.0 - p
            adj: list[list[int]] = [[] for _ in range(V)]
            for u, v in live:
                adj[u].append(v)
            masks = [0] * V
            for s in range(V):
                seen = 1 << s
                stack = [s]
                while stack:
                    u = stack.pop()
                    for v in adj[u]:
                        if not seen >> v & 1:
                            seen |= 1 << v
                            stack.append(v)
                masks[s] = seen
            self.probs.append(prob)
            self.reach.append(masks)

    def spread(self, seeds: Iterable[int]) -> float:
        seeds = list(seeds)
        if not seeds:
            return 0.0
        total = 0.0
        for prob, masks in zip(self.probs, self.reach):
            reached = 0
            for s in seeds:
                reached |= masks[s]
            total += prob * reached.bit_count()
        return total


def influence_spread(
    graph: WeightedGraph,
    seeds: Action,
    mc: int = 1000,
    seed: int = 0,
    exact: bool = False,
) -> float:
    """Expected activated-set size under IC diffusion from ``seeds``.

    Monte Carlo by default; ``exact=True`` enumerates live-edge worlds
    (feasible for graphs with at most 20 random edges).
    """
    for s in seeds.members:
        if not (0 <= s < graph.node_count):
            raise ValueError(f"seed {s} outside node range")
    if not seeds.members:
        return 0.0
    if exact:
        return ExactSpreadEvaluator(graph).spread(seeds.members)
    adj = graph.out_adjacency()
    rng = np.random.default_rng(seed)
    return sum(_simulate_ic(adj, seeds.members, rng) for _ in range(mc)) / mc


def greedy_im(
    graph: WeightedGraph,
    k: int,
    mc_per_eval: int = 1000,
    seed: int = 0,
    exact: bool = False,
) -> Action:
    """Greedy hill-climbing seed selection for influence maximization.

    Adds the node with the largest estimated marginal spread gain each step
    (ties toward the lowest node id). With Monte Carlo evaluation the ratio
    is 1 - 1/e up to simulation error; with exact evaluation it is 1 - 1/e.
    """
    if k > graph.node_count:
        raise ValueError(f"k={k} exceeds node count {graph.node_count}")
    evaluator = ExactSpreadEvaluator(graph) if exact else None
    adj = graph.out_adjacency()
    chosen: list[int] = []
    for step in range(k):
        best_node, best_gain = -1, -math.inf
        for v in range(graph.node_count):
            if v in chosen:
                continue
            candidate = chosen + [v]
            if evaluator is not None:
                value = evaluator.spread(candidate)
            else:
                # fresh generator per candidate keeps the result independent
                # of evaluation order
                rng = np.random.default_rng(np.random.SeedSequence((seed, step, v)))
                value = sum(
                    _simulate_ic(adj, candidate, rng) for _ in range(mc_per_eval)
                ) / mc_per_eval
            if value > best_gain:
                best_node, best_gain = v, value
        chosen.append(best_node)
    return Action.of_set(chosen)


def brute_force_best(
    reward: Callable[..., float],
    feasible: Iterable[Action],
    weights: Sequence[float] | None = None,
    limit: int = MAX_BRUTE_FORCE,
) -> Action:
    """Exhaustive argmax of ``reward`` over ``feasible`` actions.

    ``reward`` receives (action, weights) when weights are given, else just
    the action. Ties go to the lexicographically smallest member tuple.
    Refuses feasible sets larger than ``limit``.
    """
    best_action: Action | None = None
    best_value = -math.inf
    count = 0
    for action in feasible:
        count += 1
        if count > limit:
            raise ValueError(f"feasible set exceeds {limit} actions")
        value = reward(action, weights) if weights is not None else reward(action)
        if value > best_value or (
            value == best_value
            and best_action is not None
            and action.members < best_action.members
        ):
            best_action, best_value = action, value
    if best_action is None:
        raise ValueError("feasible set is empty")
    return best_action
