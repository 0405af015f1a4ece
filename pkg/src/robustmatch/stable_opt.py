"""Optimal stable matchings under departure risk, via rotation weights and min-cut.

Eliminating a rotation changes the objective by an amount that depends only
on the rotation's own members, not on the stable matching it is eliminated
from.  Summing those changes along any elimination chain means the objective
of the matching reached by a closed rotation subset S is

    psi(men-optimal) + sum of W(rho) over rho in S,

so minimizing psi over stable matchings is a maximum-weight-closed-subset
problem on the rotation digraph with node weights -W(rho).  That closure
problem reduces to a minimum s-t cut: negative-weight nodes hang off the
source, positive ones feed the sink, precedence edges get a surrogate
infinite capacity, and the optimal closed subset is read off the cut.

Max-flow runs on integers (capacities are cleared by their common
denominator first), so results are exact and termination is unconditional.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Hashable, Iterable, Mapping

from .errors import InternalError, ValidationError
from .lattice import Rotation, RotationDigraph
from .model import Instance, LeaveDistribution, Matching, PHI, is_stable, remove_agent
from .objective import (
    ConventionPair,
    CostFrame,
    ObjectiveParams,
    psi_breakdown,
)

SOURCE = "s"
SINK = "t"


@dataclass(frozen=True)
class WeightedRotationDigraph:
    """Rotation digraph with node weight -W(rho) attached to each rotation."""

    digraph: RotationDigraph
    node_weight: tuple[Fraction, ...]

    def cost_change(self, index: int) -> Fraction:
        """W(rho): the change in psi caused by eliminating rotation `index`."""
        return -self.node_weight[index]


@dataclass(frozen=True)
class FlowNetwork:
    """Capacitated s-t network; internal edges carry `surrogate_infinity`.

    The surrogate exceeds the sum of all terminal capacities, so no minimum
    cut can ever use an internal edge.
    """

    nodes: tuple[Hashable, ...]
    edges: tuple[tuple[Hashable, Hashable, Fraction], ...]
    surrogate_infinity: Fraction


def _rotation_weight_scaled(frame: CostFrame, rotation: Rotation) -> int:
    """W(rho) times frame.scale, as an integer."""
    moves = [
        (frame.index[agent], frame.index[old], frame.index[new])
        for agent, old, new in rotation.moves()
    ]
    u, v = frame.u, frame.v
    total = 0
    for _, li, weight, row in frame.leavers:
        acc = 0
        for ai, oldi, newi in moves:
            if ai == li:
                continue
            d_old = frame.displayed(ai, oldi, li, frame.cost_self)
            d_new = frame.displayed(ai, newi, li, frame.cost_self)
            term = u * (d_new * d_new - d_old * d_old)
            if v != u:
                r_old = frame.displayed(ai, oldi, li, frame.regret_self)
                r_new = frame.displayed(ai, newi, li, frame.regret_self)
                b = row[ai]  # type: ignore[index]
                term += (v - u) * ((r_new - b) ** 2 - (r_old - b) ** 2)
            acc += term
        total += weight * acc
    return total


def rotation_weight(instance: Instance, rotation: Rotation, params: ObjectiveParams) -> Fraction:
    """W(rho) = psi(mu after eliminating rho) - psi(mu), for any mu exposing rho."""
    frame = CostFrame.from_params(instance, params)
    return frame.fraction(_rotation_weight_scaled(frame, rotation))


def weigh_rotations(digraph: RotationDigraph, frame: CostFrame) -> WeightedRotationDigraph:
    weights = tuple(
        -frame.fraction(_rotation_weight_scaled(frame, rot)) for rot in digraph.rotations
    )
    return WeightedRotationDigraph(digraph, weights)


def build_flow_network(weighted: WeightedRotationDigraph) -> FlowNetwork:
    """The closure network: s feeds negative nodes, positive nodes feed t."""
    surrogate = 1 + sum((abs(x) for x in weighted.node_weight), Fraction(0))
    edges: list[tuple[Hashable, Hashable, Fraction]] = []
    for a, b in sorted(weighted.digraph.edges):
        edges.append((a, b, surrogate))
    for i, x in enumerate(weighted.node_weight):
        if x < 0:
            edges.append((SOURCE, i, -x))
        elif x > 0:
            edges.append((i, SINK, x))
    nodes = (SOURCE, SINK) + tuple(range(len(weighted.node_weight)))
    return FlowNetwork(nodes, tuple(edges), surrogate)


def max_flow_min_cut(
    network: FlowNetwork,
) -> tuple[Fraction, tuple[tuple[Hashable, Hashable], ...], frozenset]:
    """Dinic's algorithm on integer-cleared capacities.

    Returns the maximum flow value, the minimum cut induced by the nodes
    reachable from s in the final residual network, and that node set.
    """
    index = {node: k for k, node in enumerate(network.nodes)}
    if len(index) != len(network.nodes):
        raise ValidationError("duplicate node in flow network")
    if SOURCE not in index or SINK not in index:
        raise ValidationError("flow network must contain 's' and 't'")
    scale = lcm(1, *(Fraction(c).denominator for _, _, c in network.edges))

    n = len(network.nodes)
    to: list[int] = []
    cap: list[int] = []
    adj: list[list[int]] = [[] for _ in range(n)]
    for u_label, v_label, c in network.edges:
        c = Fraction(c)
        if c < 0:
            raise ValidationError("negative capacity")
        if u_label == v_label:
            raise ValidationError("self-loop in flow network")
        u, v = index[u_label], index[v_label]
        adj[u].append(len(to))
        to.append(v)
        cap.append(int(c * scale))
        adj[v].append(len(to))
        to.append(u)
        cap.append(0)

    s, t = index[SOURCE], index[SINK]
    total = 0
    while True:
        level = [-1] * n
        level[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for e in adj[u]:
                if cap[e] > 0 and level[to[e]] < 0:
                    level[to[e]] = level[u] + 1
                    queue.append(to[e])
        if level[t] < 0:
            break
        ptr = [0] * n
        while True:
            path: list[int] = []
            u = s
            stuck = False
            while u != t:
                moved = False
                while ptr[u] < len(adj[u]):
                    e = adj[u][ptr[u]]
                    if cap[e] > 0 and level[to[e]] == level[u] + 1:
                        path.append(e)
                        u = to[e]
                        moved = True
                        break
                    ptr[u] += 1
                if moved:
                    continue
                if u == s:
                    stuck = True
                    break
                level[u] = -1
                e = path.pop()
                u = to[e ^ 1]
                ptr[u] += 1
            if stuck:
                break
            bottleneck = min(cap[e] for e in path)
            for e in path:
                cap[e] -= bottleneck
                cap[e ^ 1] += bottleneck
            total += bottleneck

    side = {s}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        for e in adj[u]:
            if cap[e] > 0 and to[e] not in side:
                side.add(to[e])
                queue.append(to[e])
    source_side = frozenset(
        label for label, k in index.items() if k in side
    )
    cut = []
    for k, (u_label, v_label, c) in enumerate(network.edges):
        if Fraction(c) > 0 and u_label in source_side and v_label not in source_side:
            if cap[2 * k] != 0:
                raise InternalError("crossing edge of the minimum cut is unsaturated")
            cut.append((u_label, v_label))
    return Fraction(total, scale), tuple(cut), source_side


def extract_optimal_closed_subset(
    weighted: WeightedRotationDigraph,
    cut: Iterable[tuple[Hashable, Hashable]],
) -> frozenset[Rotation]:
    """Positive nodes with uncut sink edges, plus everything that reaches them."""
    cut_set = set(cut)
    chosen: set[int] = set()
    stack = [
        i
        for i, x in enumerate(weighted.node_weight)
        if x > 0 and (i, SINK) not in cut_set
    ]
    while stack:
        i = stack.pop()
        if i in chosen:
            continue
        chosen.add(i)
        stack.extend(weighted.digraph.predecessors[i])
    return frozenset(weighted.digraph.rotations[i] for i in chosen)


def _optimal_subset(digraph: RotationDigraph, frame: CostFrame) -> tuple[
    WeightedRotationDigraph, frozenset[Rotation]
]:
    weighted = weigh_rotations(digraph, frame)
    network = build_flow_network(weighted)
    _, cut, _ = max_flow_min_cut(network)
    return weighted, extract_optimal_closed_subset(weighted, cut)


_SUMSQ_LEAVE = LeaveDistribution(1, {})


def _min_sumsq_of(digraph: RotationDigraph) -> Matching:
    frame = CostFrame(
        digraph.instance, Fraction(1), _SUMSQ_LEAVE, ConventionPair(), None
    )
    _, subset = _optimal_subset(digraph, frame)
    return digraph.matching_of(subset)


def min_sumsq_stable(instance: Instance) -> Matching:
    """The stable matching minimizing the sum of squared partner costs.

    Ties are broken deterministically: among all optima, the one whose
    closed subset is the maximal one extracted from the canonical min cut.
    """
    return _min_sumsq_of(RotationDigraph(instance))


def compute_baselines(instance: Instance, leave: LeaveDistribution) -> dict[str, Matching]:
    """Baseline matchings: PHI maps to the full instance's sum-of-squares
    optimum, each positive-probability leaver to the optimum without them."""
    baselines = {PHI: min_sumsq_stable(instance)}
    for agent in leave.positive:
        baselines[agent] = min_sumsq_stable(remove_agent(instance, agent))
    return baselines


@dataclass(frozen=True)
class RobustSolution:
    """A solver answer: the matching, its objective value and provenance."""

    matching: Matching
    psi: Fraction
    closed_subset: tuple[Rotation, ...] | None
    psi_by_leaver: Mapping[str, Fraction]


def solve_robust(
    instance: Instance,
    nu: Fraction,
    leave: LeaveDistribution,
    conventions: ConventionPair | None = None,
    baselines: Mapping[str, Matching] | None = None,
) -> RobustSolution:
    """Minimize psi over all stable matchings of the instance.

    Pipeline: per-leaver baselines, rotation digraph, rotation weights,
    closure network, min cut, closed subset, matching.  Baselines may be
    passed in to skip recomputation (they must match `compute_baselines`).
    """
    if conventions is None:
        conventions = ConventionPair()
    if baselines is None:
        baselines = compute_baselines(instance, leave)
    params = ObjectiveParams(Fraction(nu), leave, baselines, conventions)
    digraph = RotationDigraph(instance)
    frame = CostFrame.from_params(instance, params)
    weighted, subset = _optimal_subset(digraph, frame)
    matching = digraph.matching_of(subset)

    breakdown = psi_breakdown(instance, matching, params)
    total = sum(breakdown.values(), Fraction(0))
    base = sum(
        psi_breakdown(instance, digraph.men_optimal, params).values(), Fraction(0)
    )
    telescoped = base + sum(
        (weighted.cost_change(rot.index) for rot in subset), Fraction(0)
    )
    if total != telescoped:
        raise InternalError(
            f"psi {total} disagrees with the telescoped value {telescoped}"
        )
    stable, blocking = is_stable(instance, matching)
    if not stable:
        raise InternalError(f"solver returned an unstable matching ({blocking[:3]})")
    ordered = tuple(sorted(subset, key=lambda rot: rot.index))
    return RobustSolution(matching, total, ordered, breakdown)
