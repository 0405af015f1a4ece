"""Brute-force reference implementations for small instances.

Deliberately naive: enumerate every sex-respecting involution, filter for
stability pair by pair, take exact argmins, and map out the rotation
precedence order by trying every elimination sequence.  The solvers are
tested against these on randomized small instances; nothing here is meant
to scale past a dozen agents.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping

from .errors import InternalError, ValidationError
from .lattice import Rotation, Shortlists, eliminate_rotation, exposed_rotations, propose_da
from .model import Instance, Matching
from .objective import CostFrame, ObjectiveParams, psi

DEFAULT_MAX_AGENTS = 12


def _check_bound(instance: Instance, max_agents: int):
    if len(instance.agent_ids) > max_agents:
        raise ValidationError(
            f"instance has {len(instance.agent_ids)} agents, oracle bound is {max_agents}"
        )


def _involutions(n_men: int, n_women: int) -> Iterator[list[int]]:
    """Partner arrays over man indices (-1 = single), women by index."""
    partner = [-1] * n_men
    free = [True] * n_women

    def rec(i: int) -> Iterator[list[int]]:
        if i == n_men:
            yield partner
            return
        yield from rec(i + 1)
        for j in range(n_women):
            if free[j]:
                partner[i] = j
                free[j] = False
                yield from rec(i + 1)
                partner[i] = -1
                free[j] = True

    return rec(0)


def _to_matching(instance: Instance, mpart: list[int]) -> Matching:
    part = {a: a for a in instance.agent_ids}
    for i, j in enumerate(mpart):
        if j >= 0:
            part[instance.men[i]] = instance.women[j]
            part[instance.women[j]] = instance.men[i]
    return Matching(part)


def enumerate_matchings(
    instance: Instance, max_agents: int = DEFAULT_MAX_AGENTS
) -> list[Matching]:
    """Every sex-respecting involution, singles included, deterministic order."""
    _check_bound(instance, max_agents)
    return [
        _to_matching(instance, mpart)
        for mpart in _involutions(len(instance.men), len(instance.women))
    ]


class _StabilityFilter:
    """Array-based stability check, equivalent to :func:`model.is_stable`."""

    def __init__(self, instance: Instance):
        men, women = instance.men, instance.women
        rank = instance.rank
        self.m_self = [rank[m][m] for m in men]
        self.w_self = [rank[w][w] for w in women]
        self.m_rank = [[rank[m][w] for w in women] for m in men]
        self.w_rank = [[rank[w][m] for m in men] for w in women]

    def is_stable(self, mpart: list[int], wpart: list[int]) -> bool:
        m_rank, w_rank = self.m_rank, self.w_rank
        m_cur = [
            self.m_self[i] if j < 0 else m_rank[i][j] for i, j in enumerate(mpart)
        ]
        w_cur = [
            self.w_self[j] if i < 0 else w_rank[j][i] for j, i in enumerate(wpart)
        ]
        for i, own in enumerate(m_cur):
            if own > self.m_self[i]:
                return False
            row = m_rank[i]
            for j, hers in enumerate(w_cur):
                if row[j] < own and w_rank[j][i] < hers:
                    return False
        for j, hers in enumerate(w_cur):
            if hers > self.w_self[j]:
                return False
        return True


def _stable_partner_arrays(instance: Instance) -> Iterator[list[int]]:
    check = _StabilityFilter(instance)
    n_women = len(instance.women)
    for mpart in _involutions(len(instance.men), n_women):
        wpart = [-1] * n_women
        for i, j in enumerate(mpart):
            if j >= 0:
                wpart[j] = i
        if check.is_stable(mpart, wpart):
            yield mpart


def enumerate_stable_matchings(
    instance: Instance, max_agents: int = DEFAULT_MAX_AGENTS
) -> list[Matching]:
    """The stable subset of :func:`enumerate_matchings`; never empty."""
    _check_bound(instance, max_agents)
    out = [_to_matching(instance, mpart) for mpart in _stable_partner_arrays(instance)]
    if not out:
        raise InternalError("no stable matching found; enumeration is broken")
    return out


def brute_solve(
    instance: Instance,
    params: ObjectiveParams,
    domain: str = "stable",
    max_agents: int = DEFAULT_MAX_AGENTS,
) -> tuple[Matching, Fraction]:
    """Exact argmin of psi over stable matchings or over all involutions.

    Ties break toward the first optimum in enumeration order.  The integer
    frame used for speed is re-checked against the rational-arithmetic psi
    on the winner.
    """
    _check_bound(instance, max_agents)
    if domain not in ("stable", "all"):
        raise ValidationError(f"unknown domain {domain!r}")
    frame = CostFrame.from_params(instance, params)
    agent_index = frame.index
    men_pos = [agent_index[m] for m in instance.men]
    women_pos = [agent_index[w] for w in instance.women]

    if domain == "stable":
        candidates = _stable_partner_arrays(instance)
    else:
        candidates = _involutions(len(instance.men), len(instance.women))

    best_scaled: int | None = None
    best: list[int] | None = None
    identity = list(range(len(frame.agents)))
    for mpart in candidates:
        partner = list(identity)
        for i, j in enumerate(mpart):
            if j >= 0:
                partner[men_pos[i]] = women_pos[j]
                partner[women_pos[j]] = men_pos[i]
        value = frame.psi_scaled(partner)
        if best_scaled is None or value < best_scaled:
            best_scaled = value
            best = mpart[:]
    if best is None or best_scaled is None:
        raise InternalError("empty candidate set")
    matching = _to_matching(instance, best)
    value = frame.fraction(best_scaled)
    direct = psi(instance, matching, params)
    if value != direct:
        raise InternalError(f"integer frame psi {value} != direct psi {direct}")
    return matching, value


@dataclass(frozen=True)
class PosetOracle:
    """Ground-truth rotation order from exhaustive elimination exploration.

    ``precedes`` holds (a, b) iff a must be eliminated before b (a != b);
    it is the full order relation, i.e. already transitively closed.
    ``transitions`` maps each rotation to the (before, after) matching pairs
    of every state it was observed exposed in.
    """

    rotations: tuple[Rotation, ...]
    precedes: frozenset[tuple[Rotation, Rotation]]
    closed_sets: tuple[frozenset[Rotation], ...]
    transitions: Mapping[Rotation, tuple[tuple[Matching, Matching], ...]]


def poset_oracle(instance: Instance, max_agents: int = DEFAULT_MAX_AGENTS) -> PosetOracle:
    """Explore every elimination sequence from the men-optimal state."""
    _check_bound(instance, max_agents)
    _, start = propose_da(instance)
    eliminated: dict[Matching, frozenset[Rotation]] = {}
    transitions: dict[Rotation, set[tuple[Matching, Matching]]] = {}
    stack: list[tuple[Shortlists, frozenset[Rotation]]] = [(start, frozenset())]
    while stack:
        shortlists, done = stack.pop()
        current = shortlists.matching
        if current in eliminated:
            if eliminated[current] != done:
                raise InternalError(
                    "two elimination orders reached one matching with different sets"
                )
            continue
        eliminated[current] = done
        for rotation in exposed_rotations(shortlists):
            after = eliminate_rotation(shortlists, rotation)
            transitions.setdefault(rotation, set()).add((current, after.matching))
            stack.append((after, done | {rotation}))

    rotations = tuple(sorted(transitions, key=lambda r: r.pairs))
    closed_sets = tuple(eliminated.values())
    if len(set(closed_sets)) != len(closed_sets):
        raise InternalError("distinct matchings share an eliminated rotation set")
    precedes = frozenset(
        (a, b)
        for a in rotations
        for b in rotations
        if a != b and all(a in group for group in closed_sets if b in group)
    )
    return PosetOracle(
        rotations,
        precedes,
        closed_sets,
        {rot: tuple(sorted(pairs, key=repr)) for rot, pairs in transitions.items()},
    )
