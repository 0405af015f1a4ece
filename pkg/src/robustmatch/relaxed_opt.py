"""The relaxed optimum: minimize psi over all matchings, stability not required.

Grouping psi by agent shows each matched pair (a, b) contributes an amount
f(a, b) that depends only on the pair, and each single agent an amount
f(a, a); minimizing psi is therefore a linear assignment problem over
agents x agents.  Same-sex pairs are forbidden outright (no big-M), which
forces every cycle of the optimal permutation to alternate sexes and hence
have even length.  Splitting each cycle into its two perfect pairings and
keeping the cheaper one turns the permutation into a matching of the same
total cost, so the assignment optimum is attained by an involution.

Bookkeeping: a matched pair is counted twice by a symmetric permutation
(z[a][b] and z[b][a]) while a fixed point is counted once, so the diagonal
entries carry twice the single-agent contribution and the assignment total
equals exactly 2 * psi.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm

from .errors import InternalError, ValidationError
from .model import Instance, LeaveDistribution, Matching
from .objective import (
    SELF,
    ConventionPair,
    CostFrame,
    ObjectiveParams,
    psi_breakdown,
)
from .stable_opt import RobustSolution, compute_baselines


@dataclass(frozen=True)
class AssignmentCosts:
    """Symmetric pair-cost matrix over all agents; None marks forbidden
    (same-sex) pairs.  Indexed by position in `agents` (sorted ids)."""

    agents: tuple[str, ...]
    matrix: tuple[tuple[Fraction | None, ...], ...]

    def __post_init__(self):
        n = len(self.agents)
        if len(self.matrix) != n or any(len(row) != n for row in self.matrix):
            raise ValidationError("assignment cost matrix must be square over agents")


def pair_cost_f(
    instance: Instance, first: str, second: str, params: ObjectiveParams
) -> Fraction | None:
    """Contribution of pairing `first` with `second` to the assignment total.

    None for distinct same-sex agents.  The diagonal (first == second) is the
    single-agent cost, doubled so that the assignment objective over a
    symmetric permutation is exactly twice psi.
    """
    nu = params.nu
    leave = params.leave
    baselines = params.baselines
    cost = instance.cost

    def regret_base(agent: str, leaver: str) -> Fraction:
        return cost(agent, baselines[leaver].partner(agent))

    if first == second:
        c = cost(first, first)
        total = Fraction(0)
        for leaver in leave.leavers():
            if leaver == first:
                continue
            b = regret_base(first, leaver)
            total += leave.probability(leaver) * (
                nu * c * c + (1 - nu) * (c - b) * (c - b)
            )
        return 2 * total

    if instance.sex_of(first) == instance.sex_of(second):
        return None

    total = Fraction(0)
    for leaver in leave.leavers():
        if leaver in (first, second):
            continue
        p = leave.probability(leaver)
        for agent, partner in ((first, second), (second, first)):
            c = cost(agent, partner)
            b = regret_base(agent, leaver)
            total += p * (nu * c * c + (1 - nu) * (c - b) * (c - b))
    for leaver, stays in ((first, second), (second, first)):
        p = leave.probability(leaver)
        if p == 0:
            continue
        d = cost(stays, stays if params.conventions.cost_term == SELF else leaver)
        r = cost(stays, stays if params.conventions.regret_term == SELF else leaver)
        b = regret_base(stays, leaver)
        total += p * (nu * d * d + (1 - nu) * (r - b) * (r - b))
    return total


def build_assignment_costs(instance: Instance, params: ObjectiveParams) -> AssignmentCosts:
    """The full matrix, computed on the shared integer grid for speed."""
    frame = CostFrame.from_params(instance, params)
    agents = frame.agents
    n = len(agents)
    sexes = [instance.sex_of(a) for a in agents]
    g = [
        [
            frame.pair_term(i, j) if i == j or sexes[i] != sexes[j] else None
            for j in range(n)
        ]
        for i in range(n)
    ]
    matrix = []
    for i in range(n):
        row: list[Fraction | None] = []
        for j in range(n):
            if g[i][j] is None:
                row.append(None)
            elif i == j:
                row.append(frame.fraction(2 * g[i][i]))
            else:
                row.append(frame.fraction(g[i][j] + g[j][i]))  # type: ignore[operator]
        matrix.append(tuple(row))
    return AssignmentCosts(agents, tuple(matrix))


def solve_assignment(costs: AssignmentCosts) -> tuple[tuple[int, ...], Fraction]:
    """Exact minimum-cost perfect assignment (shortest augmenting paths).

    Forbidden entries are skipped structurally.  A finite perfect assignment
    always exists because the diagonal is finite.  Deterministic: ties are
    resolved toward smaller column indices.
    """
    n = len(costs.agents)
    if n == 0:
        return (), Fraction(0)
    finite = [c for row in costs.matrix for c in row if c is not None]
    scale = lcm(1, *(c.denominator for c in finite))
    grid: list[list[int | None]] = [
        [None if c is None else int(c * scale) for c in row] for row in costs.matrix
    ]

    # Potentials-based assignment over rows 1..n with a virtual column 0.
    u = [0] * (n + 1)
    v = [0] * (n + 1)
    match = [0] * (n + 1)  # match[j] = row assigned to column j (1-based, 0 = free)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minval: list[int | None] = [None] * (n + 1)
        used = [False] * (n + 1)
        trace = [0] * (n + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = None
            j1 = -1
            row = grid[i0 - 1]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                entry = row[j - 1]
                if entry is not None:
                    cur = entry - u[i0] - v[j]
                    if minval[j] is None or cur < minval[j]:
                        minval[j] = cur
                        trace[j] = j0
                if minval[j] is not None and (delta is None or minval[j] < delta):
                    delta = minval[j]
                    j1 = j
            if delta is None:
                raise InternalError("no feasible assignment extension")
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                elif minval[j] is not None:
                    minval[j] = minval[j] - delta  # type: ignore[operator]
            j0 = j1
            if match[j0] == 0:
                break
        while j0 != 0:
            j1 = trace[j0]
            match[j0] = match[j1]
            j0 = j1

    permutation = [0] * n
    total = 0
    for j in range(1, n + 1):
        i = match[j]
        permutation[i - 1] = j - 1
        entry = grid[i - 1][j - 1]
        assert entry is not None
        total += entry
    return tuple(permutation), Fraction(total, scale)


def symmetrize(permutation: tuple[int, ...], costs: AssignmentCosts) -> Matching:
    """Fold an optimal permutation into a matching of equal total cost.

    Every nontrivial cycle alternates sexes (same-sex moves are forbidden),
    so it splits into two pairings; keep the cheaper, the first on ties.
    """
    n = len(permutation)
    for i, j in enumerate(permutation):
        if costs.matrix[i][j] is None:
            raise ValidationError("permutation uses a forbidden entry")
    partner = {a: a for a in costs.agents}
    seen = [False] * n
    for start in range(n):
        if seen[start]:
            continue
        cycle = []
        i = start
        while not seen[i]:
            seen[i] = True
            cycle.append(i)
            i = permutation[i]
        if len(cycle) == 1:
            continue
        if len(cycle) == 2:
            a, b = costs.agents[cycle[0]], costs.agents[cycle[1]]
            partner[a], partner[b] = b, a
            continue
        if len(cycle) % 2:
            raise InternalError("odd assignment cycle despite same-sex exclusion")
        evens = [(cycle[k], cycle[k + 1]) for k in range(0, len(cycle), 2)]
        odds = [(cycle[k], cycle[(k + 1) % len(cycle)]) for k in range(1, len(cycle), 2)]

        def cost_of(pairing):
            return sum((costs.matrix[i][j] for i, j in pairing), Fraction(0))

        chosen = evens if cost_of(evens) <= cost_of(odds) else odds
        for i, j in chosen:
            a, b = costs.agents[i], costs.agents[j]
            partner[a], partner[b] = b, a
    return Matching(partner)


def solve_relaxed(
    instance: Instance,
    nu: Fraction,
    leave: LeaveDistribution,
    conventions: ConventionPair | None = None,
    baselines=None,
) -> RobustSolution:
    """Minimize psi over all sex-respecting involutions of the instance."""
    if conventions is None:
        conventions = ConventionPair()
    if baselines is None:
        baselines = compute_baselines(instance, leave)
    params = ObjectiveParams(Fraction(nu), leave, baselines, conventions)
    costs = build_assignment_costs(instance, params)
    permutation, total = solve_assignment(costs)
    matching = symmetrize(permutation, costs)
    breakdown = psi_breakdown(instance, matching, params)
    value = sum(breakdown.values(), Fraction(0))
    if 2 * value != total:
        raise InternalError(
            f"assignment total {total} is not twice the objective {value}"
        )
    return RobustSolution(matching, value, None, breakdown)
