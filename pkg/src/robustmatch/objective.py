"""The departure-aware objective: expected squared cost plus squared regret.

For a matching ``mu``, a trade-off parameter ``nu`` in [0, 1] and a leave
distribution, the objective is

    psi(mu; nu) = sum over leavers L of  p(L) * [ nu * sum d(w)^2
                                                + (1-nu) * sum (r(w) - b(w))^2 ]

where the inner sums run over agents other than the leaver, ``b(w)`` is the
cost of ``w``'s partner in the per-leaver baseline matching, and ``d``/``r``
are the costs agents actually face once the leaver is gone.  An agent whose
partner left has no partner anymore, which leaves two defensible readings of
"the cost it faces": the cost of being single ("self") or the cost of the
partner it contracted for ("retained").  Both are supported, separately for
the cost term and the regret term; the default pair is (self, retained).

Everything here is exact rational arithmetic.  :class:`CostFrame` rewrites
the same sums over a common integer denominator so that solvers and oracles
can run their hot loops on plain ints without losing exactness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Mapping

from .errors import ValidationError
from .model import Instance, LeaveDistribution, Matching, PHI, is_stable, remove_agent

SELF = "self"
RETAINED = "retained"

#: Maps each leaver key (PHI or an agent id with positive probability) to the
#: baseline matching used for the regret term: a stable matching of the
#: instance without that leaver, minimizing the sum of squared costs.
BaselineSet = Mapping[str, Matching]


@dataclass(frozen=True)
class ConventionPair:
    """Which cost an abandoned partner is charged in each term of psi."""

    cost_term: str = SELF
    regret_term: str = RETAINED

    def __post_init__(self):
        for name in (self.cost_term, self.regret_term):
            if name not in (SELF, RETAINED):
                raise ValidationError(f"unknown convention {name!r}")


@dataclass(frozen=True)
class ObjectiveParams:
    nu: Fraction
    leave: LeaveDistribution
    baselines: BaselineSet
    conventions: ConventionPair = field(default_factory=ConventionPair)

    def __post_init__(self):
        object.__setattr__(self, "nu", Fraction(self.nu))
        if self.nu < 0 or self.nu > 1:
            raise ValidationError("nu outside [0, 1]")
        expected = {PHI, *self.leave.positive}
        got = set(self.baselines)
        if got != expected:
            raise ValidationError(
                f"baselines must cover exactly {sorted(expected)}, got {sorted(got)}"
            )


def displayed_cost(
    instance: Instance,
    matching: Matching,
    leaver: str,
    agent: str,
    convention: str = SELF,
) -> Fraction:
    """Cost `agent` faces under `matching` once `leaver` is gone.

    With no leaver (PHI), or a partner who stayed, this is just the partner
    cost.  For the abandoned partner it is the self cost or the original
    partner cost, per `convention`.
    """
    if agent == leaver:
        raise ValidationError("displayed cost undefined for the leaver itself")
    if convention not in (SELF, RETAINED):
        raise ValidationError(f"unknown convention {convention!r}")
    partner = matching.partner(agent)
    if partner == leaver:
        return instance.cost(agent, agent if convention == SELF else leaver)
    return instance.cost(agent, partner)


def _baseline_cost(instance: Instance, baseline: Matching, agent: str) -> Fraction:
    return instance.cost(agent, baseline.partner(agent))


def psi_breakdown(
    instance: Instance, matching: Matching, params: ObjectiveParams
) -> dict[str, Fraction]:
    """Per-leaver contributions to psi; keys are PHI and agent ids."""
    conv = params.conventions
    out: dict[str, Fraction] = {}
    for leaver in params.leave.leavers():
        p = params.leave.probability(leaver)
        baseline = params.baselines[leaver]
        sq_cost = Fraction(0)
        sq_regret = Fraction(0)
        for agent in instance.agent_ids:
            if agent == leaver:
                continue
            d = displayed_cost(instance, matching, leaver, agent, conv.cost_term)
            r = displayed_cost(instance, matching, leaver, agent, conv.regret_term)
            b = _baseline_cost(instance, baseline, agent)
            sq_cost += d * d
            sq_regret += (r - b) * (r - b)
        out[leaver] = p * (params.nu * sq_cost + (1 - params.nu) * sq_regret)
    return out


def psi(instance: Instance, matching: Matching, params: ObjectiveParams) -> Fraction:
    """The objective value of `matching`; always >= 0."""
    return sum(psi_breakdown(instance, matching, params).values(), Fraction(0))


def expected_blocking_pairs(
    instance: Instance, matching: Matching, leave: LeaveDistribution
) -> Fraction:
    """Expected number of blocking pairs once the leaver (if any) is gone.

    Everyone keeps their partner; the abandoned partner becomes single.  The
    no-leaver term counts blocking pairs of the matching as-is.
    """
    total = leave.p_phi * len(is_stable(instance, matching)[1])
    for leaver in leave.positive:
        reduced = remove_agent(instance, leaver)
        rest = matching.without(leaver)
        total += leave.p[leaver] * len(is_stable(reduced, rest)[1])
    return total


class CostFrame:
    """Costs, leave weights and baselines of one solve on a common integer grid.

    Every term the solvers compare has the shape
    ``p * (nu * d^2 + (1 - nu) * (r - b)^2)``.  Scaling costs by the lcm D of
    their denominators, probabilities by their lcm Q, and writing nu = u/v
    makes each term an integer multiple of ``1 / (Q * v * D^2)``, so sums and
    comparisons run on Python ints and stay exact.

    ``leavers`` holds ``(key, agent_index, weight, baseline_row)`` tuples,
    with index -1 and a full-length row for the no-leaver event.  Baselines
    may be omitted only when the regret coefficient ``v - u`` is zero.
    """

    __slots__ = (
        "agents", "index", "cmat", "leavers", "u", "v", "scale",
        "cost_self", "regret_self",
    )

    def __init__(
        self,
        instance: Instance,
        nu: Fraction,
        leave: LeaveDistribution,
        conventions: ConventionPair,
        baselines: BaselineSet | None,
    ):
        nu = Fraction(nu)
        if nu < 0 or nu > 1:
            raise ValidationError("nu outside [0, 1]")
        self.agents = instance.agent_ids
        self.index = {a: i for i, a in enumerate(self.agents)}
        self.u = nu.numerator
        self.v = nu.denominator
        self.cost_self = conventions.cost_term == SELF
        self.regret_self = conventions.regret_term == SELF

        denom = lcm(1, *(c.denominator for c in instance.costs.values()))
        n = len(self.agents)
        self.cmat: list[list[int | None]] = [[None] * n for _ in range(n)]
        for (a, b), value in instance.costs.items():
            self.cmat[self.index[a]][self.index[b]] = int(value * denom)

        keys = leave.leavers()
        prob_denom = lcm(*(leave.probability(k).denominator for k in keys)) if keys else 1
        self.scale = prob_denom * self.v * denom * denom
        need_regret = self.v != self.u
        self.leavers: list[tuple[str, int, int, list[int | None] | None]] = []
        for key in keys:
            weight = int(leave.probability(key) * prob_denom)
            li = -1 if key == PHI else self.index[key]
            row: list[int | None] | None = None
            if need_regret:
                if baselines is None or key not in baselines:
                    raise ValidationError(f"baseline missing for leaver {key!r}")
                base = baselines[key]
                row = [None] * n
                for i, agent in enumerate(self.agents):
                    if i != li:
                        row[i] = self.cmat[i][self.index[base.partner(agent)]]
            self.leavers.append((key, li, weight, row))

    @classmethod
    def from_params(cls, instance: Instance, params: ObjectiveParams) -> "CostFrame":
        return cls(instance, params.nu, params.leave, params.conventions, params.baselines)

    def fraction(self, scaled: int) -> Fraction:
        return Fraction(scaled, self.scale)

    def displayed(self, i: int, j: int, leaver_index: int, self_convention: bool) -> int:
        """Scaled cost agent i faces when matched to j and leaver_index departs."""
        if j == leaver_index:
            j = i if self_convention else leaver_index
        value = self.cmat[i][j]
        assert value is not None
        return value

    def pair_term(self, i: int, j: int) -> int:
        """Scaled contribution of agent i matched to candidate j (j == i for single).

        This is the regrouping of psi by agent: summing it over a matching's
        (agent, partner) pairs gives ``psi * scale`` exactly.
        """
        u, v = self.u, self.v
        total = 0
        for _, li, weight, row in self.leavers:
            if li == i:
                continue
            d = self.displayed(i, j, li, self.cost_self)
            acc = u * d * d
            if v != u:
                r = self.displayed(i, j, li, self.regret_self)
                b = row[i]  # type: ignore[index]
                acc += (v - u) * (r - b) * (r - b)
            total += weight * acc
        return total

    def psi_scaled(self, partner: list[int]) -> int:
        """``psi * scale`` for a matching given as an agent-index partner array."""
        return sum(self.pair_term(i, j) for i, j in enumerate(partner))

    def partner_array(self, matching: Matching) -> list[int]:
        return [self.index[matching.partner(a)] for a in self.agents]
