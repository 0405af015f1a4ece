"""Two-sided market instances with departure risk.

An instance is a set of agents split into men and women, where every agent
has a strict nonnegative rational cost for each member of the opposite sex
and for themselves (staying single).  Preference order is ascending cost.
A matching is a sex-respecting involution on the agents; self-matching is
how "unmatched" is represented.  A leave distribution assigns a probability
to the event that one given agent leaves the market after the matching is
fixed, or that nobody does.

All arithmetic is exact (`fractions.Fraction`); nothing in this module is
ever rounded.  Instances, matchings and distributions are immutable after
construction, so they can be shared freely across threads.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import ValidationError

MAN = "man"
WOMAN = "woman"

#: Key for the "nobody leaves" event in leave distributions, baseline sets
#: and per-leaver breakdowns.  The agent id "phi" is reserved for it.
PHI = "phi"


@dataclass(frozen=True)
class Agent:
    id: str
    sex: str


@dataclass(frozen=True)
class BlockingPair:
    """A man and a woman who strictly prefer each other to their partners."""

    man: str
    woman: str


def _fraction(value, what: str) -> Fraction:
    try:
        result = Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"{what}: not a rational number ({value!r})") from exc
    return result


class Instance:
    """Immutable market instance.

    `costs` maps ``(agent, candidate)`` to a nonnegative rational, defined for
    every candidate of the opposite sex plus the agent itself, with all of an
    agent's values pairwise distinct.  Derived fields:

    - ``pref[a]``: candidates of ``a`` (opposite sex and self) by ascending cost
    - ``rank[a][b]``: position of ``b`` in ``pref[a]`` (0 = most preferred)
    """

    __slots__ = ("men", "women", "costs", "pref", "rank", "_sex")

    def __init__(
        self,
        men: Iterable[str],
        women: Iterable[str],
        costs: Mapping[tuple[str, str], Fraction | int],
        _pref: Mapping[str, tuple[str, ...]] | None = None,
    ):
        self.men = tuple(sorted(men))
        self.women = tuple(sorted(women))
        ids = self.men + self.women
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate agent id")
        if PHI in ids:
            raise ValidationError(f"agent id {PHI!r} is reserved")
        self._sex = {m: MAN for m in self.men}
        self._sex.update({w: WOMAN for w in self.women})

        table: dict[str, dict[str, Fraction]] = {a: {} for a in ids}
        for (a, b), value in costs.items():
            if a not in table:
                raise ValidationError(f"cost entry for unknown agent {a!r}")
            if b in table[a]:
                raise ValidationError(f"duplicate cost entry ({a!r}, {b!r})")
            table[a][b] = _fraction(value, f"cost({a!r}, {b!r})")

        self.costs: dict[tuple[str, str], Fraction] = {}
        self.pref: dict[str, tuple[str, ...]] = {}
        self.rank: dict[str, dict[str, int]] = {}
        for a in ids:
            opposite = self.women if self._sex[a] == MAN else self.men
            expected = set(opposite) | {a}
            got = set(table[a])
            if got != expected:
                missing = sorted(expected - got)
                extra = sorted(got - expected)
                detail = []
                if missing:
                    detail.append(f"missing candidates {missing}")
                if extra:
                    detail.append(f"unexpected candidates {extra}")
                raise ValidationError(f"cost table of {a!r}: " + "; ".join(detail))
            for b, value in table[a].items():
                if value < 0:
                    raise ValidationError(f"cost({a!r}, {b!r}) is negative")
                self.costs[(a, b)] = value
            if _pref is not None:
                order = tuple(_pref[a])
            else:
                order = tuple(sorted(expected, key=lambda b: table[a][b]))
            values = [table[a][b] for b in order]
            for first, second in zip(values, values[1:]):
                if first == second:
                    raise ValidationError(f"tied costs for agent {a!r} (must be strict)")
            self.pref[a] = order
            self.rank[a] = {b: k for k, b in enumerate(order)}

    @property
    def agent_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.men + self.women))

    @property
    def agents(self) -> tuple[Agent, ...]:
        return tuple(Agent(a, self._sex[a]) for a in self.agent_ids)

    def sex_of(self, agent: str) -> str:
        try:
            return self._sex[agent]
        except KeyError:
            raise ValidationError(f"unknown agent {agent!r}") from None

    def opposite_ids(self, agent: str) -> tuple[str, ...]:
        return self.women if self.sex_of(agent) == MAN else self.men

    def cost(self, agent: str, candidate: str) -> Fraction:
        try:
            return self.costs[(agent, candidate)]
        except KeyError:
            raise ValidationError(f"cost undefined for ({agent!r}, {candidate!r})") from None

    def prefers(self, agent: str, first: str, second: str) -> bool:
        """True iff `agent` strictly prefers `first` to `second`."""
        ranks = self.rank[agent]
        return ranks[first] < ranks[second]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.men == other.men
            and self.women == other.women
            and self.costs == other.costs
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Instance({len(self.men)} men, {len(self.women)} women)"


class Matching:
    """A sex-respecting involution on agent ids; ``partner(a) == a`` means single.

    Only the involution property is checked here; membership and sex checks
    need an instance and happen in :func:`Matching.from_pairs` / :func:`is_stable`.
    """

    __slots__ = ("_partner", "_key")

    def __init__(self, partner: Mapping[str, str]):
        part = dict(partner)
        for a, b in part.items():
            if part.get(b) != a:
                raise ValidationError(f"matching is not an involution at {a!r}")
        self._partner = part
        self._key = tuple(sorted(part.items()))

    @classmethod
    def from_pairs(cls, instance: Instance, pairs: Iterable[tuple[str, str]]) -> "Matching":
        """Build a matching from cross-sex pairs; unmentioned agents are single."""
        part: dict[str, str] = {}
        for a, b in pairs:
            sa, sb = instance.sex_of(a), instance.sex_of(b)
            if a != b and sa == sb:
                raise ValidationError(f"pair ({a!r}, {b!r}) is same-sex")
            for x in (a, b):
                if x in part and part[x] != (b if x == a else a):
                    raise ValidationError(f"agent {x!r} appears in two pairs")
            part[a] = b
            part[b] = a
        for a in instance.agent_ids:
            part.setdefault(a, a)
        return cls(part)

    def partner(self, agent: str) -> str:
        try:
            return self._partner[agent]
        except KeyError:
            raise ValidationError(f"matching does not cover agent {agent!r}") from None

    @property
    def agent_ids(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self._key)

    def pairs(self, instance: Instance) -> tuple[tuple[str, str], ...]:
        """Matched (man, woman) pairs, sorted by man id."""
        out = []
        for a, b in self._key:
            if a != b and instance.sex_of(a) == MAN and instance.sex_of(b) == WOMAN:
                out.append((a, b))
        return tuple(out)

    def singles(self) -> tuple[str, ...]:
        return tuple(a for a, b in self._key if a == b)

    def without(self, leaver: str) -> "Matching":
        """The matching after `leaver` walks away: their partner becomes single."""
        part = {a: b for a, b in self._partner.items() if a != leaver}
        mate = self._partner.get(leaver)
        if mate is not None and mate != leaver:
            part[mate] = mate
        return Matching(part)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Matching):
            return NotImplemented
        return self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        matched = [(a, b) for a, b in self._key if a < b]
        single = [a for a, b in self._key if a == b]
        return f"Matching({matched}, singles={single})"


class LeaveDistribution:
    """Probability that a given agent leaves after matching, or nobody does.

    Zero-probability agents are dropped on construction, so two distributions
    compare equal iff they assign the same positive probabilities.
    """

    __slots__ = ("p_phi", "p")

    def __init__(self, p_phi, p: Mapping[str, Fraction | int] | None = None):
        self.p_phi = _fraction(p_phi, "p_phi")
        probs: dict[str, Fraction] = {}
        for agent, value in (p or {}).items():
            prob = _fraction(value, f"p({agent!r})")
            if prob < 0 or prob > 1:
                raise ValidationError(f"p({agent!r}) outside [0, 1]")
            if prob != 0:
                probs[agent] = prob
        if self.p_phi < 0 or self.p_phi > 1:
            raise ValidationError("p_phi outside [0, 1]")
        total = self.p_phi + sum(probs.values())
        if total != 1:
            raise ValidationError(f"leave probabilities sum to {total}, expected 1")
        self.p = probs

    @property
    def positive(self) -> tuple[str, ...]:
        """Agents with positive leave probability, sorted by id."""
        return tuple(sorted(self.p))

    def leavers(self) -> tuple[str, ...]:
        """All events with positive probability; PHI first when it has mass."""
        head = (PHI,) if self.p_phi > 0 else ()
        return head + self.positive

    def probability(self, key: str) -> Fraction:
        if key == PHI:
            return self.p_phi
        return self.p.get(key, Fraction(0))

    def __eq__(self, other) -> bool:
        if not isinstance(other, LeaveDistribution):
            return NotImplemented
        return self.p_phi == other.p_phi and self.p == other.p

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"LeaveDistribution(p_phi={self.p_phi}, p={self.p})"


def remove_agent(instance: Instance, leaver: str) -> Instance:
    """The instance without `leaver`; all other costs are untouched."""
    if leaver not in instance._sex:
        raise ValidationError(f"agent {leaver!r} not in instance")
    men = tuple(a for a in instance.men if a != leaver)
    women = tuple(a for a in instance.women if a != leaver)
    costs = {
        (a, b): v
        for (a, b), v in instance.costs.items()
        if a != leaver and b != leaver
    }
    pref = {
        a: tuple(b for b in instance.pref[a] if b != leaver)
        for a in men + women
    }
    return Instance(men, women, costs, _pref=pref)


def is_stable(instance: Instance, matching: Matching) -> tuple[bool, tuple[BlockingPair, ...]]:
    """Check individual rationality and list all blocking pairs.

    Returns ``(stable, blocking_pairs)`` where the pair list is sorted by
    (man id, woman id).  `stable` is true iff no agent prefers being single
    to their partner and the list is empty.
    """
    ids = set(instance.agent_ids)
    covered = set(matching.agent_ids)
    if covered != ids:
        outside = sorted(covered - ids) or sorted(ids - covered)
        raise ValidationError(f"matching does not fit instance (at {outside[:3]})")
    costs = instance.costs
    rational = True
    for a in ids:
        b = matching.partner(a)
        if a != b and instance.sex_of(a) == instance.sex_of(b):
            raise ValidationError(f"pair ({a!r}, {b!r}) is same-sex")
        if costs[(a, b)] > costs[(a, a)]:
            rational = False
    blocking = []
    for m in instance.men:
        own = costs[(m, matching.partner(m))]
        for w in instance.women:
            if matching.partner(m) == w:
                continue
            if costs[(m, w)] < own and costs[(w, m)] < costs[(w, matching.partner(w))]:
                blocking.append(BlockingPair(m, w))
    return (rational and not blocking, tuple(blocking))


def random_instance(n: int, seed: int, self_rank_last: bool = True) -> Instance:
    """Deterministic random rank-cost instance with `n` men and `n` women.

    Costs are ranks: the k-th listed candidate costs k.  With
    ``self_rank_last`` every agent ranks staying single below every partner;
    otherwise self is inserted at a seeded position.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    rng = random.Random(seed)
    width = len(str(n))
    men = [f"m{k:0{width}d}" for k in range(1, n + 1)]
    women = [f"w{k:0{width}d}" for k in range(1, n + 1)]
    costs: dict[tuple[str, str], Fraction] = {}
    for agent, opposite in [(m, women) for m in men] + [(w, men) for w in women]:
        order = rng.sample(opposite, len(opposite))
        if self_rank_last:
            order.append(agent)
        else:
            order.insert(rng.randrange(len(opposite) + 1), agent)
        for k, candidate in enumerate(order):
            costs[(agent, candidate)] = Fraction(k + 1)
    return Instance(men, women, costs)


# ---------------------------------------------------------------------------
# Instance document format (JSON)
# ---------------------------------------------------------------------------
#
# {
#   "men":   ["m1", ...],
#   "women": ["w1", ...],
#   "costs": {"m1": [["m1", 4, 1], ["w1", 1, 1], ...], ...},
#   "leave": {"phi": [1, 4], "m1": [3, 4]},
#   "nu":    [1, 2]          # optional
# }
#
# Costs are [candidate, numerator, denominator] triples and must include the
# agent itself.  The serializer emits keys in the order above, agents sorted
# by id; parse(serialize(x)) reproduces x exactly.

def _pair_fraction(obj, what: str) -> Fraction:
    if (
        not isinstance(obj, list)
        or len(obj) != 2
        or not all(isinstance(x, int) and not isinstance(x, bool) for x in obj)
    ):
        raise ValidationError(f"{what}: expected [numerator, denominator] integers")
    if obj[1] == 0:
        raise ValidationError(f"{what}: zero denominator")
    return Fraction(obj[0], obj[1])


def _id_list(obj, what: str) -> list[str]:
    if not isinstance(obj, list) or not all(isinstance(x, str) for x in obj):
        raise ValidationError(f"{what}: expected an array of id strings")
    return obj


def parse_instance(text: str) -> tuple[Instance, LeaveDistribution, Fraction | None]:
    """Parse an instance document, returning the default nu when present."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("malformed document: top level must be an object")
    allowed = {"men", "women", "costs", "leave", "nu"}
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ValidationError(f"unknown top-level keys {unknown}")
    for key in ("men", "women", "costs", "leave"):
        if key not in doc:
            raise ValidationError(f"missing top-level key {key!r}")

    men = _id_list(doc["men"], "men")
    women = _id_list(doc["women"], "women")
    if not isinstance(doc["costs"], dict):
        raise ValidationError("costs: expected an object keyed by agent id")
    costs: dict[tuple[str, str], Fraction] = {}
    for agent, entries in doc["costs"].items():
        if not isinstance(entries, list):
            raise ValidationError(f"costs[{agent!r}]: expected an array of triples")
        for entry in entries:
            if not isinstance(entry, list) or len(entry) != 3 or not isinstance(entry[0], str):
                raise ValidationError(f"costs[{agent!r}]: expected [candidate, num, den] triples")
            key = (agent, entry[0])
            if key in costs:
                raise ValidationError(f"duplicate cost entry ({agent!r}, {entry[0]!r})")
            costs[key] = _pair_fraction(entry[1:], f"cost({agent!r}, {entry[0]!r})")
    instance = Instance(men, women, costs)

    if not isinstance(doc["leave"], dict):
        raise ValidationError("leave: expected an object")
    leave_doc = dict(doc["leave"])
    if PHI not in leave_doc:
        raise ValidationError(f"leave: missing {PHI!r} entry")
    p_phi = _pair_fraction(leave_doc.pop(PHI), "leave.phi")
    agent_probs = {}
    for agent, value in leave_doc.items():
        if agent not in instance._sex:
            raise ValidationError(f"leave: unknown agent {agent!r}")
        agent_probs[agent] = _pair_fraction(value, f"leave[{agent!r}]")
    leave = LeaveDistribution(p_phi, agent_probs)

    nu: Fraction | None = None
    if "nu" in doc:
        nu = _pair_fraction(doc["nu"], "nu")
        if nu < 0 or nu > 1:
            raise ValidationError("nu outside [0, 1]")
    return instance, leave, nu


def serialize_instance(
    instance: Instance, leave: LeaveDistribution, nu: Fraction | None = None
) -> str:
    """Serialize to the document format; deterministic byte-for-byte."""
    doc: dict = {
        "men": list(instance.men),
        "women": list(instance.women),
        "costs": {
            a: [
                [b, instance.costs[(a, b)].numerator, instance.costs[(a, b)].denominator]
                for b in sorted((*instance.opposite_ids(a), a))
            ]
            for a in instance.agent_ids
        },
        "leave": {
            PHI: [leave.p_phi.numerator, leave.p_phi.denominator],
            **{
                a: [leave.p[a].numerator, leave.p[a].denominator]
                for a in leave.positive
            },
        },
    }
    if nu is not None:
        doc["nu"] = [Fraction(nu).numerator, Fraction(nu).denominator]
    return json.dumps(doc, indent=2) + "\n"
