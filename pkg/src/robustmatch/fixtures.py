"""The classic Gale-Shapley 3x3 instance, wired for departure risk.

This is the textbook example with three stable matchings: every agent ranks
the opposite side cyclically so that the men-optimal, women-optimal, and
middle ("everyone gets their second choice") matchings are all stable.
Costs are ranks, self is ranked last (cost 4), and m1 may leave with
probability 3/4.
"""

from __future__ import annotations

from fractions import Fraction

from .model import Instance, LeaveDistribution, Matching

_PREFERENCES = {
    "m1": ["w1", "w2", "w3"],
    "m2": ["w2", "w3", "w1"],
    "m3": ["w3", "w1", "w2"],
    "w1": ["m2", "m3", "m1"],
    "w2": ["m3", "m1", "m2"],
    "w3": ["m1", "m2", "m3"],
}


def gale_shapley_3x3() -> tuple[Instance, LeaveDistribution]:
    costs = {}
    for agent, order in _PREFERENCES.items():
        for k, candidate in enumerate(order):
            costs[(agent, candidate)] = Fraction(k + 1)
        costs[(agent, agent)] = Fraction(4)
    instance = Instance(["m1", "m2", "m3"], ["w1", "w2", "w3"], costs)
    leave = LeaveDistribution(Fraction(1, 4), {"m1": Fraction(3, 4)})
    return instance, leave


def men_optimal(instance: Instance) -> Matching:
    return Matching.from_pairs(instance, [("m1", "w1"), ("m2", "w2"), ("m3", "w3")])


def women_optimal(instance: Instance) -> Matching:
    return Matching.from_pairs(instance, [("m1", "w3"), ("m2", "w1"), ("m3", "w2")])


def second_choices(instance: Instance) -> Matching:
    """The stable matching where everyone gets their second choice."""
    return Matching.from_pairs(instance, [("m1", "w2"), ("m2", "w3"), ("m3", "w1")])
