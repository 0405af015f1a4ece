"""Shared generators for randomized tests: instances and leave distributions."""

import random
from fractions import Fraction

from robustmatch import Instance, LeaveDistribution, random_instance

NU_GRID = (Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1))


def random_rational_instance(n: int, seed: int) -> Instance:
    """General rational costs (not ranks), strict per agent by construction."""
    rng = random.Random(seed)
    men = [f"m{k}" for k in range(1, n + 1)]
    women = [f"w{k}" for k in range(1, n + 1)]
    costs = {}
    for agent, opposite in [(m, women) for m in men] + [(w, men) for w in women]:
        values = set()
        while len(values) < len(opposite) + 1:
            values.add(Fraction(rng.randrange(0, 60), rng.randrange(1, 8)))
        ordered = sorted(values)
        rng.shuffle(ordered)
        for candidate, value in zip(opposite + [agent], ordered):
            costs[(agent, candidate)] = value
    return Instance(men, women, costs)


def mixed_instance(seed: int, n: int) -> Instance:
    """Cycle through rank costs, seeded self positions, and rational costs."""
    kind = seed % 3
    if kind == 0:
        return random_instance(n, seed, self_rank_last=True)
    if kind == 1:
        return random_instance(n, seed, self_rank_last=False)
    return random_rational_instance(n, seed)


def random_leave(instance: Instance, seed: int) -> LeaveDistribution:
    """Random exact rational leave distribution over a random agent subset."""
    rng = random.Random(seed ^ 0x9E3779B9)
    ids = list(instance.agent_ids)
    chosen = rng.sample(ids, rng.randrange(0, len(ids) + 1))
    w_phi = rng.randrange(0 if chosen else 1, 10)
    weights = [rng.randrange(0, 10) for _ in chosen]
    total = w_phi + sum(weights)
    if total == 0:
        w_phi, total = 1, 1
    return LeaveDistribution(
        Fraction(w_phi, total),
        {a: Fraction(w, total) for a, w in zip(chosen, weights)},
    )


def leave_everyone_positive(instance: Instance, seed: int) -> LeaveDistribution:
    rng = random.Random(seed * 31 + 7)
    weights = {a: rng.randrange(1, 9) for a in instance.agent_ids}
    w_phi = rng.randrange(1, 9)
    total = w_phi + sum(weights.values())
    return LeaveDistribution(
        Fraction(w_phi, total), {a: Fraction(w, total) for a, w in weights.items()}
    )
