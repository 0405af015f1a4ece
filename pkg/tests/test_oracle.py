from fractions import Fraction

import pytest

from robustmatch import (
    Instance,
    ObjectiveParams,
    Rotation,
    ValidationError,
    compute_baselines,
    is_stable,
    random_instance,
    remove_agent,
)
from robustmatch.oracle import (
    brute_solve,
    enumerate_matchings,
    enumerate_stable_matchings,
    poset_oracle,
)

from helpers import mixed_instance, random_leave


def test_involution_counts(gs3):
    instance, _ = gs3
    # 3+3 agents: sum over k of C(3,k)^2 * k! = 1 + 9 + 18 + 6
    assert len(enumerate_matchings(instance)) == 34
    one = random_instance(1, 3)
    assert len(enumerate_matchings(one)) == 2
    two = random_instance(2, 3)
    assert len(enumerate_matchings(two)) == 7


def test_enumeration_is_deterministic(gs3):
    instance, _ = gs3
    assert enumerate_matchings(instance) == enumerate_matchings(instance)


def test_stable_sets(gs3, gs3_matchings):
    instance, _ = gs3
    stable = enumerate_stable_matchings(instance)
    assert set(stable) == set(gs3_matchings)
    reduced = remove_agent(instance, "m1")
    assert len(enumerate_stable_matchings(reduced)) == 1


@pytest.mark.parametrize("seed", range(20))
def test_stable_filter_matches_is_stable(seed):
    instance = mixed_instance(seed, 2 + seed % 3)
    fast = set(enumerate_stable_matchings(instance))
    slow = {m for m in enumerate_matchings(instance) if is_stable(instance, m)[0]}
    assert fast == slow and fast


def test_bound_enforced():
    big = random_instance(7, 0)
    with pytest.raises(ValidationError, match="oracle bound"):
        enumerate_matchings(big)
    with pytest.raises(ValidationError, match="oracle bound"):
        poset_oracle(big)
    assert len(enumerate_matchings(big, max_agents=14)) > 0


def test_brute_solve_fixture(gs3, gs3_matchings):
    instance, leave = gs3
    mu_m, mu_e, _ = gs3_matchings
    baselines = compute_baselines(instance, leave)
    matching, value = brute_solve(
        instance, ObjectiveParams(Fraction(1), leave, baselines), "stable"
    )
    assert (matching, value) == (mu_e, 30)
    matching, value = brute_solve(
        instance, ObjectiveParams(Fraction(0), leave, baselines), "stable"
    )
    assert (matching, value) == (mu_m, Fraction(9, 4))
    with pytest.raises(ValidationError, match="domain"):
        brute_solve(instance, ObjectiveParams(Fraction(0), leave, baselines), "both")


def test_poset_oracle_fixture(gs3):
    instance, _ = gs3
    result = poset_oracle(instance)
    rho0 = Rotation((("m1", "w1"), ("m2", "w2"), ("m3", "w3")))
    rho1 = Rotation((("m1", "w2"), ("m2", "w3"), ("m3", "w1")))
    assert set(result.rotations) == {rho0, rho1}
    assert result.precedes == frozenset({(rho0, rho1)})
    assert len(result.closed_sets) == 3
    assert len(result.transitions[rho0]) == 1


def test_poset_oracle_unique_matching(gs3):
    instance, _ = gs3
    result = poset_oracle(remove_agent(instance, "m1"))
    assert result.rotations == () and result.precedes == frozenset()
    assert result.closed_sets == (frozenset(),)


@pytest.mark.parametrize("seed", range(10))
def test_poset_relation_is_a_strict_partial_order(seed):
    instance = mixed_instance(seed, 2 + seed % 5)
    result = poset_oracle(instance)
    relation = result.precedes
    for a, b in relation:
        assert a != b
        assert (b, a) not in relation
        for c, d in relation:
            if b == c:
                assert (a, d) in relation


def test_brute_solve_covers_all_involutions():
    costs = {
        ("m1", "w1"): 2, ("m1", "m1"): 1,
        ("w1", "m1"): 2, ("w1", "w1"): 1,
    }
    instance = Instance(["m1"], ["w1"], costs)
    leave = random_leave(instance, 1)
    params = ObjectiveParams(
        Fraction(1), leave, compute_baselines(instance, leave)
    )
    matching, _ = brute_solve(instance, params, "all")
    assert matching.singles() == ("m1", "w1")  # both prefer staying single
