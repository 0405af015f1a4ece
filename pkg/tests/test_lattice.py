import random

import pytest

from robustmatch import (
    Matching,
    Rotation,
    ValidationError,
    build_rotation_digraph,
    eliminate_rotation,
    enumerate_rotations,
    exposed_rotations,
    is_stable,
    matching_of_closed_subset,
    propose_da,
    random_instance,
    remove_agent,
)
import robustmatch.oracle as oracle

from helpers import mixed_instance

RHO0 = Rotation((("m1", "w1"), ("m2", "w2"), ("m3", "w3")))
RHO1 = Rotation((("m1", "w2"), ("m2", "w3"), ("m3", "w1")))


def test_rotation_canonical_form():
    rotated = Rotation.from_cycle([("m2", "w2"), ("m3", "w3"), ("m1", "w1")])
    assert rotated == RHO0
    assert rotated.pairs[0] == ("m1", "w1")
    with pytest.raises(ValidationError, match="canonical"):
        Rotation((("m2", "w2"), ("m1", "w1")))
    with pytest.raises(ValidationError, match="at least two"):
        Rotation((("m1", "w1"),))
    with pytest.raises(ValidationError, match="distinct"):
        Rotation((("m1", "w1"), ("m1", "w2")))


def test_propose_da_both_sides(gs3, gs3_matchings):
    instance, _ = gs3
    mu_m, _, mu_f = gs3_matchings
    matching, shortlists = propose_da(instance, "men")
    assert matching == mu_m
    assert shortlists.matching == mu_m
    # nobody was refused in this instance, so the lists are complete
    assert shortlists.lists["m1"] == ("w1", "w2", "w3")
    assert shortlists.lists["w1"] == ("m2", "m3", "m1")
    matching_f, _ = propose_da(instance, "women")
    assert matching_f == mu_f
    with pytest.raises(ValidationError):
        propose_da(instance, "cats")


def test_propose_da_reduced_instance(gs3):
    instance, _ = gs3
    reduced = remove_agent(instance, "m1")
    matching, shortlists = propose_da(reduced, "men")
    expected = Matching.from_pairs(reduced, [("m2", "w2"), ("m3", "w3")])
    assert matching == expected
    assert matching.singles() == ("w1",)
    assert shortlists.lists["w1"] == ()  # single in every stable matching


def test_exposed_and_eliminate_chain(gs3, gs3_matchings):
    instance, _ = gs3
    mu_m, mu_e, mu_f = gs3_matchings
    _, state0 = propose_da(instance, "men")

    exposed0 = exposed_rotations(state0)
    assert exposed0 == (RHO0,)
    state1 = eliminate_rotation(state0, RHO0)
    assert state1.matching == mu_e

    exposed1 = exposed_rotations(state1)
    assert exposed1 == (RHO1,)
    state2 = eliminate_rotation(state1, RHO1)
    assert state2.matching == mu_f
    assert exposed_rotations(state2) == ()

    with pytest.raises(ValidationError, match="not exposed"):
        eliminate_rotation(state0, RHO1)


def test_women_optimal_state_exposes_nothing(gs3):
    instance, _ = gs3
    _, bottom = propose_da(instance, "women")
    assert exposed_rotations(bottom) == ()


def test_enumerate_rotations_fixture(gs3):
    instance, _ = gs3
    enum = enumerate_rotations(instance)
    assert enum.rotations == (RHO0, RHO1)
    assert enum.rotations[0].index == 0 and enum.rotations[1].index == 1
    assert enum.move_to[("m1", "w2")] == RHO0
    assert enum.move_from[("m1", "w2")] == RHO1
    assert enum.move_from[("m1", "w1")] == RHO0
    assert ("m1", "w3") not in enum.move_from


def test_enumerate_rotations_unique_stable_matching(gs3):
    instance, _ = gs3
    reduced = remove_agent(instance, "m1")
    assert enumerate_rotations(reduced).rotations == ()
    digraph = build_rotation_digraph(reduced)
    assert digraph.rotations == () and digraph.edges == frozenset()


def test_digraph_fixture(gs3):
    instance, _ = gs3
    digraph = build_rotation_digraph(instance)
    assert digraph.rotations == (RHO0, RHO1)
    assert digraph.edges == frozenset({(0, 1)})
    assert digraph.transitive_closure() == frozenset({(0, 1)})
    assert list(digraph.closed_subsets()) == [
        frozenset(), frozenset({0}), frozenset({0, 1})
    ]


def test_matching_of_closed_subset_fixture(gs3, gs3_matchings):
    instance, _ = gs3
    mu_m, mu_e, mu_f = gs3_matchings
    assert matching_of_closed_subset(instance, []) == mu_m
    assert matching_of_closed_subset(instance, [RHO0]) == mu_e
    assert matching_of_closed_subset(instance, [RHO0, RHO1]) == mu_f
    with pytest.raises(ValidationError, match="not closed"):
        matching_of_closed_subset(instance, [RHO1])


def test_matching_of_rejects_foreign_rotation(gs3):
    instance, _ = gs3
    alien = Rotation((("m1", "w3"), ("m2", "w1")))
    with pytest.raises(ValidationError, match="not a rotation"):
        matching_of_closed_subset(instance, [alien])


@pytest.mark.parametrize("seed", range(300))
def test_deferred_acceptance_outputs_are_stable(seed):
    n = 1 + seed % 8
    instance = random_instance(n, seed, self_rank_last=bool(seed % 2))
    for side in ("men", "women"):
        matching, _ = propose_da(instance, side)
        ok, blocking = is_stable(instance, matching)
        assert ok, (seed, side, blocking)


@pytest.mark.parametrize("seed", range(40))
def test_side_optimality_against_oracle(seed):
    instance = mixed_instance(seed, 2 + seed % 4)
    mu_m, _ = propose_da(instance, "men")
    mu_f, _ = propose_da(instance, "women")
    for matching in oracle.enumerate_stable_matchings(instance):
        for m in instance.men:
            assert instance.cost(m, mu_m.partner(m)) <= instance.cost(m, matching.partner(m))
        for w in instance.women:
            assert instance.cost(w, mu_f.partner(w)) <= instance.cost(w, matching.partner(w))


@pytest.mark.parametrize("seed", range(30))
def test_closed_subsets_biject_with_stable_matchings(seed):
    instance = mixed_instance(seed, 2 + seed % 5)
    digraph = build_rotation_digraph(instance)
    assert len(digraph.rotations) <= len(instance.men) * len(instance.women)
    stable = set(oracle.enumerate_stable_matchings(instance))
    images = [digraph.matching_of(subset) for subset in digraph.closed_subsets()]
    assert len(images) == len(stable)
    assert set(images) == stable  # injective and onto


# seeds whose random_instance(n, seed) lattice has a multi-rotation closed subset
RICH_LATTICES = [(1, 6), (4, 5), (15, 8), (20, 5), (35, 8), (43, 8), (47, 8),
                 (66, 7), (77, 6), (94, 7)]


@pytest.mark.parametrize("seed, n", RICH_LATTICES)
def test_elimination_order_independence(seed, n):
    """Two different admissible orders through a closed subset agree."""
    instance = random_instance(n, seed, self_rank_last=True)
    digraph = build_rotation_digraph(instance)
    subsets = [s for s in digraph.closed_subsets() if len(s) >= 2]
    assert subsets, "expected a multi-rotation closed subset for this seed"
    rng = random.Random(seed)
    subset = subsets[rng.randrange(len(subsets))]
    reference = digraph.matching_of(subset)

    # replay through the public shortlist API, eliminating whichever exposed
    # rotation the rng fancies, until the subset is exhausted
    _, state = propose_da(instance, "men")
    remaining = {digraph.rotations[i] for i in subset}
    while remaining:
        choices = [r for r in exposed_rotations(state) if r in remaining]
        assert choices, "closed subset stopped being eliminable"
        pick = choices[rng.randrange(len(choices))]
        state = eliminate_rotation(state, pick)
        remaining.discard(pick)
    assert state.matching == reference


@pytest.mark.parametrize("seed", range(25))
def test_transitive_closure_equals_poset_oracle(seed):
    instance = mixed_instance(seed, 2 + seed % 5)
    digraph = build_rotation_digraph(instance)
    result = oracle.poset_oracle(instance)
    assert set(digraph.rotations) == set(result.rotations)
    closure = {
        (digraph.rotations[a], digraph.rotations[b])
        for a, b in digraph.transitive_closure()
    }
    assert closure == set(result.precedes)


def test_shortlists_symmetry_validated(gs3):
    instance, _ = gs3
    _, shortlists = propose_da(instance, "men")
    broken = dict(shortlists.lists)
    broken["m1"] = ("w1",)  # w2/w3 still list m1
    from robustmatch.lattice import Shortlists

    with pytest.raises(ValidationError, match="symmetric"):
        exposed_rotations(Shortlists(instance, broken, shortlists.matching))
