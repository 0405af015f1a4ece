import pytest
from hypothesis import HealthCheck, settings

from robustmatch.fixtures import (
    gale_shapley_3x3,
    men_optimal,
    second_choices,
    women_optimal,
)

settings.register_profile(
    "repo", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def gs3():
    """(instance, leave) for the classic 3x3 example with m1 leaving w.p. 3/4."""
    return gale_shapley_3x3()


@pytest.fixture(scope="session")
def gs3_matchings(gs3):
    """(men-optimal, second-choice, women-optimal) stable matchings."""
    instance, _ = gs3
    return men_optimal(instance), second_choices(instance), women_optimal(instance)
