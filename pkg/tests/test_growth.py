import pytest

from ytwin.errors import UnknownRecommender
from ytwin.growth import gini, grow_follow_graph


def test_gini():
    assert gini([]) == 0.0
    assert gini([0, 0, 0]) == 0.0
    assert gini([5, 5, 5, 5]) == pytest.approx(0.0)
    assert gini([0, 0, 0, 1]) == pytest.approx(0.75)
    assert gini([1, 2, 3, 4]) == pytest.approx(0.25)


def test_small_growth_is_seeded():
    first = grow_follow_graph("Random", seed=1, n_agents=60, rounds=30, activity=0.2)
    again = grow_follow_graph("Random", seed=1, n_agents=60, rounds=30, activity=0.2)
    assert first == again
    assert first.follows > 0
    assert sum(first.in_degrees.values()) == first.follows
    assert 0.0 <= first.gini < 1.0


def test_unknown_variant_is_refused():
    with pytest.raises(UnknownRecommender):
        grow_follow_graph("Trending", seed=1, n_agents=10, rounds=5, activity=0.5)


@pytest.mark.slow
def test_preferential_attachment_concentrates_followers():
    for seed in range(10):
        attached = grow_follow_graph("PreferentialAttachment", seed=seed)
        uniform = grow_follow_graph("Random", seed=seed)
        assert attached.gini > uniform.gini, seed
