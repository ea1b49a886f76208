import random

import pytest

from anarchy import normalize_network


@pytest.fixture
def pigou():
    return normalize_network([{"a": 1, "b": 0}, {"a": 0, "b": 1}])


def random_network(rng: random.Random, kmax: int = 5, allow_flat: bool = False):
    """Random normalized instance; optionally give the last link zero slope."""
    k = rng.randint(1, kmax)
    links = [
        {"a": rng.uniform(0.05, 5.0), "b": rng.uniform(0.0, 4.0)}
        for _ in range(k)
    ]
    if allow_flat and k >= 2 and rng.random() < 0.3:
        top = max(l["b"] for l in links)
        links[-1] = {"a": 0.0, "b": top + rng.uniform(0.01, 2.0)}
    return normalize_network(links)
