import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from argotune.config_space import (Configuration, EmptySpaceError, InvalidConfigurationError, SearchSpace,
                                   enumerate_space, neighbor, normalize, validate)


def brute_force(total, max_n, s_cap=None, t_cap=None):
    s_cap = s_cap or total
    t_cap = t_cap or total
    return [Configuration(n, s, t)
            for n, s, t in itertools.product(range(1, max_n + 1), range(1, total + 1), range(1, total + 1))
            if n * (s + t) <= total and s <= s_cap and t <= t_cap]


def test_eight_cores_four_processes_has_36_points():
    space = SearchSpace(8, max_processes=4)
    assert len(enumerate_space(space)) == 36


def test_two_cores_single_point():
    assert enumerate_space(SearchSpace(2)) == [Configuration(1, 1, 1)]


@pytest.mark.parametrize("total", [2, 4, 8, 16, 64, 112])
def test_count_matches_triple_loop(total):
    space = SearchSpace(total)
    configs = enumerate_space(space)
    assert configs == sorted(brute_force(total, 16))
    assert len(set(configs)) == len(configs)


@pytest.mark.parametrize("total, expected", [(112, 912), (64, 638)])
def test_capped_server_spaces(total, expected):
    space = SearchSpace.capped(total)
    assert len(space) == expected == len(brute_force(total, 8, 8, 16))


def test_single_core_space_is_empty():
    with pytest.raises(EmptySpaceError):
        enumerate_space(SearchSpace(1))


def test_validate_examples():
    assert validate(Configuration(1, 1, 1), SearchSpace(2))
    assert not validate(Configuration(2, 1, 1), SearchSpace(2))


def test_validate_agrees_with_enumeration(rng):
    space = SearchSpace(24, max_processes=6, max_training_cores=10)
    members = set(enumerate_space(space))
    for n, s, t in rng.integers(-1, 26, size=(1000, 3)):
        cfg = Configuration(int(n), int(s), int(t))
        assert validate(cfg, space) == (cfg in members)


def test_normalize_endpoints_and_degenerate_dimension():
    space = SearchSpace(16, max_processes=8)
    n_lo, n_hi = space.bounds[0]
    assert (n_lo, n_hi) == (1, 8)
    assert normalize(Configuration(1, 1, 1), space)[0] == 0.0
    assert normalize(Configuration(8, 1, 1), space)[0] == 1.0
    single = SearchSpace(3, max_processes=1, max_sampling_cores=1)
    # s is pinned to 1 here
    assert normalize(Configuration(1, 1, 2), single)[1] == 0.5


def test_normalize_rejects_invalid():
    with pytest.raises(InvalidConfigurationError):
        normalize(Configuration(4, 4, 4), SearchSpace(8))


def test_normalize_is_even_grid_per_dimension():
    space = SearchSpace(32, max_processes=8)
    arr = space.as_array()
    norm = np.array([normalize(c, space) for c in space])
    for d in range(3):
        values = np.unique(arr[:, d])
        mapped = np.unique(norm[:, d])
        assert len(mapped) == len(values)
        assert np.allclose(np.diff(mapped), mapped[1] - mapped[0])
        assert mapped[0] == 0.0 and mapped[-1] == 1.0


def test_neighbor_singleton_returns_input(rng):
    assert neighbor(Configuration(1, 1, 1), SearchSpace(2), rng) == Configuration(1, 1, 1)


def test_neighbor_moves_one_step_and_covers_dimensions(rng):
    space = SearchSpace(16)
    start = Configuration(2, 2, 2)
    moved_dims = set()
    for _ in range(10_000):
        cfg = neighbor(start, space, rng)
        assert validate(cfg, space)
        diff = np.subtract(cfg.as_tuple(), start.as_tuple())
        assert np.abs(diff).sum() == 1
        moved_dims.add(int(np.flatnonzero(diff)[0]))
    assert len(moved_dims) >= 2


def test_neighbor_is_deterministic_given_rng_state():
    space = SearchSpace(16)
    a = [neighbor(Configuration(2, 2, 2), space, np.random.default_rng(5)) for _ in range(3)]
    assert len(set(a)) == 1


@given(st.integers(2, 40), st.integers(1, 8), st.integers(-2, 42), st.integers(-2, 42), st.integers(-2, 42))
def test_membership_is_the_constraint(total, max_n, n, s, t):
    space = SearchSpace(total, max_processes=max_n)
    cfg = Configuration(n, s, t)
    expected = 1 <= n <= max_n and s >= 1 and t >= 1 and n * (s + t) <= total
    assert validate(cfg, space) == expected


@given(st.integers(2, 48), st.integers(1, 10))
def test_enumeration_sorted_unique_valid(total, max_n):
    configs = enumerate_space(SearchSpace(total, max_processes=max_n))
    assert configs == sorted(set(configs))
    assert all(c.total_cores_used <= total for c in configs)
