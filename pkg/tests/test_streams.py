import math

import numpy as np
import pytest

from fragwave import ValidationError
from fragwave.streams import (DEFAULT_SEED, check_seed, map_trials, trial_generator,
                              trial_stream)


def _squares(start, stop, offset):
    return [(i, i * i + offset) for i in range(start, stop)]


def _first_uniforms(start, stop, seed):
    return [trial_stream(seed, i).random() for i in range(start, stop)]


def test_default_seed():
    assert DEFAULT_SEED == 0xF4A6


@pytest.mark.parametrize("bad", [-1, 2**64])
def test_seed_range(bad):
    with pytest.raises(ValidationError):
        check_seed(bad)
    assert check_seed(2**64 - 1) == 2**64 - 1


def test_streams_are_keyed_by_seed_and_index():
    a = trial_generator(7, 3).random(4)
    assert np.array_equal(a, trial_generator(7, 3).random(4))
    assert not np.array_equal(a, trial_generator(7, 4).random(4))
    assert not np.array_equal(a, trial_generator(8, 3).random(4))


def test_buffered_stream_matches_generator_across_refills():
    ref = trial_generator(11, 2).random(700)
    s = trial_stream(11, 2)
    assert [s.random() for _ in range(700)] == ref.tolist()


def test_exponential_uses_rate_convention():
    s, ref = trial_stream(5, 0), trial_generator(5, 0).random(1)[0]
    assert s.exponential(4.0) == pytest.approx(-math.log1p(-ref) / 4.0, rel=1e-15)


@pytest.mark.parametrize("workers", [1, 2, 3])
def test_map_trials_preserves_order(workers):
    assert map_trials(_squares, 23, (1,), workers, chunk=4) == [(i, i * i + 1) for i in range(23)]


def test_map_trials_independent_of_workers():
    serial = map_trials(_first_uniforms, 40, (99,), 1, chunk=7)
    assert serial == map_trials(_first_uniforms, 40, (99,), 2, chunk=7)
    assert serial == map_trials(_first_uniforms, 40, (99,), 1, chunk=40)
