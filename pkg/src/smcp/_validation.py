"""Input validation helpers shared across modules."""

import math
import numbers

import numpy as np


def check_random_state(seed):
    """Turn ``seed`` into a ``numpy.random.Generator``.

    ``None`` gives fresh entropy, an int or a sequence of ints is used as a
    seed, and an existing Generator is returned unchanged.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    if isinstance(seed, (list, tuple)):
        return np.random.default_rng(list(seed))
    raise ValueError(f"{seed!r} cannot be used to seed a numpy.random.Generator")


def trial_rng(seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    """Independent stream for one trial, keyed by (master seed, trial, stream)."""
    return np.random.default_rng([int(seed), int(trial), int(stream)])


def check_probability(value, name="p", exc=ValueError) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError) as err:
        raise exc(f"{name} must be a number, got {value!r}") from err
    if math.isnan(x) or not 0.0 <= x <= 1.0:
        raise exc(f"{name} must lie in [0, 1], got {value!r}")
    return x


def check_fraction(value, name, exc=ValueError) -> float:
    """Strictly inside (0, 1)."""
    x = float(value)
    if not 0.0 < x < 1.0:
        raise exc(f"{name} must lie strictly between 0 and 1, got {value!r}")
    return x


def check_positive_int(value, name, minimum=1) -> int:
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
