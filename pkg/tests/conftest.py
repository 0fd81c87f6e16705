import numpy as np
import pytest

from classes.fourier_field import FourierField


class DummyQueue:
    """Collects log lines in place of a Manager queue."""

    def __init__(self):
        self.messages = []

    def put(self, message):
        self.messages.append(message)


@pytest.fixture
def log_queue():
    return DummyQueue()


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_field(rng: np.random.Generator, n_modes: int, decay: float = 0.0, scale: float = 1.0) -> FourierField:
    """Random complex amplitudes, optionally damped like k^-decay."""
    k = np.arange(1, n_modes + 1, dtype=float)
    coeffs = (rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes)) * k ** -decay
    return FourierField(scale * coeffs)


@pytest.fixture
def make_field(rng):
    def factory(n_modes: int, decay: float = 0.0, scale: float = 1.0) -> FourierField:
        return random_field(rng, n_modes, decay, scale)
    return factory


@pytest.fixture
def sin_x():
    return FourierField.from_terms([(1.0, "sin", 1)], 1)
