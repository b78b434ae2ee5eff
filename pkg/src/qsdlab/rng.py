"""Counter-based random numbers keyed by (seed, path, step, lane).

Every uniform is a pure function of its coordinates, so any path can be
replayed in isolation and results do not depend on how paths are scheduled.
The mixer is the splitmix64 finaliser.
"""
from __future__ import annotations

import math

import numba as nb
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_LANE = np.uint64(0xD1B54A32D192ED03)
_PATH = np.uint64(0x632BE59BD9B4E019)
_MASK64 = (1 << 64) - 1


@nb.njit(inline="always", cache=True)
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@nb.njit(inline="always", cache=True)
def path_key(seed, path):
    return mix64(np.uint64(seed) ^ mix64(np.uint64(path) + _PATH))


@nb.njit(inline="always", cache=True)
def uniform(key, step, lane):
    """Uniform on the open interval (0, 1)."""
    r = mix64(mix64(key ^ (np.uint64(step) * _GOLDEN)) + np.uint64(lane) * _LANE)
    return (np.float64(r >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)


@nb.njit(inline="always", cache=True)
def cms_symmetric(alpha, u1, u2):
    """Chambers-Mallows-Stuck: standard symmetric stable variate, E e^{iuS} = e^{-|u|^alpha}."""
    v = math.pi * (u1 - 0.5)
    w = -math.log(u2)
    return (math.sin(alpha * v) / math.cos(v) ** (1.0 / alpha)
            * (math.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))


@nb.njit(cache=True)
def _stable_block(alpha, seed, stream, n):
    key = path_key(seed, stream)
    out = np.empty(n)
    for i in range(n):
        out[i] = cms_symmetric(alpha, uniform(key, i, 0), uniform(key, i, 1))
    return out


def stable_samples(alpha: float, n: int, seed: int, stream: int = 0) -> np.ndarray:
    """n standard symmetric alpha-stable variates from stream ``stream`` of ``seed``."""
    return _stable_block(float(alpha), np.uint64(int(seed) & _MASK64), np.uint64(stream), int(n))


class CounterStream:
    """A single stream with an explicit step counter; each draw consumes one step."""

    def __init__(self, seed: int, stream: int = 0):
        # jitted functions hand uint64 back as a Python int, which would be retyped as int64
        self.key = np.uint64(path_key(np.uint64(int(seed) & _MASK64), np.uint64(stream)))
        self.step = 0

    def uniforms(self) -> tuple[float, float]:
        k = np.uint64(self.step)
        self.step += 1
        return uniform(self.key, k, np.uint64(0)), uniform(self.key, k, np.uint64(1))


def sample_stable_increment(alpha: float, dt: float, state: CounterStream) -> float:
    """dt^(1/alpha) S with S standard symmetric alpha-stable; advances ``state``."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    u1, u2 = state.uniforms()
    if dt == 0:
        return 0.0
    return dt ** (1.0 / alpha) * cms_symmetric(float(alpha), u1, u2)
