"""Named random-number streams derived from a single root seed.

Every stochastic operation in the package takes an explicit seed and maps
it to an independent numpy Generator through a named route, so adding or
reordering parallel work never changes results.
"""

from __future__ import annotations

import zlib

import numpy as np

RouteName = str | int


def _route_key(route: tuple[RouteName, ...]) -> tuple[int, ...]:
    key = []
    for part in route:
        if isinstance(part, (int, np.integer)):
            if part < 0:
                raise ValueError(f"route integers must be nonnegative, got {part}")
            key.append(int(part) % 2**32)
        else:
            key.append(zlib.crc32(str(part).encode("utf-8")))
    return tuple(key)


def stream_seed(root_seed: int, *route: RouteName) -> np.random.SeedSequence:
    """Derive a child SeedSequence for the stream named by ``route``."""
    return np.random.SeedSequence(entropy=int(root_seed), spawn_key=_route_key(route))


def stream_rng(root_seed: int, *route: RouteName) -> np.random.Generator:
    """Generator for the named stream; stable across platforms and runs."""
    return np.random.default_rng(stream_seed(root_seed, *route))


def as_generator(seed: int | np.random.Generator | np.random.SeedSequence) -> np.random.Generator:
    """Accept either a raw seed or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
