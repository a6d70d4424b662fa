"""
Named random streams.

Every command takes one integer seed. Sub-tasks (prototype draws, bit
flips, mixing-weight init, component init, fold shuffles) each get their
own generator, derived from the seed and a tuple of names, so adding a
draw in one place never shifts the numbers another place sees.
"""
from __future__ import annotations
import zlib
from typing import Union

import numpy as np

Seed = Union[int, np.random.Generator]


def _name_key(name: Union[str, int]) -> int:
    if isinstance(name, (int, np.integer)):
        return int(name)
    return zlib.crc32(str(name).encode("utf-8"))


def stream(seed: int, *names: Union[str, int]) -> np.random.Generator:
    """Generator for the sub-task identified by `names` under `seed`."""
    key = tuple(_name_key(n) for n in names)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def derive_seed(seed: int, *names: Union[str, int]) -> int:
    """Integer child seed, for handing to code that takes a plain seed."""
    key = tuple(_name_key(n) for n in names)
    state = np.random.SeedSequence(int(seed), spawn_key=key).generate_state(1, dtype=np.uint32)
    return int(state[0])


def as_generator(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(int(seed))
