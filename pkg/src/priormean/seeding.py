"""Named random substreams.

Every consumer of randomness asks for its own generator keyed by a name and
integer keys, so results never depend on call order or worker scheduling.
"""
import zlib

import numpy as np


def stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def substream(seed: int, name: str, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(stream_key(name), *map(int, keys)))
    return np.random.default_rng(ss)


def derive_seed(seed: int, name: str, *keys: int) -> int:
    """Integer seed for components that take a seed rather than a generator."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(stream_key(name), *map(int, keys)))
    return int(ss.generate_state(1, dtype=np.uint32)[0])
