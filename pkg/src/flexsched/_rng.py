"""Labelled random sub-streams derived from one root seed."""

import zlib

import numpy as np


def label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def substream(seed: int, label: str, *extra: int) -> np.random.Generator:
    """Independent generator for ``(seed, label, *extra)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(label_key(label), *map(int, extra)))
    return np.random.Generator(np.random.PCG64(ss))


def keyed_uniforms(seed: int, label: str, keys) -> np.ndarray:
    """One uniform in [0, 1) per key, each a pure function of ``(seed, label, key)``.

    Counter-style: the draw for one key never depends on which other keys are
    requested.
    """
    lk = label_key(label)
    out = np.empty(len(keys))
    for i, k in enumerate(keys):
        word = np.random.SeedSequence(entropy=int(seed), spawn_key=(lk, int(k))).generate_state(2, np.uint32)
        out[i] = ((int(word[0]) << 21) ^ (int(word[1]) >> 11)) / float(1 << 53)
    return out
