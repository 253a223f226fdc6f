"""Counter-based random streams.

Every stream is a pure function of ``(seed, tag, index)``, so results do not
depend on the order or the process in which streams are consumed.
"""

import zlib

import numpy as np


def stream(seed, tag, index=0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(zlib.crc32(str(tag).encode()), int(index)))
    return np.random.Generator(np.random.PCG64(ss))
