import hashlib
import struct

import numpy as np

U64 = (1 << 64) - 1


def derive_seed(master, stream_label, index):
    """Stable 64-bit seed for stream ``(stream_label, index)`` under ``master``.

    Uses BLAKE2b over a fixed byte encoding, so it does not depend on
    Python's per-process hash randomization.
    """
    master = int(master) & U64
    index = int(index) & U64
    label = str(stream_label).encode("utf-8")
    payload = struct.pack("<QQ", master, index) + struct.pack("<I", len(label)) + label
    digest = hashlib.blake2b(payload, digest_size=8, person=b"rank1crit").digest()
    return struct.unpack("<Q", digest)[0]


def rng_for(seed):
    return np.random.default_rng(int(seed) & U64)
