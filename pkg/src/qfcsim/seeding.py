"""Deterministic sub-seed derivation.

Every stochastic stage gets its own seed, computed as the first eight bytes
(big endian, top bit cleared) of SHA-256 over ``"<master>/<label>/..."``.
"""

import hashlib


def derive_seed(master: int, *labels) -> int:
    key = "/".join([str(int(master))] + [str(x) for x in labels]).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") & 0x7FFF_FFFF_FFFF_FFFF
