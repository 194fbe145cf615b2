"""Flat binary and CSV time-tag files for photon streams.

Binary layout (little endian)::

    header   magic b"QFCTTAG1"       8 bytes
             version                 u32
             seed (-1 = none)        i64
             params hash             16 bytes ASCII, zero padded
             duration (s)            f64
             record count            u64
    record   timestamp (ps)          u64
             wavelength (nm)         f64
             origin                  u8

Timestamps are quantized to 1 ps on export.  Importing and re-exporting a
file reproduces it byte for byte.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from .source import Origin, PhotonStream

MAGIC = b"QFCTTAG1"
VERSION = 1
_HEADER = struct.Struct("<8sIq16sdQ")
RECORD_DTYPE = np.dtype([("timestamp_ps", "<u8"), ("wavelength_nm", "<f8"), ("origin", "u1")])


def _to_ps(time_ns):
    if len(time_ns) and np.min(time_ns) < 0:
        raise ValueError("negative timestamps cannot be exported")
    return np.rint(np.asarray(time_ns) * 1e3).astype(np.uint64)


def write_binary(stream: PhotonStream, path) -> None:
    seed = -1 if stream.seed is None else int(stream.seed)
    header = _HEADER.pack(MAGIC, VERSION, seed, stream.params_hash.encode().ljust(16, b"\0")[:16],
                          float(stream.duration_s), len(stream))
    rec = np.empty(len(stream), RECORD_DTYPE)
    rec["timestamp_ps"] = _to_ps(stream.time_ns)
    rec["wavelength_nm"] = stream.wavelength_nm
    rec["origin"] = stream.origin
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rec.tobytes())


def read_binary(path) -> PhotonStream:
    data = Path(path).read_bytes()
    magic, version, seed, phash, duration, n = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a time-tag file (bad magic {magic!r})")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported time-tag version {version}")
    rec = np.frombuffer(data, RECORD_DTYPE, count=n, offset=_HEADER.size)
    return PhotonStream(
        time_ns=rec["timestamp_ps"] / 1e3,
        wavelength_nm=rec["wavelength_nm"],
        origin=rec["origin"],
        duration_s=duration,
        seed=None if seed == -1 else seed,
        params_hash=phash.rstrip(b"\0").decode(),
    )


def write_csv(stream: PhotonStream, path) -> None:
    buf = io.StringIO()
    buf.write(f"# seed={'' if stream.seed is None else stream.seed}\n")
    buf.write(f"# params_hash={stream.params_hash}\n")
    buf.write(f"# duration_s={float(stream.duration_s)!r}\n")
    buf.write("timestamp_ps,wavelength_nm,origin\n")
    names = [o.name.lower() for o in Origin]
    for ps, lam, o in zip(_to_ps(stream.time_ns).tolist(), stream.wavelength_nm.tolist(), stream.origin.tolist()):
        buf.write(f"{ps},{lam!r},{names[o]}\n")
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> PhotonStream:
    meta = {}
    ps, lam, origin = [], [], []
    lookup = {o.name.lower(): int(o) for o in Origin}
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
            elif line.startswith("timestamp_ps"):
                continue
            elif line.strip():
                a, b, c = line.rstrip("\n").split(",")
                ps.append(int(a))
                lam.append(float(b))
                origin.append(lookup[c])
    return PhotonStream(
        time_ns=np.array(ps, dtype=np.uint64) / 1e3,
        wavelength_nm=np.array(lam, dtype=float),
        origin=np.array(origin, dtype=np.uint8),
        duration_s=float(meta.get("duration_s", "0")),
        seed=int(meta["seed"]) if meta.get("seed") else None,
        params_hash=meta.get("params_hash", ""),
    )
