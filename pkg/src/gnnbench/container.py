"""Binary container shared by model checkpoints and embedding caches:
an 8-byte magic, a little-endian uint64 header length, a UTF-8 JSON header,
then raw little-endian float64 blocks in declaration order. The header's
"blocks" entry lists (name, shape) so readers can slice the payload."""

import json
import struct

import numpy as np

MAGIC = b"GNNBENCH"


def write_container(path, header, blocks):
    """blocks: ordered list of (name, ndarray)."""
    header = dict(header)
    header["blocks"] = [[name, list(arr.shape)] for name, arr in blocks]
    payload = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)
        for _, arr in blocks:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_container(path):
    """Returns (header, {name: ndarray})."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a gnnbench container")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        blocks = {}
        for name, shape in header["blocks"]:
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise ValueError(f"{path}: truncated block {name}")
            blocks[name] = np.frombuffer(raw, dtype="<f8").astype(
                np.float64).reshape(shape)
    return header, blocks
