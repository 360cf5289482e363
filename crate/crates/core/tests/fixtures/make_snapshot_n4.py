"""Writes snapshot_n4.mkg4 byte by byte with explicit little-endian packing."""
import struct

N = 4
L, T, MASS = 8.0, 0.25, 0.5


def value(field, index):
    return (field * 256 + index) / 64.0 - 17.0


with open("snapshot_n4.mkg4", "wb") as out:
    out.write(b"MKG4")
    out.write(struct.pack("<I", 1))
    out.write(struct.pack("<Q", N))
    out.write(struct.pack("<ddd", L, T, MASS))
    for field in range(12):
        out.write(struct.pack("<%dd" % N**4, *(value(field, i) for i in range(N**4))))
