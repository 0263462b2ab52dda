import struct

import numpy as np

from ttrnn.errors import FormatError


def write_struct(fh, fmt, *values):
    fh.write(struct.pack("<" + fmt, *values))


def read_struct(fh, fmt, what="record"):
    fmt = "<" + fmt
    size = struct.calcsize(fmt)
    buf = fh.read(size)
    if len(buf) != size:
        raise FormatError(f"Truncated {what} in {_name(fh)}")
    values = struct.unpack(fmt, buf)
    return values if len(values) > 1 else values[0]


def write_array(fh, arr, dtype="<f8"):
    fh.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def read_array(fh, shape, dtype="<f8", what="array"):
    dtype = np.dtype(dtype)
    count = int(np.prod(shape, dtype=np.int64))
    buf = fh.read(count * dtype.itemsize)
    if len(buf) != count * dtype.itemsize:
        raise FormatError(f"Truncated {what} in {_name(fh)}")
    return np.frombuffer(buf, dtype=dtype).astype(np.float64).reshape(shape)


def write_string(fh, text):
    raw = text.encode("utf-8")
    write_struct(fh, "H", len(raw))
    fh.write(raw)


def read_string(fh, what="string"):
    length = read_struct(fh, "H", what)
    raw = fh.read(length)
    if len(raw) != length:
        raise FormatError(f"Truncated {what} in {_name(fh)}")
    return raw.decode("utf-8")


def _name(fh):
    return getattr(fh, "name", "<stream>")
