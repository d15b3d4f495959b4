"""Reading and writing vertex-only PLY files (ASCII and binary little endian)."""

from __future__ import annotations

import os

import numpy as np

from .pointcloud import PointCloud, rgb_to_yuv, yuv_to_rgb

PLY_DTYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}
FORMATS = {"ascii": "ascii", "binary_little_endian": "binary-little-endian"}

_POSITION = ("x", "y", "z")
_RGB_ALIASES = (("red", "green", "blue"), ("r", "g", "b"))
_YUV = ("Y", "U", "V")


class PlyError(ValueError):
    """Base class for PLY parse failures."""


class PlyHeaderError(PlyError):
    pass


class PlyTypeError(PlyError):
    pass


class PlyTruncatedError(PlyError):
    pass


def _parse_header(f):
    line = f.readline()
    if line.rstrip(b"\r\n") != b"ply":
        raise PlyHeaderError("missing 'ply' magic at byte 0 (line 1)")
    fmt = None
    elements = []  # (name, count, [(prop, dtype)])
    lineno = 1
    while True:
        offset = f.tell()
        line = f.readline()
        lineno += 1
        if not line:
            raise PlyHeaderError(f"header ends before 'end_header' at byte {offset} (line {lineno})")
        try:
            words = line.decode("ascii").split()
        except UnicodeDecodeError:
            raise PlyHeaderError(f"non-ASCII header line at byte {offset} (line {lineno})") from None
        if not words or words[0] in ("comment", "obj_info"):
            continue
        where = f"at byte {offset} (line {lineno})"
        key = words[0]
        if key == "end_header":
            break
        if key == "format":
            if len(words) != 3 or words[2] != "1.0":
                raise PlyHeaderError(f"malformed format line {where}: {line!r}")
            if words[1] not in FORMATS:
                raise PlyTypeError(f"unsupported PLY format {words[1]!r} {where}")
            fmt = FORMATS[words[1]]
        elif key == "element":
            if len(words) != 3 or not words[2].isdigit():
                raise PlyHeaderError(f"malformed element line {where}: {line!r}")
            elements.append((words[1], int(words[2]), []))
        elif key == "property":
            if not elements:
                raise PlyHeaderError(f"property before any element {where}")
            if len(words) >= 2 and words[1] == "list":
                raise PlyTypeError(f"list property {' '.join(words[2:])!r} is not supported {where}")
            if len(words) != 3:
                raise PlyHeaderError(f"malformed property line {where}: {line!r}")
            if words[1] not in PLY_DTYPES:
                raise PlyTypeError(f"unsupported property type {words[1]!r} {where}")
            elements[-1][2].append((words[2], PLY_DTYPES[words[1]]))
        else:
            raise PlyHeaderError(f"unknown header keyword {key!r} {where}")
    if fmt is None:
        raise PlyHeaderError("header has no format line")
    if not elements or elements[0][0] != "vertex":
        raise PlyHeaderError("'vertex' must be the first element")
    return fmt, elements[0][1], elements[0][2], f.tell(), lineno


def _pick_columns(props):
    # names are case sensitive: position "y" and luma "Y" can coexist
    names = [p for p, _ in props]
    dtypes = dict(props)
    for axis in _POSITION:
        if axis not in names:
            raise PlyHeaderError(f"vertex element lacks property {axis!r}")
        if dtypes[axis] not in ("f4", "f8"):
            raise PlyTypeError(f"position property {axis!r} must be float or double, got {dtypes[axis]}")
    for aliases in _RGB_ALIASES:
        if all(a in names for a in aliases):
            for a in aliases:
                if dtypes[a] != "u1":
                    raise PlyTypeError(f"color property {a!r} must be uchar, got {dtypes[a]}")
            return names, [names.index(a) for a in _POSITION], [names.index(a) for a in aliases], "rgb"
    if all(a in names for a in _YUV):
        return names, [names.index(a) for a in _POSITION], [names.index(a) for a in _YUV], "yuv"
    raise PlyHeaderError("vertex element has neither red/green/blue nor Y/U/V properties")


def load_ply(path, label: str | None = None) -> PointCloud:
    """Load the vertex positions and colors of a PLY file, in file order.

    RGB colors are converted to YUV; Y/U/V properties are taken as-is.
    Other scalar vertex properties are read and ignored.
    """
    with open(path, "rb") as f:
        fmt, count, props, body_offset, header_lines = _parse_header(f)
        names, pos_cols, color_cols, space = _pick_columns(props)
        if fmt == "ascii":
            table = _read_ascii(f, count, props, header_lines, body_offset)
        else:
            table = _read_binary(f, count, props, body_offset)
    positions = table[:, pos_cols]
    colors = table[:, color_cols]
    if space == "rgb":
        colors = rgb_to_yuv(colors)
    elif colors.size and (colors.min() < 0 or colors.max() > 255):
        raise PlyError("Y/U/V values outside [0, 255]")
    return PointCloud(positions, colors, label=os.fspath(path) if label is None else label)


def _read_ascii(f, count, props, header_lines, body_offset):
    nprops = len(props)
    table = np.empty((count, nprops), dtype=np.float64)
    row = 0
    lineno = header_lines
    while row < count:
        line = f.readline()
        lineno += 1
        if not line:
            raise PlyTruncatedError(
                f"expected {count} vertices, body ends after {row} (line {lineno}, byte {f.tell()})"
            )
        words = line.split()
        if not words:
            continue
        if len(words) < nprops:
            raise PlyTruncatedError(f"vertex line {lineno} has {len(words)} values, expected {nprops}")
        try:
            table[row] = [float(w) for w in words[:nprops]]
        except ValueError:
            raise PlyError(f"non-numeric value on line {lineno}: {line!r}") from None
        row += 1
    # store each column as its declared type would, so ascii and binary agree
    for col, (name, dt) in enumerate(props):
        kind = np.dtype(dt)
        if kind.kind == "f":
            table[:, col] = table[:, col].astype(kind)
            continue
        info = np.iinfo(kind)
        bad = (table[:, col] != np.rint(table[:, col])) | (table[:, col] < info.min) | (table[:, col] > info.max)
        if bad.any():
            r = int(np.argmax(bad))
            raise PlyTypeError(f"property {name!r} of vertex {r} is not a valid {kind.name}: {table[r, col]!r}")
    return table


def _read_binary(f, count, props, body_offset):
    dtype = np.dtype([(f"p{i}", "<" + dt) for i, (_, dt) in enumerate(props)])
    need = count * dtype.itemsize
    data = f.read(need)
    if len(data) < need:
        got = len(data) // dtype.itemsize
        raise PlyTruncatedError(
            f"expected {count} vertices ({need} bytes from byte {body_offset}), "
            f"body ends at byte {body_offset + len(data)} after {got} complete vertices"
        )
    records = np.frombuffer(data, dtype=dtype, count=count)
    return np.column_stack([records[n].astype(np.float64) for n in dtype.names]) if count else (
        np.empty((0, len(props)))
    )


def save_ply(cloud: PointCloud, path, format: str = "binary-little-endian", color_space: str = "rgb") -> None:
    """Write ``cloud`` as a vertex-only PLY.

    Positions are stored as doubles so they round-trip exactly. Colors are
    rounded to 8 bits, either as red/green/blue (converted back from YUV and
    clipped to [0, 255]) or as Y/U/V when ``color_space="yuv"``.
    """
    if format not in ("ascii", "binary-little-endian"):
        raise ValueError(f"format must be 'ascii' or 'binary-little-endian', got {format!r}")
    if color_space == "rgb":
        color_names = ("red", "green", "blue")
        colors = yuv_to_rgb(cloud.colors)
    elif color_space == "yuv":
        color_names = _YUV
        colors = cloud.colors
    else:
        raise ValueError(f"color_space must be 'rgb' or 'yuv', got {color_space!r}")
    colors = np.clip(np.rint(colors), 0, 255).astype(np.uint8)

    header = ["ply", f"format {'ascii' if format == 'ascii' else 'binary_little_endian'} 1.0"]
    if cloud.label:
        header.append(f"comment {cloud.label.splitlines()[0]}")
    header.append(f"element vertex {len(cloud)}")
    header += [f"property double {a}" for a in _POSITION]
    header += [f"property uchar {c}" for c in color_names]
    header.append("end_header")
    head = ("\n".join(header) + "\n").encode("ascii")

    with open(path, "wb") as f:
        f.write(head)
        if format == "ascii":
            lines = [
                "%.17g %.17g %.17g %d %d %d\n" % (x, y, z, c0, c1, c2)
                for (x, y, z), (c0, c1, c2) in zip(cloud.positions.tolist(), colors.tolist())
            ]
            f.write("".join(lines).encode("ascii"))
        else:
            dtype = np.dtype([("x", "<f8"), ("y", "<f8"), ("z", "<f8"), ("c0", "u1"), ("c1", "u1"), ("c2", "u1")])
            rec = np.empty(len(cloud), dtype=dtype)
            rec["x"], rec["y"], rec["z"] = cloud.positions.T
            rec["c0"], rec["c1"], rec["c2"] = colors.T
            f.write(rec.tobytes())
