"""Text field files and JSON reports, written atomically.

Field file::

    # N=<int> R=<float> M=<int>
    r_0 value_0 [value_0']
    ...

One value column for a scalar field, two for a state pair.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .energy import StatePair
from .errors import GridMismatch
from .radial import RadialField, build_grid

_HEADER = re.compile(r"#\s*N=(\d+)\s+R=(\S+)\s+M=(\d+)")


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_field(path, u) -> None:
    """Write a RadialField or StatePair in full double precision."""
    if isinstance(u, StatePair):
        grid, cols = u.grid, u.stack()
    else:
        grid, cols = u.grid, u.values[None, :]
    lines = [f"# N={grid.N} R={grid.R!r} M={grid.M}"]
    for i, r in enumerate(grid.r):
        lines.append(" ".join(f"{x:.17g}" for x in (r, *cols[:, i])))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_field(path):
    """Read a field file; returns a RadialField (one column) or a StatePair (two)."""
    with open(path) as fh:
        head = fh.readline()
    m = _HEADER.match(head.strip())
    if not m:
        raise ValueError(f"{path}: missing '# N=.. R=.. M=..' header")
    grid = build_grid(int(m.group(1)), float(m.group(2)), int(m.group(3)))
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[0] != grid.M:
        raise GridMismatch(f"{path}: header says M={grid.M}, file has {data.shape[0]} rows")
    if not np.allclose(data[:, 0], grid.r, rtol=1e-14, atol=0):
        raise GridMismatch(f"{path}: node positions do not match the header grid")
    if data.shape[1] == 2:
        return RadialField(grid, data[:, 1])
    if data.shape[1] == 3:
        return StatePair.from_array(grid, data[:, 1:].T)
    raise ValueError(f"{path}: expected 2 or 3 columns, found {data.shape[1]}")


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def write_json(path, obj) -> None:
    _atomic_write(path, dumps(obj))
