"""Raw field dumps and snapshot directories.

A raw dump is a one-line ASCII header ``dim n1 n2 n3 ncomp time`` followed
by little-endian float64 samples, row-major over grid points with the
components innermost. Two-dimensional grids write n3 = 1.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import SnapshotIOError
from .grid import Grid
from .stepper import State

DTYPE = np.dtype("<f8")
FIELD_FILES = {"rho": "rho.raw", "u": "u.raw", "F": "F.raw"}
INDEX_FILE = "snapshots.index"
META_FILE = "grid.meta"


def _components_last(grid, f):
    ncomp_axes = f.ndim - grid.dim
    data = f.reshape((-1,) + grid.shape) if ncomp_axes else f[None]
    return np.moveaxis(data, 0, -1), data.shape[0]


def encode_raw(grid, f, t):
    data, ncomp = _components_last(grid, f)
    n = list(grid.n) + [1] * (3 - grid.dim)
    header = f"{grid.dim} {n[0]} {n[1]} {n[2]} {ncomp} {float(t)!r}\n".encode("ascii")
    return header + np.ascontiguousarray(data, dtype=DTYPE).tobytes()


def write_raw(path, grid, f, t):
    try:
        with open(path, "wb") as fh:
            fh.write(encode_raw(grid, f, t))
    except OSError as exc:
        raise SnapshotIOError(f"cannot write {path}: {exc.strerror}", path=str(path)) from exc


def read_raw(path):
    """Return (dim, n tuple, ncomp, time, data) with data shaped
    (*component axes, *grid shape); component axes are () for 1, (d,) for d
    and (d, d) for d*d components."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise SnapshotIOError(f"cannot read {path}: {exc.strerror}", path=str(path)) from exc
    head, sep, body = blob.partition(b"\n")
    try:
        parts = head.decode("ascii").split()
        dim, n1, n2, n3, ncomp = (int(p) for p in parts[:5])
        t = float(parts[5])
        if len(parts) != 6 or dim not in (2, 3):
            raise ValueError
    except (ValueError, IndexError, UnicodeDecodeError):
        raise SnapshotIOError(f"{path}: malformed raw-dump header", path=str(path)) from None
    n = (n1, n2, n3)[:dim]
    count = int(np.prod(n)) * ncomp
    if not sep or len(body) != count * DTYPE.itemsize:
        raise SnapshotIOError(f"{path}: expected {count} float64 samples, found {len(body) / 8:g}", path=str(path))
    data = np.frombuffer(body, dtype=DTYPE).reshape(n + (ncomp,))
    data = np.moveaxis(data, -1, 0).astype(np.float64)
    if ncomp == 1:
        data = data[0]
    elif ncomp == dim * dim:
        data = data.reshape((dim, dim) + n)
    elif ncomp != dim:
        raise SnapshotIOError(f"{path}: {ncomp} components fit neither scalar, vector nor tensor", path=str(path))
    return dim, n, ncomp, t, data


def write_snapshot(state, directory, index):
    """Write ``directory/snapshot_<index>/{rho,u,F}.raw`` and append a
    manifest line ``index time subdir`` to ``directory/snapshots.index``."""
    grid = state.grid
    sub = f"snapshot_{index}"
    target = Path(directory) / sub
    try:
        target.mkdir(parents=True, exist_ok=True)
        (target / META_FILE).write_text(" ".join(repr(L) for L in grid.length) + "\n", encoding="ascii")
    except OSError as exc:
        raise SnapshotIOError(f"cannot create {target}: {exc.strerror}", path=str(target)) from exc
    for name, fname in FIELD_FILES.items():
        write_raw(target / fname, grid, getattr(state, name), state.t)
    manifest = Path(directory) / INDEX_FILE
    try:
        with open(manifest, "a", encoding="ascii") as fh:
            fh.write(f"{index} {float(state.t)!r} {sub}\n")
    except OSError as exc:
        raise SnapshotIOError(f"cannot append to {manifest}: {exc.strerror}", path=str(manifest)) from exc
    return target


def read_snapshot(path):
    path = Path(path)
    if not path.is_dir():
        raise SnapshotIOError(f"snapshot directory {path} does not exist", path=str(path))
    fields = {name: read_raw(path / fname) for name, fname in FIELD_FILES.items()}
    dim, n, _, t, _ = fields["rho"]
    if any(fields[k][:2] != (dim, n) for k in fields) or any(fields[k][3] != t for k in fields):
        raise SnapshotIOError(f"{path}: field dumps disagree on grid or time", path=str(path))
    meta = path / META_FILE
    length = (2 * np.pi,) * dim
    if meta.exists():
        length = tuple(float(x) for x in meta.read_text(encoding="ascii").split())
    grid = Grid(dim, n, length)
    return State(t, fields["rho"][4], fields["u"][4], fields["F"][4], grid)


def read_state_files(grid, rho_file, u_file, F_file):
    """Initial state from user-supplied raw dumps, checked against ``grid``."""
    out = {}
    for name, path, ncomp in (("rho", rho_file, 1), ("u", u_file, grid.dim), ("F", F_file, grid.dim**2)):
        dim, n, nc, t, data = read_raw(os.fspath(path))
        if dim != grid.dim or n != grid.n or nc != ncomp:
            raise SnapshotIOError(
                f"{path}: dump has dim {dim}, n {n}, {nc} components; the run needs dim {grid.dim}, n {grid.n}, "
                f"{ncomp} components",
                path=str(path),
            )
        out[name] = data
    return State(0.0, out["rho"], out["u"], out["F"], grid).validate()
