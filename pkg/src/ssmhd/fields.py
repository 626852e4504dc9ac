"""Uniform cubic grids, sampled fields, radial tapers and SSMHD1 persistence."""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import check_positive
from .errors import FormatError, SamplingError, UsageError

MAGIC = b"SSMHD1\x00\x00"
_HEADER = struct.Struct("<8sIId")


@dataclass(frozen=True)
class Grid3:
    """Node-centred grid on [-l, l)^3 with ``n`` points per axis; the origin is node n/2."""

    n: int
    l: float

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 16 or n & (n - 1):
            raise UsageError(f"grid size n must be a power of two >= 16, got {n!r}")
        check_positive(self.l, "grid half-width l")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "l", float(self.l))

    @property
    def h(self):
        return 2.0 * self.l / self.n

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @property
    def axis(self):
        return -self.l + self.h * np.arange(self.n)

    @property
    def cell_volume(self):
        return self.h**3

    def coords(self):
        """Sparse broadcastable coordinate arrays (x1, x2, x3)."""
        a = self.axis
        return a[:, None, None], a[None, :, None], a[None, None, :]

    def points(self):
        x1, x2, x3 = np.broadcast_arrays(*self.coords())
        return np.stack([x1, x2, x3], axis=-1)

    def radius(self):
        x1, x2, x3 = self.coords()
        return np.sqrt(x1 * x1 + x2 * x2 + x3 * x3)

    def ravel_index(self, i, j, k):
        """Linear index in the x-fastest file layout."""
        return i + self.n * (j + self.n * k)

    def unravel_index(self, idx):
        idx = np.asarray(idx)
        return idx % self.n, (idx // self.n) % self.n, idx // (self.n * self.n)


class Field:
    """Immutable sampled field: ``data`` has shape (ncomp, n, n, n), axes (component, x1, x2, x3)."""

    ncomp = None

    def __init__(self, grid, data, taper=None, copy=True):
        # copy=False adopts (and freezes) a float64 array the caller owns
        data = np.array(data, dtype=np.float64, copy=copy)
        if data.ndim == 3:
            data = data[None]
        if data.shape[1:] != grid.shape:
            raise UsageError(f"data shape {data.shape} does not match grid {grid.shape}")
        if self.ncomp is not None and data.shape[0] != self.ncomp:
            raise UsageError(f"{type(self).__name__} needs {self.ncomp} components, got {data.shape[0]}")
        if not np.all(np.isfinite(data)):
            raise UsageError("field values must be finite")
        data.setflags(write=False)
        self.grid = grid
        self.data = data
        self.taper = taper

    def __repr__(self):
        return f"{type(self).__name__}(n={self.grid.n}, l={self.grid.l})"

    def __len__(self):
        return self.data.shape[0]

    def __getitem__(self, c):
        return self.data[c]

    def like(self, data, taper=None):
        return field_from_array(self.grid, data, taper=taper)

    def __add__(self, other):
        return self.like(self.data + _data(other))

    def __sub__(self, other):
        return self.like(self.data - _data(other))

    def __neg__(self):
        return self.like(-self.data)

    def __mul__(self, c):
        return self.like(self.data * c)

    __rmul__ = __mul__

    def norm(self):
        """Pointwise Euclidean (Frobenius for tensors) magnitude."""
        return np.sqrt(np.sum(self.data**2, axis=0))

    def sup(self):
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def l2(self):
        return float(np.sqrt(np.sum(self.data**2) * self.grid.cell_volume))


class ScalarField(Field):
    ncomp = 1

    @property
    def values(self):
        return self.data[0]


class VectorField(Field):
    ncomp = 3


class TensorField(Field):
    """Rank-two tensor; component ``3*i + j`` holds T_ij."""

    ncomp = 9

    def component(self, i, j):
        return self.data[3 * i + j]

    def transpose(self):
        idx = [3 * j + i for i in range(3) for j in range(3)]
        return TensorField(self.grid, self.data[idx])

    def is_antisymmetric(self, tol=1e-12):
        return bool(np.max(np.abs(self.data + self.transpose().data), initial=0.0) <= tol)

    def is_symmetric(self, tol=0.0):
        return bool(np.max(np.abs(self.data - self.transpose().data), initial=0.0) <= tol)


_KINDS = {1: ScalarField, 3: VectorField, 9: TensorField}


def field_from_array(grid, data, taper=None, copy=True):
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 3:
        data = data[None]
    try:
        cls = _KINDS[data.shape[0]]
    except KeyError:
        raise UsageError(f"unsupported component count {data.shape[0]}") from None
    return cls(grid, data, taper=taper, copy=copy)


def _data(other):
    return other.data if isinstance(other, Field) else other


def sample(fn, grid, chunk=1 << 20):
    """Sample ``fn`` at every node.  ``fn`` maps (N, 3) positions to (N,), (N, 3) or (N, 3, 3)."""
    pts = grid.points().reshape(-1, 3)
    parts = []
    for start in range(0, pts.shape[0], chunk):
        block = pts[start:start + chunk]
        val = np.asarray(fn(block), dtype=np.float64)
        if val.ndim == 0:
            val = np.full(block.shape[0], float(val))
        val = val.reshape(block.shape[0], -1)
        bad = ~np.all(np.isfinite(val), axis=1)
        if bad.any():
            where = block[np.argmax(bad)]
            raise SamplingError(f"non-finite sample at x = {tuple(where)}", coordinate=tuple(where))
        parts.append(val)
    vals = np.concatenate(parts, axis=0)
    data = vals.T.reshape((vals.shape[1],) + grid.shape)
    return field_from_array(grid, data)


def bump(r, r_core, r_cut):
    """C-infinity radial cutoff: 1 on [0, r_core], 0 on [r_cut, inf)."""
    u = np.clip((np.asarray(r, dtype=float) - r_core) / (r_cut - r_core), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u < 1.0, np.exp(-1.0 / np.where(u < 1.0, 1.0 - u, 1.0)), 0.0)
        b = np.where(u > 0.0, np.exp(-1.0 / np.where(u > 0.0, u, 1.0)), 0.0)
    return a / (a + b)


def check_taper_radii(grid, r_core, r_cut):
    if not 0 < r_core < r_cut <= grid.l:
        raise UsageError(f"need 0 < r_core < r_cut <= L, got r_core={r_core}, r_cut={r_cut}, L={grid.l}")


def taper(field, r_core, r_cut):
    """Multiply by a smooth radial cutoff; a field already tapered with the same radii is returned as is."""
    check_taper_radii(field.grid, r_core, r_cut)
    radii = (float(r_core), float(r_cut))
    if field.taper == radii:
        return field
    w = bump(field.grid.radius(), *radii)
    return field_from_array(field.grid, field.data * w, taper=radii, copy=False)


def write_field(field, path):
    path = Path(path)
    ncomp, n = field.data.shape[0], field.grid.n
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, ncomp, n, field.grid.l))
        for c in range(ncomp):
            # x-fastest: transpose (x1, x2, x3) -> (x3, x2, x1) in C order
            fh.write(np.ascontiguousarray(field.data[c].T).astype("<f8").tobytes())


def read_field(path):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError("file too short for SSMHD1 header")
    magic, ncomp, n, l = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if ncomp not in _KINDS:
        raise FormatError(f"unsupported component count {ncomp}")
    payload = raw[_HEADER.size:]
    expected = ncomp * n**3 * 8
    if len(payload) != expected:
        raise FormatError(f"payload has {len(payload)} bytes, header implies {expected}")
    try:
        grid = Grid3(n, l)
    except UsageError as exc:
        raise FormatError(f"invalid grid in header: {exc}") from None
    data = np.frombuffer(payload, dtype="<f8").reshape(ncomp, n, n, n).transpose(0, 3, 2, 1)
    return field_from_array(grid, data.astype(np.float64))
