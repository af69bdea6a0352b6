"""Simplicial meshes: uniform intervals and masked pixel-grid triangulations.

Coordinates are dimensionless. A 2D grid image is placed with pixel
``(row, col)`` at ``x = col * spacing``, ``y = (height - 1 - row) * spacing``,
so the first image row is the top of the domain.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import EmptyMeshError, InvalidArgumentError

logger = logging.getLogger(__name__)


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def _edges(elements):
    """All (unsorted) node pairs joined by an element edge."""
    nloc = elements.shape[1]
    pairs = [(a, b) for a in range(nloc) for b in range(a + 1, nloc)]
    return np.concatenate([elements[:, [a, b]] for a, b in pairs])


def _components(n_nodes, elements):
    e = _edges(elements)
    adj = sparse.coo_matrix(
        (np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n_nodes, n_nodes))
    return csgraph.connected_components(adj, directed=False)


@dataclass(frozen=True, eq=False)
class Mesh:
    """P1 simplicial mesh (segments in 1D, triangles in 2D).

    Parameters
    ----------
    nodes : array_like, shape (n_nodes, dim)
    elements : array_like of int, shape (n_elements, dim + 1)
        Triangles must be counterclockwise.
    pixel_ids : array_like of int, optional
        Flat (row-major) pixel index each node was created from, for meshes
        built by :func:`triangulate_grid`.
    """

    nodes: np.ndarray
    elements: np.ndarray
    pixel_ids: np.ndarray | None = None
    element_measures: np.ndarray = field(init=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        elements = np.asarray(self.elements, dtype=np.int64)
        if nodes.ndim != 2 or nodes.shape[1] not in (1, 2):
            raise InvalidArgumentError("nodes must have shape (n, 1) or (n, 2)")
        dim = nodes.shape[1]
        if elements.ndim != 2 or elements.shape[1] != dim + 1 or len(elements) == 0:
            raise InvalidArgumentError(
                f"elements must have shape (m, {dim + 1}) with m >= 1")
        if not np.all(np.isfinite(nodes)):
            raise InvalidArgumentError("node coordinates must be finite")
        if elements.min() < 0 or elements.max() >= len(nodes):
            raise InvalidArgumentError("element refers to a non-existent node")
        srt = np.sort(elements, axis=1)
        if np.any(srt[:, 1:] == srt[:, :-1]):
            raise InvalidArgumentError("element with repeated node")

        measures = _signed_measures(nodes, elements)
        if np.any(measures <= 0):
            bad = int(np.argmin(measures))
            what = "non-positive length" if dim == 1 else "clockwise or degenerate triangle"
            raise InvalidArgumentError(f"element {bad}: {what}")
        used = np.zeros(len(nodes), dtype=bool)
        used[elements.ravel()] = True
        if not used.all():
            raise InvalidArgumentError("mesh has nodes not attached to any element")
        ncomp, _ = _components(len(nodes), elements)
        if ncomp != 1:
            raise InvalidArgumentError(f"mesh is not connected ({ncomp} components)")

        object.__setattr__(self, "nodes", _readonly(nodes))
        object.__setattr__(self, "elements", _readonly(elements))
        object.__setattr__(self, "element_measures", _readonly(measures))
        if self.pixel_ids is not None:
            pid = np.asarray(self.pixel_ids, dtype=np.int64)
            if pid.shape != (len(nodes),):
                raise InvalidArgumentError("pixel_ids must have one entry per node")
            object.__setattr__(self, "pixel_ids", _readonly(pid))

    @property
    def dim(self):
        return self.nodes.shape[1]

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def measure(self):
        """Total length/area of the meshed region."""
        return float(math.fsum(self.element_measures))

    def __repr__(self):
        return f"Mesh(dim={self.dim}, n_nodes={self.n_nodes}, n_elements={self.n_elements})"


def _signed_measures(nodes, elements):
    if nodes.shape[1] == 1:
        return nodes[elements[:, 1], 0] - nodes[elements[:, 0], 0]
    p0, p1, p2 = (nodes[elements[:, i]] for i in range(3))
    d1, d2 = p1 - p0, p2 - p0
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def build_interval_mesh(n_elements, a=0.0, b=1.0):
    """Uniform partition of ``[a, b]`` into ``n_elements`` segments."""
    if not (math.isfinite(a) and math.isfinite(b)):
        raise InvalidArgumentError("interval bounds must be finite")
    if a >= b:
        raise InvalidArgumentError(f"need a < b, got a={a}, b={b}")
    if int(n_elements) != n_elements or n_elements < 1:
        raise InvalidArgumentError("n_elements must be a positive integer")
    n = int(n_elements)
    nodes = a + (b - a) * np.arange(n + 1) / n
    nodes[-1] = b
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    return Mesh(nodes[:, None], elements)


def mesh_size(mesh):
    """Largest element diameter ``h``."""
    if mesh.dim == 1:
        return float(mesh.element_measures.max())
    p = mesh.nodes[mesh.elements]
    lengths = [np.linalg.norm(p[:, i] - p[:, j], axis=1) for i, j in ((0, 1), (1, 2), (0, 2))]
    return float(np.max(lengths))


@dataclass(frozen=True, eq=False)
class GridImage:
    """Grayscale scalar image, stored as a (height, width) array."""

    intensities: np.ndarray
    pixel_spacing: float = 1.0

    def __post_init__(self):
        a = np.array(self.intensities, dtype=float)
        if a.ndim != 2 or a.size == 0:
            raise InvalidArgumentError("intensities must be a non-empty 2D array")
        if not np.all(np.isfinite(a)) or np.any(a < 0):
            raise InvalidArgumentError("intensities must be finite and non-negative")
        if not (math.isfinite(self.pixel_spacing) and self.pixel_spacing > 0):
            raise InvalidArgumentError("pixel_spacing must be positive")
        object.__setattr__(self, "intensities", _readonly(a))
        object.__setattr__(self, "pixel_spacing", float(self.pixel_spacing))

    @classmethod
    def from_flat(cls, width, height, values, pixel_spacing=1.0):
        values = np.asarray(values, dtype=float)
        if values.size != width * height:
            raise InvalidArgumentError(
                f"expected {width * height} intensities, got {values.size}")
        return cls(values.reshape(height, width), pixel_spacing)

    @property
    def height(self):
        return self.intensities.shape[0]

    @property
    def width(self):
        return self.intensities.shape[1]


def read_csv_image(path, pixel_spacing=1.0):
    """Comma-separated intensities, one image row per line."""
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    return GridImage(data, pixel_spacing)


def _pgm_tokens(buf, count, pos):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    n = len(buf)
    while len(out) < count:
        while pos < n and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos:pos + 1] == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise InvalidArgumentError("truncated PGM header")
        out.append(buf[start:pos])
    return out, pos


def read_pgm(path, pixel_spacing=1.0):
    """Read an ASCII (P2) or binary (P5) PGM, returning values / maxval.

    Division by maxval is exact; 16-bit P5 data is big-endian per the
    netpbm format.
    """
    buf = Path(path).read_bytes()
    (magic, w, h, maxval), pos = _pgm_tokens(buf, 4, 0)
    w, h, maxval = int(w), int(h), int(maxval)
    if not (0 < maxval < 65536) or w <= 0 or h <= 0:
        raise InvalidArgumentError(f"bad PGM header in {path}")
    if magic == b"P2":
        data = np.array(buf[pos:].split()[: w * h], dtype=float)
    elif magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        start = pos + 1  # single whitespace after maxval
        data = np.frombuffer(buf, dtype=dtype, count=w * h, offset=start).astype(float)
    else:
        raise InvalidArgumentError(f"{path}: not a P2/P5 PGM file")
    if data.size != w * h:
        raise InvalidArgumentError(f"{path}: expected {w * h} pixels, found {data.size}")
    return GridImage(data.reshape(h, w) / maxval, pixel_spacing)


def read_image(path, pixel_spacing=1.0):
    """Dispatch on file extension (``.pgm`` or CSV otherwise)."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return read_pgm(path, pixel_spacing)
    return read_csv_image(path, pixel_spacing)


def triangulate_grid(image, threshold=0.0):
    """Triangulate the cells of ``image`` whose four corners exceed ``threshold``.

    Each retained cell is split along its lower-left to upper-right diagonal.
    Only the largest connected piece is returned (ties go to the piece
    containing the lowest pixel index). Node order follows row-major pixel
    order, so the result is deterministic.
    """
    if not (math.isfinite(threshold) and threshold >= 0):
        raise InvalidArgumentError("threshold must be finite and >= 0")
    v = image.intensities
    h, w = v.shape
    ok = v > threshold
    cells = ok[:-1, :-1] & ok[:-1, 1:] & ok[1:, :-1] & ok[1:, 1:]
    ci, cj = np.nonzero(cells)
    if len(ci) == 0:
        raise EmptyMeshError(f"no grid cell has all corners above threshold {threshold}")

    ul = ci * w + cj
    ur = ul + 1
    ll = ul + w
    lr = ll + 1
    tris = np.concatenate([
        np.column_stack([ll, lr, ur]),
        np.column_stack([ll, ur, ul]),
    ])
    # interleave so the two halves of a cell are adjacent
    order = np.arange(2 * len(ci)).reshape(2, -1).T.ravel()
    tris = tris[order]

    pixels, local = np.unique(tris, return_inverse=True)
    local = local.reshape(tris.shape)
    ncomp, labels = _components(len(pixels), local)
    if ncomp > 1:
        sizes = np.bincount(labels)
        keep = int(np.argmax(sizes))
        logger.info("triangulate_grid: keeping component of %d nodes out of %d components",
                    sizes[keep], ncomp)
        tri_keep = labels[local[:, 0]] == keep
        tris = tris[tri_keep]
        pixels, local = np.unique(tris, return_inverse=True)
        local = local.reshape(tris.shape)

    s = image.pixel_spacing
    rows, cols = np.divmod(pixels, w)
    nodes = np.column_stack([cols * s, (h - 1 - rows) * s]).astype(float)
    return Mesh(nodes, local, pixel_ids=pixels)
