"""Gaussian random projection of a dataset's feature matrix.

The projection matrix R is d x m with iid N(0, 1) entries; the sketched
features are R' X / sqrt(m), so inner products are preserved in
expectation (E[R R'/m] = I).  Sampling uses NumPy's PCG64 generator
(``numpy.random.default_rng``) with float64 ``standard_normal``, which is
stable across platforms for a fixed NumPy major version; the seed is
recorded so any sketch can be rebuilt exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .data import Dataset

__all__ = [
    "ProjectionSketch",
    "gaussian_matrix",
    "project",
    "gaussian_sketch",
    "identity_sketch",
    "save_sketch",
    "load_sketch",
]

SKETCH_MAGIC = b"SKB1"
_HEADER = struct.Struct("<4sIII")  # magic, d, m, seed: 16 bytes


@dataclass(frozen=True)
class ProjectionSketch:
    """A projection matrix together with the sketched features it produced.

    ``seed`` is None for injected (non-Gaussian) matrices; otherwise
    ``gaussian_matrix(d, m, seed)`` reproduces ``matrix_r`` exactly.
    """

    matrix_r: np.ndarray
    m: int
    seed: int | None
    sketched_features: np.ndarray


def gaussian_matrix(d: int, m: int, seed: int) -> np.ndarray:
    """d x m matrix of iid standard normals, deterministic per seed."""
    if d < 1 or m < 1:
        raise ValueError("projection dimensions must be positive")
    return np.random.default_rng(seed).standard_normal((d, m))


def project(data: Dataset, r_matrix: np.ndarray, m: int, seed: int | None = None) -> ProjectionSketch:
    """Sketch a dataset through a given projection matrix.

    ``r_matrix`` may be any d x m matrix, which lets tests inject
    deterministic projections (for example sqrt(m) * I, which makes the
    sketch exact).  The input dataset is not modified.
    """
    r_matrix = np.asarray(r_matrix, dtype=float)
    if r_matrix.shape != (data.d, m):
        raise ValueError(
            f"projection matrix must be {data.d} x {m}, got {r_matrix.shape}"
        )
    sketched = (r_matrix.T @ data.features) / np.sqrt(m)
    return ProjectionSketch(matrix_r=r_matrix, m=m, seed=seed, sketched_features=sketched)


def gaussian_sketch(data: Dataset, m: int, seed: int) -> ProjectionSketch:
    """Sample a fresh Gaussian projection for ``data`` and apply it."""
    return project(data, gaussian_matrix(data.d, m, seed), m, seed)


def identity_sketch(data: Dataset) -> ProjectionSketch:
    """The exact sketch R = sqrt(m) I with m = d; useful as a smoke oracle."""
    m = data.d
    return project(data, np.sqrt(m) * np.eye(data.d), m, seed=None)


def save_sketch(path, sk: ProjectionSketch) -> None:
    """Persist the projection matrix: 16-byte header then column-major float64.

    The header packs (magic, d, m, seed) as little-endian uint32 fields, so
    the seed must fit in 32 bits; injected sketches (seed None) store 0.
    """
    d = sk.matrix_r.shape[0]
    seed = 0 if sk.seed is None else int(sk.seed)
    if not 0 <= seed < 2**32:
        raise ValueError("sketch file seeds must fit in an unsigned 32-bit field")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SKETCH_MAGIC, d, sk.m, seed))
        fh.write(np.asfortranarray(sk.matrix_r).tobytes(order="F"))


def load_sketch(path, data: Dataset) -> ProjectionSketch:
    """Load a persisted projection and re-derive the sketched features."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ValueError(f"truncated sketch file: {path}")
        magic, d, m, seed = _HEADER.unpack(raw)
        if magic != SKETCH_MAGIC:
            raise ValueError(f"not a sketch file (bad magic): {path}")
        if d != data.d:
            raise ValueError(
                f"sketch was built for feature dimension {d}, dataset has {data.d}"
            )
        body = fh.read()
    expected = d * m * 8
    if len(body) != expected:
        raise ValueError(f"sketch file body has {len(body)} bytes, expected {expected}")
    r_matrix = np.frombuffer(body, dtype="<f8").reshape((d, m), order="F")
    return project(data, r_matrix, m, seed)
