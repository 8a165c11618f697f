"""Synthetic dataset generation and matrix file I/O (CSV, binary PGM)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import MatrixParseError
from .linalg import as_matrix


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a sparse-factor low-rank instance with additive noise."""

    m: int = 100
    n: int = 80
    rank: int = 5
    sparsity: float = 0.30
    noise_std: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError(f"dimensions must be positive, got {self.m}x{self.n}")
        if not 1 <= self.rank <= min(self.m, self.n):
            raise ValueError(f"rank must lie in [1, min(m, n)], got {self.rank}")
        if not 0.0 < self.sparsity <= 1.0:
            raise ValueError(f"sparsity must lie in (0, 1], got {self.sparsity}")
        if self.noise_std < 0.0:
            raise ValueError(f"noise_std must be nonnegative, got {self.noise_std}")


@dataclass(frozen=True)
class SyntheticInstance:
    """Generated factors, their clean product, and the noisy observation."""

    x_true: np.ndarray
    y_true: np.ndarray
    m_clean: np.ndarray
    m_observed: np.ndarray
    spec: SyntheticSpec


def _sparse_gaussian(rng: np.random.Generator, shape, sparsity: float) -> np.ndarray:
    values = rng.standard_normal(shape)
    mask = rng.random(shape) < sparsity
    return values * mask


def generate(spec: SyntheticSpec) -> SyntheticInstance:
    """Draw an instance: Bernoulli-masked Gaussian factors plus noise.

    Uses the counter-based Philox generator so a fixed seed reproduces the
    instance bit-for-bit across platforms.  The draw order (X values, X
    mask, Y values, Y mask, noise) is part of the reproducibility contract.
    """
    rng = np.random.Generator(np.random.Philox(spec.seed))
    x_true = _sparse_gaussian(rng, (spec.m, spec.rank), spec.sparsity)
    y_true = _sparse_gaussian(rng, (spec.rank, spec.n), spec.sparsity)
    m_clean = x_true @ y_true
    noise = rng.normal(0.0, spec.noise_std, (spec.m, spec.n))
    return SyntheticInstance(
        x_true=x_true,
        y_true=y_true,
        m_clean=m_clean,
        m_observed=m_clean + noise,
        spec=spec,
    )


def save_matrix_csv(path, a: np.ndarray) -> None:
    """Write one row per line, comma-separated, 17 significant digits.

    The precision guarantees a float64 round trip through
    :func:`load_matrix_csv`.
    """
    a = as_matrix(a, "matrix")
    with open(path, "w", encoding="utf-8") as fh:
        for row in a:
            fh.write(",".join(format(v, ".17g") for v in row))
            fh.write("\n")


def load_matrix_csv(path) -> np.ndarray:
    """Parse a headerless numeric CSV into a float64 matrix.

    Raises :class:`MatrixParseError` carrying the offending 1-based line
    number on ragged rows, non-numeric fields, or an empty file.
    """
    rows: list[list[float]] = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            fields = stripped.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise MatrixParseError(
                    f"expected {width} fields, got {len(fields)}", line=lineno
                )
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise MatrixParseError(f"non-numeric field: {exc}", line=lineno) from exc
    if not rows:
        raise MatrixParseError(f"no data rows in {path}")
    return np.array(rows, dtype=np.float64)


def _read_pgm_tokens(data: bytes, path) -> tuple[list[int], int]:
    """PGM header tokens (width, height, maxval) and raster offset."""
    tokens: list[int] = []
    pos = 2  # past the "P5" magic
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MatrixParseError(f"{path}: truncated PGM header")
        try:
            tokens.append(int(data[start:pos]))
        except ValueError as exc:
            raise MatrixParseError(f"{path}: bad PGM header token {data[start:pos]!r}") from exc
    return tokens, pos + 1  # single whitespace byte separates header and raster


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) 8-bit grayscale PGM into a (height, width) array."""
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise MatrixParseError(f"{path}: not a binary PGM (missing P5 magic)")
    (width, height, maxval), offset = _read_pgm_tokens(data, path)
    if width < 1 or height < 1:
        raise MatrixParseError(f"{path}: bad PGM dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise MatrixParseError(f"{path}: only 8-bit PGM supported, maxval={maxval}")
    raster = data[offset : offset + width * height]
    if len(raster) != width * height:
        raise MatrixParseError(
            f"{path}: raster has {len(raster)} bytes, expected {width * height}"
        )
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def frames_to_matrix(frame_paths: Sequence) -> np.ndarray:
    """Stack 8-bit PGM frames as columns of a (pixels x frames) matrix.

    Each frame is flattened column-major; values are scaled to [0, 1] by
    dividing by 255.  All frames must share the same pixel dimensions.
    """
    if not frame_paths:
        raise ValueError("at least one frame path is required")
    columns = []
    shape = None
    for path in frame_paths:
        frame = read_pgm(path)
        if shape is None:
            shape = frame.shape
        elif frame.shape != shape:
            raise MatrixParseError(
                f"{path}: frame shape {frame.shape} differs from first frame {shape}"
            )
        columns.append(frame.flatten(order="F").astype(np.float64) / 255.0)
    return np.column_stack(columns)
