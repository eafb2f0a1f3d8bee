"""Brute-force references for testing the fast transforms.

Nothing here is fast.  The explicit FHT matrix is assembled pattern by
pattern from :func:`fhtnet.fht.indentation`, independently of the butterfly
in :func:`fhtnet.fht.fht_forward`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .fht import check_image, indentation_matrix

MAX_MATRIX_P = 6
MAX_LEMMA_P = 5


class DegenerateInputError(ValueError):
    """The lines do not determine a point (parallel or too few)."""


class ResourceError(ValueError):
    """Requested problem size exceeds the brute-force memory guard."""


@dataclass(frozen=True)
class SparseBinaryMatrix:
    """0/1 matrix stored as the coordinates of its ones.

    ``rows[k], cols[k]`` is the position of the k-th one.  Pixels and Hough
    cells are both enumerated row-wise: index ``i * n + j`` for ``[i, j]``.
    """

    size: int
    rows: np.ndarray
    cols: np.ndarray

    @property
    def n(self) -> int:
        return int(round(np.sqrt(self.size)))

    def positions(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    def to_scipy(self) -> sp.csr_matrix:
        data = np.ones(len(self.rows), dtype=np.int64)
        return sp.csr_matrix((data, (self.rows, self.cols)), shape=(self.size, self.size))

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.size)

    def col_sums(self) -> np.ndarray:
        return np.bincount(self.cols, minlength=self.size)

    def apply(self, image, transpose: bool = False) -> np.ndarray:
        """``A @ vec(image)`` (or ``A.T @ ...``) reshaped back to an image."""
        img = np.asarray(image)
        n = self.n
        vec = img.reshape(n * n)
        dtype = np.int64 if np.issubdtype(img.dtype, np.integer) else np.float64
        out = np.zeros(n * n, dtype=dtype)
        src, dst = (self.rows, self.cols) if transpose else (self.cols, self.rows)
        np.add.at(out, dst, vec[src].astype(dtype))
        return out.reshape(n, n)

    def flipped_bit(self, row: int, col: int) -> "SparseBinaryMatrix":
        """Copy with the entry at ``(row, col)`` toggled."""
        pos = self.positions()
        pos ^= {(row, col)}
        r, c = zip(*sorted(pos)) if pos else ((), ())
        return SparseBinaryMatrix(self.size, np.array(r, dtype=np.int64), np.array(c, dtype=np.int64))


def build_fht_matrix(p: int) -> SparseBinaryMatrix:
    """Explicit matrix ``A`` of the canonical FHT for ``2**p`` square images.

    ``A[s*n + t, y*n + x] = 1`` iff pixel ``(y, x)`` lies on pattern ``(s, t)``.
    """
    if p < 0:
        raise ValueError("p must be non-negative")
    if p > MAX_MATRIX_P:
        raise ResourceError(f"p={p} exceeds the oracle limit of {MAX_MATRIX_P}")
    n = 1 << p
    ind = indentation_matrix(p)  # [x, t]
    s = np.arange(n)[:, None, None]
    t = np.arange(n)[None, :, None]
    x = np.arange(n)[None, None, :]
    y = (s + ind.T[None, :, :]) % n  # ind.T[t, x]
    rows = np.broadcast_to(s * n + t, (n, n, n)).ravel()
    cols = (y * n + x).ravel()
    return SparseBinaryMatrix(n * n, rows.astype(np.int64), cols.astype(np.int64))


def flip_permutation(n: int) -> np.ndarray:
    """Index map of the row flip ``C`` on row-wise enumerated pixels."""
    idx = np.arange(n * n)
    return (n - 1 - idx // n) * n + idx % n


class LemmaReport(NamedTuple):
    """Outcome of each structural check on the FHT matrix."""

    L1: bool
    L2: bool
    L3: bool
    L4: bool
    T1: bool

    def all(self) -> bool:
        return all(self)


def _symmetric(pos: set) -> bool:
    return pos == {(c, r) for r, c in pos}


def _blocks(pos: set, n: int) -> dict:
    blocks: dict = {}
    for r, c in pos:
        blocks.setdefault((r // n, c // n), set()).add((r % n, c % n))
    return {k: frozenset(v) for k, v in blocks.items()}


def verify_lemmas(p: int, matrix: SparseBinaryMatrix | None = None) -> LemmaReport:
    """Check the structure of the FHT matrix by explicit manipulation.

    L1: the indentation matrix is symmetric.
    L2: every ``n x n`` block of ``A`` is symmetric.
    L3: blocks are constant along block diagonals (cyclically).
    L4: ``A C`` is symmetric, ``C`` being the row flip.
    T1: ``C A C == A.T``.

    Pass ``matrix`` to check a (possibly corrupted) matrix instead of the
    one built from the indentation function.
    """
    if p > MAX_LEMMA_P:
        raise ResourceError(f"p={p} exceeds the lemma-check limit of {MAX_LEMMA_P}")
    n = 1 << p
    a = build_fht_matrix(p) if matrix is None else matrix
    pos = a.positions()
    ind = indentation_matrix(p)
    l1 = bool(np.array_equal(ind, ind.T))

    blocks = _blocks(pos, n)
    empty: frozenset = frozenset()
    l2 = all(_symmetric(set(b)) for b in blocks.values())
    l3 = all(
        blocks.get((i, j), empty) == blocks.get(((i + k) % n, (j + k) % n), empty)
        for i in range(n)
        for j in range(n)
        for k in range(n)
    )
    c = flip_permutation(n)
    ac = {(r, int(c[q])) for r, q in pos}
    l4 = _symmetric(ac)
    cac = {(int(c[r]), int(c[q])) for r, q in pos}
    t1 = cac == {(q, r) for r, q in pos}
    return LemmaReport(l1, l2, l3, l4, t1)


def classical_hough(image, s_samples: int, alpha_samples: int) -> np.ndarray:
    """Reference line-sum accumulator on a uniform ``(s, alpha)`` grid.

    Lines are ``s = (x - cx) cos(alpha) + (y - cy) sin(alpha)`` with the
    origin at the image centre, ``alpha`` uniform on ``[0, pi)`` and ``s``
    uniform on ``[-n*sqrt(2)/2, n*sqrt(2)/2]``.  Each line is rasterised to
    the nearest pixel along its dominant axis.  Returns ``acc[s_index,
    alpha_index]``.
    """
    if s_samples < 1 or alpha_samples < 1:
        raise ValueError("sample counts must be positive")
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    n = max(h, w)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    acc = np.zeros((s_samples, alpha_samples))
    for j, alpha in enumerate(hough_alphas(alpha_samples)):
        ca, sa = np.cos(alpha), np.sin(alpha)
        s_vals = hough_offsets(s_samples, n)
        if abs(sa) >= abs(ca):
            xs = np.arange(w)
            ys = np.rint((s_vals[:, None] - (xs[None, :] - cx) * ca) / sa + cy).astype(np.int64)
            ok = (ys >= 0) & (ys < h)
            vals = np.where(ok, img[np.clip(ys, 0, h - 1), xs[None, :]], 0.0)
        else:
            ys = np.arange(h)
            xs = np.rint((s_vals[:, None] - (ys[None, :] - cy) * sa) / ca + cx).astype(np.int64)
            ok = (xs >= 0) & (xs < w)
            vals = np.where(ok, img[ys[None, :], np.clip(xs, 0, w - 1)], 0.0)
        acc[:, j] = vals.sum(axis=1)
    return acc


def hough_alphas(alpha_samples: int) -> np.ndarray:
    return np.arange(alpha_samples) * (np.pi / alpha_samples)


def hough_offsets(s_samples: int, n: int) -> np.ndarray:
    half = n * np.sqrt(2.0) / 2.0
    if s_samples == 1:
        return np.zeros(1)
    return np.linspace(-half, half, s_samples)


class LineParams(NamedTuple):
    """Line ``a*x + b*y = c``."""

    a: float
    b: float
    c: float


def ls_intersection(lines: Sequence, cond_limit: float = 1e12) -> tuple[float, float]:
    """Least-squares intersection of lines via the 2x2 normal equations."""
    arr = np.asarray([tuple(line) for line in lines], dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError("lines must be (a, b, c) triples")
    if len(arr) < 2:
        raise DegenerateInputError("need at least two lines")
    if np.any(np.all(arr[:, :2] == 0, axis=1)):
        raise ValueError("line with a = b = 0")
    m = arr[:, :2]
    normal = m.T @ m
    rhs = m.T @ arr[:, 2]
    if np.linalg.cond(normal) > cond_limit:
        raise DegenerateInputError("lines are (nearly) parallel; no unique intersection")
    x, y = np.linalg.solve(normal, rhs)
    return float(x), float(y)
