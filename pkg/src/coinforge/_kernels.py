"""Hot counting kernels for exhaustive combinatorial verification.

Both verifiers reduce to one primitive: given a 0/1 membership matrix M
(rows = committees or receiver adjacency rows, columns = parties) and a batch
of candidate fault sets B (as column-index arrays), count for each B how many
rows have at least `threshold` members inside B.

Two interchangeable backends produce identical integer results:
  * numba @njit loops (default when numba imports cleanly),
  * pure numpy fancy-indexing (fallback; forced with COINFORGE_NO_NUMBA=1).
"""

from __future__ import annotations

import os

import numpy as np

_FORCED_OFF = os.environ.get("COINFORGE_NO_NUMBA", "") not in ("", "0")

if not _FORCED_OFF:
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - depends on environment
        _HAVE_NUMBA = False
else:
    _HAVE_NUMBA = False


def _rows_meeting_threshold_numpy(member: np.ndarray, b_sets: np.ndarray, threshold: float) -> np.ndarray:
    # member: (rows, n) uint8; b_sets: (m, b) int64 column indices
    # inter[r, j] = |row_r  ∩ B_j|
    if b_sets.shape[1] == 0:
        return np.zeros(b_sets.shape[0], dtype=np.int64)
    inter = member[:, b_sets].sum(axis=2, dtype=np.int64)  # (rows, m)
    return (inter >= threshold).sum(axis=0, dtype=np.int64)


if _HAVE_NUMBA:

    @njit(cache=False)
    def _rows_meeting_threshold_numba(member, b_sets, threshold):  # pragma: no cover - jitted
        m = b_sets.shape[0]
        rows = member.shape[0]
        width = b_sets.shape[1]
        out = np.zeros(m, dtype=np.int64)
        for j in range(m):
            hit = 0
            for r in range(rows):
                acc = 0
                for x in range(width):
                    acc += member[r, b_sets[j, x]]
                if acc >= threshold:
                    hit += 1
            out[j] = hit
        return out


def active_backend() -> str:
    return "numba" if _HAVE_NUMBA else "numpy"


def rows_meeting_threshold(member: np.ndarray, b_sets: np.ndarray, threshold: float) -> np.ndarray:
    """For each candidate set B, the number of rows with >= threshold hits in B."""
    member = np.ascontiguousarray(member, dtype=np.uint8)
    b_sets = np.ascontiguousarray(b_sets, dtype=np.int64)
    if b_sets.ndim != 2:
        raise ValueError("b_sets must be 2-dimensional")
    if _HAVE_NUMBA:
        return _rows_meeting_threshold_numba(member, b_sets, float(threshold))
    return _rows_meeting_threshold_numpy(member, b_sets, float(threshold))


def membership_matrix(rows: list[tuple[int, ...]], n: int) -> np.ndarray:
    """Dense 0/1 matrix from per-row member id lists."""
    out = np.zeros((len(rows), n), dtype=np.uint8)
    for i, ids in enumerate(rows):
        out[i, list(ids)] = 1
    return out
