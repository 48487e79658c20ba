"""Dynamic time warping and mel-cepstral distortion.

Both operate on the detail coefficients c1..c_order only; c0 (frame
level) never enters a distance.
"""

from __future__ import annotations

import numpy as np

from ..errors import EmptyTrack, OrderMismatch
from .spectrum import MCEPTrack

MCD_CONSTANT = 10.0 * np.sqrt(2.0) / np.log(10.0)  # ~6.1418 dB per unit distance


def dtw_align(a: MCEPTrack, b: MCEPTrack) -> np.ndarray:
    """Minimal-cost monotone alignment path between two tracks.

    Returns an (L, 2) array of index pairs from (0, 0) to (Ta-1, Tb-1)
    with steps in {(1,0), (0,1), (1,1)}, Euclidean cost on c1..c_order.
    """
    if a.n_frames == 0 or b.n_frames == 0:
        raise EmptyTrack("cannot align an empty track")
    if a.order != b.order:
        raise OrderMismatch(f"orders differ: {a.order} vs {b.order}")
    xa = a.coeffs[:, 1:]
    xb = b.coeffs[:, 1:]
    # pairwise Euclidean distances
    d2 = np.sum(xa * xa, axis=1)[:, None] + np.sum(xb * xb, axis=1)[None, :] - 2.0 * (xa @ xb.T)
    cost = np.sqrt(np.maximum(d2, 0.0))

    ta, tb = cost.shape
    acc = np.full((ta, tb), np.inf)
    acc[0, 0] = cost[0, 0]
    for i in range(ta):
        for j in range(tb):
            if i == 0 and j == 0:
                continue
            best = np.inf
            if i > 0 and j > 0:
                best = acc[i - 1, j - 1]
            if i > 0:
                best = min(best, acc[i - 1, j])
            if j > 0:
                best = min(best, acc[i, j - 1])
            acc[i, j] = cost[i, j] + best

    path = [(ta - 1, tb - 1)]
    i, j = ta - 1, tb - 1
    while (i, j) != (0, 0):
        candidates = []
        if i > 0 and j > 0:
            candidates.append((acc[i - 1, j - 1], (i - 1, j - 1)))
        if i > 0:
            candidates.append((acc[i - 1, j], (i - 1, j)))
        if j > 0:
            candidates.append((acc[i, j - 1], (i, j - 1)))
        _, (i, j) = min(candidates, key=lambda c: c[0])
        path.append((i, j))
    return np.array(path[::-1], dtype=np.intp)


def path_cost(a: MCEPTrack, b: MCEPTrack, path: np.ndarray) -> float:
    diff = a.coeffs[path[:, 0], 1:] - b.coeffs[path[:, 1], 1:]
    return float(np.sum(np.sqrt(np.sum(diff * diff, axis=1))))


def mcd(a: MCEPTrack, b: MCEPTrack, aligned: bool = False) -> float:
    """Mel-cepstral distortion in dB between two tracks.

    mean over aligned frame pairs of (10*sqrt(2)/ln 10) * ||c - c'||
    on c1..c_order. When ``aligned`` is false, pairs come from dtw_align;
    otherwise the tracks must already be frame-paired.
    """
    if a.n_frames == 0 or b.n_frames == 0:
        raise EmptyTrack("cannot compute distortion on an empty track")
    if a.order != b.order:
        raise OrderMismatch(f"orders differ: {a.order} vs {b.order}")
    if aligned:
        if a.n_frames != b.n_frames:
            raise OrderMismatch("aligned tracks must have equal length")
        pairs = np.stack([np.arange(a.n_frames)] * 2, axis=1)
    else:
        pairs = dtw_align(a, b)
    diff = a.coeffs[pairs[:, 0], 1:] - b.coeffs[pairs[:, 1], 1:]
    return float(MCD_CONSTANT * np.mean(np.sqrt(np.sum(diff * diff, axis=1))))
