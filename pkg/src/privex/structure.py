"""Structural recognition of observation channels (BISO, erasure)."""
from __future__ import annotations

import numpy as np

from .errors import NotBinaryInput
from .prob_core import Channel

STRUCT_TOL = 1e-9


def biso_pairing(row0, row1, tol: float = STRUCT_TOL):
    """Find an involution ``pi`` on the output alphabet with
    ``row1[x] = row0[pi(x)]``; fixed points need ``row0[x] = row1[x]``.

    Returns the pairing as a list (``pi[x]``) or ``None``.
    """
    row0 = np.asarray(row0, dtype=float)
    row1 = np.asarray(row1, dtype=float)
    n = row0.size
    if np.abs(np.sort(row0) - np.sort(row1)).max() > tol:
        return None
    pi = [-1] * n

    def search(i):
        while i < n and pi[i] >= 0:
            i += 1
        if i == n:
            return True
        for j in range(i, n):
            if pi[j] >= 0:
                continue
            # pair i <-> j: row1[i] = row0[j] and row1[j] = row0[i]
            if abs(row1[i] - row0[j]) <= tol and abs(row1[j] - row0[i]) <= tol:
                pi[i], pi[j] = j, i
                if search(i + 1):
                    return True
                pi[i] = pi[j] = -1
        return False

    return pi if search(0) else None


def detect_biso(reverse_channel: Channel, tol: float = STRUCT_TOL) -> bool:
    """True if the binary-input channel is symmetric under an output pairing.

    A zero-like output fixed by the pairing (as produced by splitting a
    symmetric output into two halves) is accepted whenever its two entries
    agree.
    """
    if reverse_channel.shape[0] != 2:
        raise NotBinaryInput(f"channel has {reverse_channel.shape[0]} inputs")
    return biso_pairing(reverse_channel.rows[0], reverse_channel.rows[1], tol) is not None


def erasure_structure(forward_channel: Channel, tol: float = STRUCT_TOL):
    """Return ``(delta, erasure_column, perm)`` if the channel is an erasure
    channel, else ``None``. ``perm[x]`` is the output column carrying input
    ``x`` unchanged; ``erasure_column`` is ``None`` when ``delta == 0``."""
    w = np.asarray(forward_channel.rows)
    nx, ny = w.shape
    # delta = 0: a 0/1 permutation-like map (injective deterministic channel)
    if ny >= nx:
        hits = np.argmax(w, axis=1)
        if np.all(np.abs(w[np.arange(nx), hits] - 1.0) <= tol) and len(set(hits)) == nx:
            cols = set(hits.tolist())
            if np.all(np.abs(w[:, [c for c in range(ny) if c not in cols]]) <= tol):
                return 0.0, None, hits.tolist()
    if ny != nx + 1:
        return None
    for e in range(ny):
        col = w[:, e]
        delta = float(col.mean())
        if np.abs(col - delta).max() > tol or not 0.0 < delta < 1.0:
            continue
        rest = np.delete(w, e, axis=1) / (1.0 - delta)
        others = [c for c in range(ny) if c != e]
        hits = np.argmax(rest, axis=1)
        if len(set(hits)) != nx:
            continue
        target = np.zeros_like(rest)
        target[np.arange(nx), hits] = 1.0
        if np.abs(rest - target).max() * (1.0 - delta) <= tol:
            return delta, e, [others[h] for h in hits]
    return None


def detect_erasure(forward_channel: Channel, tol: float = STRUCT_TOL):
    """Erasure probability if ``forward_channel`` passes each input through
    with probability ``1 - delta`` and otherwise emits a common erasure symbol."""
    found = erasure_structure(forward_channel, tol)
    return None if found is None else found[0]
