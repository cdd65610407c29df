"""Explicit privacy filters and the leakage auditor."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dependence import rho2_matrix
from .errors import (
    AlphabetMismatch,
    DeltaOutOfRange,
    EpsilonOutOfRange,
    IndependentSources,
    InputError,
    NotBinaryInput,
    UnknownSymbol,
)
from .prob_core import (
    Channel,
    JointDistribution,
    binary_conv,
    binary_entropy,
    mutual_information,
    mutual_information_matrix,
)
from .structure import erasure_structure

FEAS_TOL = 1e-9
BISECT_TOL = 1e-10
BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class LeakageReport:
    i_xz: float
    i_yz: float
    rho2_xz: float
    feasible_mi: bool = True
    feasible_mc: bool = True

    def to_dict(self) -> dict:
        return {"i_xz": self.i_xz, "i_yz": self.i_yz, "rho2_xz": self.rho2_xz,
                "feasible_mi": self.feasible_mi, "feasible_mc": self.feasible_mc}


def erasure_label(alphabet) -> str:
    """``"e"``, or ``"e#"`` (then ``"e##"``, ...) if already taken."""
    label = "e"
    taken = set(map(str, alphabet))
    while label in taken:
        label += "#"
    return label


def leakage(pxy, w) -> tuple[float, float, float]:
    """``(I(X;Z), I(Y;Z), rho_m^2(X;Z))`` for a raw joint and filter matrix."""
    pxy = np.asarray(pxy, dtype=float)
    w = np.asarray(w, dtype=float)
    pxz = pxy @ w
    pyz = pxy.sum(axis=0)[:, None] * w
    return (mutual_information_matrix(pxz), mutual_information_matrix(pyz), rho2_matrix(pxz))


def audit_filter(joint: JointDistribution, filt: Channel, eps_mi: float = math.inf,
                 eps_mc: float = math.inf, tol: float = FEAS_TOL) -> LeakageReport:
    """Exact leakage of ``filt`` applied to ``Y``, with feasibility flags."""
    if filt.in_labels != joint.y_labels:
        raise AlphabetMismatch(f"filter input {filt.in_labels} vs Y alphabet {joint.y_labels}")
    i_xz, i_yz, r2 = leakage(joint.pxy, filt.rows)
    return LeakageReport(i_xz, i_yz, r2, i_xz <= eps_mi + tol, r2 <= eps_mc + tol)


# ---------------------------------------------------------------- constructions

def erasure_filter(joint: JointDistribution, eps: float) -> Channel:
    """Pass ``Y`` through with probability ``eps / I(X;Y)``, else erase."""
    info = mutual_information(joint)
    if info <= 0:
        raise IndependentSources("I(X;Y) = 0")
    if not 0.0 <= eps <= info:
        raise EpsilonOutOfRange(f"eps={eps} outside [0, I(X;Y)={info:.12g}]")
    return erasure_wrapper(Channel.identity(joint.y_labels), 1.0 - eps / info)


def erasure_wrapper(filt: Channel, delta: float) -> Channel:
    """Post-compose ``filt`` with an erasure of probability ``delta``.

    All three leakage measures of the result equal ``(1 - delta)`` times those
    of ``filt``.
    """
    if not 0.0 <= delta <= 1.0:
        raise DeltaOutOfRange(f"delta={delta} not in [0,1]")
    if delta == 0.0:
        return filt
    e = erasure_label(filt.out_labels)
    rows = np.hstack([(1.0 - delta) * filt.rows, np.full((filt.shape[0], 1), delta)])
    return Channel(rows, filt.in_labels, filt.out_labels + (e,))


def singleton_probe_filter(joint: JointDistribution, k, delta: float) -> Channel:
    """Reveal ``Y = k`` with probability ``delta``; everything else is erased."""
    k = str(k)
    if k not in joint.y_labels:
        raise UnknownSymbol(f"{k!r} not in Y alphabet {joint.y_labels}")
    if not 0.0 < delta <= 1.0:
        raise DeltaOutOfRange(f"delta={delta} not in (0,1]")
    idx = joint.y_labels.index(k)
    rows = np.zeros((joint.shape[1], 2))
    rows[:, 1] = 1.0
    rows[idx] = [delta, 1.0 - delta]
    return Channel(rows, joint.y_labels, (k, erasure_label([k])))


def _bisect_decreasing(f, target, lo, hi, tol=BISECT_TOL, max_iter=BISECT_MAX_ITER,
                       resid=1e-13):
    """Root of decreasing ``f(a) = target`` on ``[lo, hi]``.

    Iterates past ``tol`` until the residual is below ``resid`` (needed where
    ``f`` has an infinite slope at an endpoint).
    """
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        val = f(mid)
        if val > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol and abs(val - target) < resid:
            break
        if hi - lo < 1e-17:
            break
    return 0.5 * (lo + hi)


def bec_bsc_filter_alpha(eps: float, delta: float, p: float) -> float:
    """Crossover ``alpha`` of the BSC filter for an erasure observation channel.

    Solves ``(1 - delta) [h(alpha * p) - h(alpha)] = eps`` on ``[0, 1/2]``,
    where ``*`` is binary convolution.
    """
    if not 0.0 < delta < 1.0:
        raise DeltaOutOfRange(f"delta={delta} not in (0,1)")
    if not 0.0 < p < 1.0:
        raise EpsilonOutOfRange(f"p={p} not in (0,1)")
    p = min(p, 1.0 - p)  # h(a * p) = h(a * (1 - p))
    top = (1.0 - delta) * binary_entropy(p)
    if not 0.0 <= eps <= top + 1e-12:
        raise EpsilonOutOfRange(f"eps={eps} outside [0, {top:.12g}]")
    if eps >= top:
        return 0.0
    if eps <= 0.0:
        return 0.5

    def f(a):
        return (1.0 - delta) * (binary_entropy(binary_conv(a, p)) - binary_entropy(a))

    return _bisect_decreasing(f, eps, 0.0, 0.5)


def bec_bsc_filter(joint: JointDistribution, eps: float) -> Channel:
    """Optimal filter for a binary-input erasure observation channel: keep the
    erasure symbol, flip the two unerased symbols with the BSC crossover from
    :func:`bec_bsc_filter_alpha`."""
    if joint.shape[0] != 2:
        raise NotBinaryInput("X must be binary")
    fwd = joint.pxy / joint.px[:, None]
    found = erasure_structure(Channel(fwd, joint.x_labels, joint.y_labels))
    if found is None or found[1] is None:
        raise InputError("P_{Y|X} is not a binary erasure channel with 0 < delta < 1")
    delta, e, perm = found
    alpha = bec_bsc_filter_alpha(eps, delta, float(joint.px[1]))
    rows = np.zeros((3, 3))
    a, b = perm
    rows[e, e] = 1.0
    rows[a, a] = rows[b, b] = 1.0 - alpha
    rows[a, b] = rows[b, a] = alpha
    return Channel(rows, joint.y_labels, joint.y_labels)


def uniform_mixing_filter(joint: JointDistribution) -> Channel:
    """Perfect-privacy filter for an erasure observation channel: the erasure
    symbol is kept and every unerased symbol is replaced by a uniformly random
    unerased symbol. Its utility is ``I(Y;Z) = H(Y|X)``."""
    fwd = joint.pxy / joint.px[:, None]
    found = erasure_structure(Channel(fwd, joint.x_labels, joint.y_labels))
    if found is None or found[1] is None:
        raise InputError("P_{Y|X} is not an erasure channel with 0 < delta < 1")
    _, e, perm = found
    ny = joint.shape[1]
    rows = np.zeros((ny, ny))
    rows[np.ix_(perm, perm)] = 1.0 / len(perm)
    rows[e, e] = 1.0
    return Channel(rows, joint.y_labels, joint.y_labels)


# ---------------------------------------------------------------- combinators

def time_share(filters, weights) -> Channel:
    """Use ``filters[i]`` with probability ``weights[i]`` and reveal which one
    was used. Mutual informations are averaged with the weights; when all but
    one filter leaks nothing about ``X`` the squared maximal correlation is
    scaled too."""
    weights = np.asarray(weights, dtype=float)
    if weights.size != len(filters) or np.any(weights < 0) or abs(weights.sum() - 1) > 1e-12:
        raise InputError("weights must be a probability vector matching the filters")
    in_labels = filters[0].in_labels
    blocks, labels = [], []
    for i, (f, wt) in enumerate(zip(filters, weights)):
        if f.in_labels != in_labels:
            raise AlphabetMismatch("time-shared filters need a common input alphabet")
        if wt > 0:
            blocks.append(wt * f.rows)
            labels += [f"{i}:{s}" for s in f.out_labels]
    return Channel(np.hstack(blocks), in_labels, tuple(labels))


def merge_equivalent_outputs(filt: Channel, py, tol: float = 1e-12) -> Channel:
    """Merge outputs with identical posteriors ``P(y|z)`` and drop outputs of
    zero probability. Leakage is unchanged since the merged output is a
    sufficient statistic."""
    w = np.asarray(filt.rows)
    py = np.asarray(py, dtype=float)
    mass = py @ w
    keep = [j for j in range(w.shape[1]) if mass[j] > 0]
    groups: list[list[int]] = []
    posts = []
    for j in keep:
        post = py * w[:, j] / mass[j]
        for g, q in zip(groups, posts):
            if np.abs(q - post).max() <= tol:
                g.append(j)
                break
        else:
            groups.append([j])
            posts.append(post)
    rows = np.stack([w[:, g].sum(axis=1) for g in groups], axis=1)
    labels = tuple(filt.out_labels[g[0]] for g in groups)
    return Channel(rows, filt.in_labels, labels)
