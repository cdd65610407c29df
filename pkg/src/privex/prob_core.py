"""Finite probability primitives: distributions, channels, entropies.

All information quantities are in bits. Probabilities below ``ZERO_TOL`` are
treated as exact zeros inside entropy sums.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import (
    AlphabetMismatch,
    InputError,
    NegativeEntry,
    NotNormalized,
    OutOfRange,
    ShapeMismatch,
    UnknownSymbol,
    ZeroTotalMass,
)

ZERO_TOL = 1e-15
SUM_TOL = 1e-9
LN2 = math.log(2.0)


# ---------------------------------------------------------------- helpers

def _labels(labels, n: int, prefix: str = "") -> tuple:
    if labels is None:
        return tuple(f"{prefix}{i}" for i in range(n))
    labels = tuple(str(s) for s in labels)
    if len(labels) != n:
        raise ShapeMismatch(f"{len(labels)} labels for {n} symbols")
    if len(set(labels)) != n:
        raise InputError(f"duplicate labels in {labels!r}")
    return labels


def _as_float_array(values, ndim: int, what: str) -> np.ndarray:
    try:
        arr = np.array(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ShapeMismatch(f"{what}: not a rectangular numeric array ({exc})") from None
    if arr.ndim != ndim:
        raise ShapeMismatch(f"{what}: expected {ndim}-d array, got shape {arr.shape}")
    if arr.size == 0:
        raise ShapeMismatch(f"{what}: empty")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{what}: non-finite entries")
    if np.any(arr < -ZERO_TOL):
        raise NegativeEntry(f"{what}: negative entry {arr.min():.3g}")
    arr[arr < 0] = 0.0
    return arr


def _renormalize(arr: np.ndarray, what: str, axis=None) -> np.ndarray:
    s = arr.sum(axis=axis, keepdims=axis is not None)
    if np.any(s <= 0):
        raise ZeroTotalMass(f"{what}: total mass is zero")
    if np.any(np.abs(s - 1.0) > SUM_TOL):
        raise NotNormalized(f"{what}: sums to {np.ravel(s)[np.argmax(np.abs(np.ravel(s) - 1))]!r}, "
                            f"deviation exceeds {SUM_TOL}")
    return arr / s


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def entropy_bits(p, axis=None) -> np.ndarray | float:
    """Shannon entropy of a nonnegative array along ``axis`` (no normalization)."""
    p = np.asarray(p, dtype=float)
    safe = np.where(p > ZERO_TOL, p, 1.0)
    terms = np.where(p > ZERO_TOL, -p * np.log2(safe), 0.0)
    return terms.sum(axis=axis)


# ---------------------------------------------------------------- types

@dataclass(frozen=True, eq=False)
class ProbVector:
    """A probability distribution on a finite labelled alphabet."""

    p: np.ndarray
    labels: tuple = None

    def __post_init__(self):
        arr = _renormalize(_as_float_array(self.p, 1, "ProbVector"), "ProbVector")
        object.__setattr__(self, "p", _readonly(arr))
        object.__setattr__(self, "labels", _labels(self.labels, arr.size))

    def __len__(self):
        return self.p.size

    def __getitem__(self, label):
        return float(self.p[self.labels.index(str(label))])

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "p": self.p.tolist()}


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic matrix, ``rows[i, j] = P(out_j | in_i)``."""

    rows: np.ndarray
    in_labels: tuple = None
    out_labels: tuple = None

    def __post_init__(self):
        arr = _as_float_array(self.rows, 2, "Channel")
        arr = _renormalize(arr, "Channel row", axis=1)
        object.__setattr__(self, "rows", _readonly(arr))
        object.__setattr__(self, "in_labels", _labels(self.in_labels, arr.shape[0]))
        object.__setattr__(self, "out_labels", _labels(self.out_labels, arr.shape[1]))

    @property
    def shape(self):
        return self.rows.shape

    def row(self, label) -> ProbVector:
        if str(label) not in self.in_labels:
            raise UnknownSymbol(f"{label!r} not in input alphabet {self.in_labels}")
        return ProbVector(self.rows[self.in_labels.index(str(label))], self.out_labels)

    @classmethod
    def identity(cls, labels: Sequence) -> "Channel":
        labels = tuple(str(s) for s in labels)
        return cls(np.eye(len(labels)), labels, labels)

    @classmethod
    def constant(cls, in_labels: Sequence, out_label: str = "e") -> "Channel":
        return cls(np.ones((len(in_labels), 1)), tuple(in_labels), (out_label,))

    def to_dict(self) -> dict:
        return {"in_labels": list(self.in_labels), "out_labels": list(self.out_labels),
                "rows": self.rows.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Channel":
        try:
            return cls(data["rows"], data.get("in_labels"), data.get("out_labels"))
        except KeyError as exc:
            raise InputError(f"channel JSON is missing key {exc}") from None


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Joint pmf ``pxy[x, y]`` with labelled alphabets.

    Direct construction requires every row and column to carry positive mass;
    use :func:`validate_joint` to strip degenerate symbols instead.
    """

    pxy: np.ndarray
    x_labels: tuple = None
    y_labels: tuple = None
    stripped_x: tuple = field(default=())
    stripped_y: tuple = field(default=())

    def __post_init__(self):
        arr = _renormalize(_as_float_array(self.pxy, 2, "joint"), "joint")
        if np.any(arr.sum(axis=1) <= 0) or np.any(arr.sum(axis=0) <= 0):
            raise InputError("joint has an all-zero row or column; use validate_joint")
        object.__setattr__(self, "pxy", _readonly(arr))
        object.__setattr__(self, "x_labels", _labels(self.x_labels, arr.shape[0]))
        object.__setattr__(self, "y_labels", _labels(self.y_labels, arr.shape[1]))

    @property
    def shape(self):
        return self.pxy.shape

    @cached_property
    def px(self) -> np.ndarray:
        return _readonly(self.pxy.sum(axis=1))

    @cached_property
    def py(self) -> np.ndarray:
        return _readonly(self.pxy.sum(axis=0))

    def transpose(self) -> "JointDistribution":
        return JointDistribution(self.pxy.T, self.y_labels, self.x_labels)

    def to_dict(self) -> dict:
        return {"x_labels": list(self.x_labels), "y_labels": list(self.y_labels),
                "pxy": self.pxy.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "JointDistribution":
        if not isinstance(data, dict) or "pxy" not in data:
            raise InputError("joint JSON must be an object with a 'pxy' matrix")
        return validate_joint(data["pxy"], data.get("x_labels"), data.get("y_labels"))


# ---------------------------------------------------------------- construction

def validate_joint(pxy, x_labels=None, y_labels=None) -> JointDistribution:
    """Validate a raw joint matrix and strip zero-mass symbols.

    Parameters
    ----------
    pxy : array_like
        ``|X| x |Y|`` nonnegative matrix summing to one (within ``SUM_TOL``).
    x_labels, y_labels : sequence of str, optional
        Symbol names; default to ``"0", "1", ...``.

    Returns
    -------
    JointDistribution
        Renormalized joint; removed symbols are listed in ``stripped_x`` and
        ``stripped_y``.
    """
    arr = _as_float_array(pxy, 2, "joint")
    xl = _labels(x_labels, arr.shape[0])
    yl = _labels(y_labels, arr.shape[1])
    if arr.sum() <= 0:
        raise ZeroTotalMass("joint: total mass is zero")
    arr = _renormalize(arr, "joint")
    arr[arr < ZERO_TOL] = 0.0
    keep_x = arr.sum(axis=1) > 0
    keep_y = arr.sum(axis=0) > 0
    stripped_x = tuple(l for l, k in zip(xl, keep_x) if not k)
    stripped_y = tuple(l for l, k in zip(yl, keep_y) if not k)
    arr = arr[np.ix_(keep_x, keep_y)]
    return JointDistribution(arr / arr.sum(),
                             tuple(l for l, k in zip(xl, keep_x) if k),
                             tuple(l for l, k in zip(yl, keep_y) if k),
                             stripped_x, stripped_y)


def joint_from_channel(px, channel: Channel, x_labels=None) -> JointDistribution:
    """Joint of ``(X, Y)`` with ``X ~ px`` and ``Y | X ~ channel``."""
    if isinstance(px, ProbVector):
        x_labels = px.labels
        px = px.p
    px = np.asarray(px, dtype=float)
    if px.size != channel.shape[0]:
        raise ShapeMismatch("input distribution and channel sizes differ")
    return validate_joint(px[:, None] * channel.rows, x_labels or channel.in_labels,
                          channel.out_labels)


def bsc(alpha: float, labels=("0", "1")) -> Channel:
    if not 0.0 <= alpha <= 1.0:
        raise OutOfRange(f"crossover {alpha} not in [0,1]")
    return Channel([[1 - alpha, alpha], [alpha, 1 - alpha]], labels, labels)


def bec(delta: float, labels=("0", "1"), erasure: str = "e") -> Channel:
    """Binary erasure channel with outputs ``(labels[0], e, labels[1])``."""
    if not 0.0 <= delta <= 1.0:
        raise OutOfRange(f"erasure probability {delta} not in [0,1]")
    return Channel([[1 - delta, delta, 0.0], [0.0, delta, 1 - delta]], labels,
                   (labels[0], erasure, labels[1]))


# ---------------------------------------------------------------- marginals and measures

def marginals(joint: JointDistribution):
    """Return ``(P_X, P_Y, P_{Y|X}, P_{X|Y})``."""
    px, py = joint.px, joint.py
    return (ProbVector(px, joint.x_labels), ProbVector(py, joint.y_labels),
            Channel(joint.pxy / px[:, None], joint.x_labels, joint.y_labels),
            Channel((joint.pxy / py[None, :]).T, joint.y_labels, joint.x_labels))


def _probs(p) -> np.ndarray:
    return p.p if isinstance(p, ProbVector) else np.asarray(p, dtype=float)


def entropy(p) -> float:
    """Shannon entropy in bits of a :class:`ProbVector` (or array)."""
    return float(entropy_bits(_probs(p)))


def joint_entropy(joint: JointDistribution) -> float:
    return float(entropy_bits(joint.pxy))


def conditional_entropy(joint: JointDistribution, given: str = "x") -> float:
    """``H(Y|X)`` (default) or ``H(X|Y)`` when ``given="y"``."""
    h = joint_entropy(joint)
    if given == "x":
        return max(h - entropy(joint.px), 0.0)
    if given == "y":
        return max(h - entropy(joint.py), 0.0)
    raise ValueError("given must be 'x' or 'y'")


def mutual_information(joint: JointDistribution) -> float:
    return mutual_information_matrix(joint.pxy)


def mutual_information_matrix(pxy) -> float:
    """``I(X;Y)`` of a raw nonnegative joint matrix, clipped at zero."""
    pxy = np.asarray(pxy, dtype=float)
    val = entropy_bits(pxy.sum(axis=1)) + entropy_bits(pxy.sum(axis=0)) - entropy_bits(pxy)
    return max(float(val), 0.0)


def kl_divergence(p, q) -> float:
    """Relative entropy ``D(p || q)`` in bits; ``math.inf`` if ``p`` is not
    absolutely continuous with respect to ``q``."""
    if isinstance(p, ProbVector) and isinstance(q, ProbVector) and p.labels != q.labels:
        raise AlphabetMismatch(f"{p.labels} vs {q.labels}")
    p, q = _probs(p), _probs(q)
    if p.shape != q.shape:
        raise AlphabetMismatch(f"alphabet sizes {p.size} and {q.size} differ")
    support = p > ZERO_TOL
    if np.any(support & (q <= ZERO_TOL)):
        return math.inf
    return max(float(np.sum(p[support] * np.log2(p[support] / q[support]))), 0.0)


def binary_entropy(a: float) -> float:
    if not 0.0 <= a <= 1.0:
        raise OutOfRange(f"{a} not in [0,1]")
    return float(entropy_bits([a, 1.0 - a]))


def binary_entropy_inv(h: float, max_iter: int = 200) -> float:
    """Inverse of the binary entropy on ``[0, 1/2]`` by bisection."""
    if not 0.0 <= h <= 1.0:
        raise OutOfRange(f"{h} not in [0,1]")
    if h == 0.0:
        return 0.0
    if h == 1.0:
        return 0.5
    lo, hi = 0.0, 0.5
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        val = binary_entropy(mid)
        if val < h:
            lo = mid
        else:
            hi = mid
        if abs(val - h) < 1e-14:
            return mid
        if hi - lo < 1e-17:
            break
    return 0.5 * (lo + hi)


def binary_conv(a: float, b: float) -> float:
    """Binary convolution ``a * b = a(1-b) + b(1-a)``."""
    return a * (1.0 - b) + b * (1.0 - a)


# ---------------------------------------------------------------- composition

def compose(first: Channel, second: Channel) -> Channel:
    """Cascade ``first`` then ``second``: ``P(z|x) = sum_y P(y|x) P(z|y)``."""
    if first.out_labels != second.in_labels:
        raise AlphabetMismatch(f"{first.out_labels} does not feed {second.in_labels}")
    return Channel(np.clip(first.rows @ second.rows, 0.0, None), first.in_labels,
                   second.out_labels)


def push_joint(joint: JointDistribution, filt: Channel):
    """Materialize the chain ``X - Y - Z``.

    Returns
    -------
    (JointDistribution, JointDistribution)
        Joints of ``(X, Z)`` and ``(Y, Z)``. Output symbols of zero mass are
        stripped and recorded in ``stripped_y``.
    """
    if filt.in_labels != joint.y_labels:
        raise AlphabetMismatch(f"filter input {filt.in_labels} vs Y alphabet {joint.y_labels}")
    pxz = joint.pxy @ filt.rows
    pyz = joint.py[:, None] * filt.rows
    return (validate_joint(pxz, joint.x_labels, filt.out_labels),
            validate_joint(pyz, joint.y_labels, filt.out_labels))
