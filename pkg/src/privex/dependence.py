"""Maximal correlation, weak independence, Poincare constant and discrete MMSE."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstantFunction, ShapeMismatch
from .prob_core import JointDistribution

RANK_TOL = 1e-9


@dataclass(frozen=True)
class SpectralDecomposition:
    """SVD of ``B[x, y] = P(x, y) / sqrt(P(x) P(y))``.

    ``left[:, i]`` and ``right[:, i]`` are the singular vectors paired with
    ``singular_values[i]``; the leading pair is ``(sqrt(P_X), sqrt(P_Y))``.
    """

    singular_values: np.ndarray
    left: np.ndarray
    right: np.ndarray


def normalized_matrix(pxy) -> np.ndarray:
    pxy = np.asarray(pxy, dtype=float)
    px, py = pxy.sum(axis=1), pxy.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = pxy / np.sqrt(np.outer(px, py))
    return np.nan_to_num(b, nan=0.0, posinf=0.0)


def spectral_decomposition(joint: JointDistribution) -> SpectralDecomposition:
    u, s, vt = np.linalg.svd(normalized_matrix(joint.pxy))
    k = s.size
    return SpectralDecomposition(np.clip(s, 0.0, None), u[:, :k], vt[:k].T)


def rho2_matrix(pxy) -> float:
    """Squared maximal correlation of a raw joint matrix (zero columns allowed)."""
    pxy = np.asarray(pxy, dtype=float)
    if min(pxy.shape) < 2:
        return 0.0
    s = np.linalg.svd(normalized_matrix(pxy), compute_uv=False)
    return float(min(s[1], 1.0) ** 2)


def maximal_correlation(joint: JointDistribution) -> float:
    """Hirschfeld-Gebelein-Renyi maximal correlation ``rho_m(X;Y)``.

    Computed as the second singular value of the normalized joint matrix; it
    is zero when either alphabet has a single symbol.
    """
    if min(joint.shape) < 2:
        return 0.0
    return float(min(spectral_decomposition(joint).singular_values[1], 1.0))


@dataclass(frozen=True)
class WeakIndependence:
    weakly_independent: bool
    rank: int

    def __bool__(self):
        return self.weakly_independent


def weak_independence(joint: JointDistribution, tol: float = RANK_TOL) -> WeakIndependence:
    """Test linear dependence of the reverse-channel rows ``P_{X|Y}(.|y)``."""
    rows = (joint.pxy / joint.py[None, :]).T
    s = np.linalg.svd(rows, compute_uv=False)
    rank = int(np.sum(s > tol))
    return WeakIndependence(rank < joint.shape[1], rank)


def poincare_constant(joint: JointDistribution) -> float:
    return 1.0 - maximal_correlation(joint) ** 2


def mmse_discrete(f, joint_xz: JointDistribution) -> float:
    """``E[var(f(X) | Z)]`` by enumeration.

    Parameters
    ----------
    f : array_like
        Values of ``f`` on the X alphabet (row order of ``joint_xz``).
    joint_xz : JointDistribution
        Joint of ``(X, Z)``.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (joint_xz.shape[0],):
        raise ShapeMismatch(f"f has shape {f.shape}, X alphabet has {joint_xz.shape[0]} symbols")
    px, pz = joint_xz.px, joint_xz.py
    mean = px @ f
    var = px @ (f - mean) ** 2
    if var <= 1e-15:
        raise ConstantFunction("f(X) has zero variance")
    cond_mean = (joint_xz.pxy.T @ f) / pz
    mmse = px @ f ** 2 - pz @ cond_mean ** 2
    return float(min(max(mmse, 0.0), var))


def mmse_privacy_band(joint_xz: JointDistribution, eps: float, tol: float = 1e-9) -> bool:
    """True iff ``rho_m^2(X;Z) <= eps``, i.e. every non-constant ``f`` keeps
    ``mmse(f(X)|Z) >= (1 - eps) var(f(X))``."""
    return maximal_correlation(joint_xz) ** 2 <= eps + tol


def pearson_correlation(joint: JointDistribution, x_values, y_values) -> float:
    x = np.asarray(x_values, dtype=float)
    y = np.asarray(y_values, dtype=float)
    px, py = joint.px, joint.py
    mx, my = px @ x, py @ y
    cov = (x - mx) @ joint.pxy @ (y - my)
    sx = np.sqrt(px @ (x - mx) ** 2)
    sy = np.sqrt(py @ (y - my) ** 2)
    if sx == 0 or sy == 0:
        return 0.0
    return float(cov / (sx * sy))
