"""Coordinate tensor calculus for metrics with second-derivative access.

Conventions
-----------
Derivative indices come last: ``dg[i, j, k] = d_k g_ij`` and
``ddg[i, j, k, l] = d_k d_l g_ij``. Christoffel symbols are stored as
``gamma[k, i, j] = Gamma^k_ij``.

The curvature operator is ``R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z
- nabla_[X,Y] Z`` with components ``R(d_i, d_j)d_k = R^l_ijk d_l``, and the
lowered tensor is ``Rm(X, Y, Z, W) = g(R(X, Y)Z, W)``, i.e.
``riemann[i, j, k, l] = g_lm R^m_ijk``. Ricci is ``Ric(Y, Z) = tr(X -> R(X, Y)Z)``.
With these conventions the round sphere has positive sectional curvature
``Rm(X, Y, Y, X) > 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

SINGULAR_TOL = 1e-12


class SingularMetricError(ArithmeticError):
    pass


class DegenerateFrameError(ArithmeticError):
    pass


@dataclass(frozen=True)
class MetricField:
    """A metric given by an evaluator ``point -> (g, dg, ddg)``.

    ``signature`` is ``"riemannian"`` or ``"lorentzian"`` (index ``- + ... +``).
    """

    dim: int
    signature: str
    evaluator: Callable
    coordinate_names: Optional[tuple] = None

    def components(self, point):
        g, dg, ddg = self.evaluator(np.asarray(point, dtype=float))
        return np.asarray(g, float), np.asarray(dg, float), np.asarray(ddg, float)

    def matrix(self, point) -> np.ndarray:
        return self.components(point)[0]

    def check_signature(self, point, tol: float = 1e-12) -> bool:
        g = self.matrix(point)
        eig = np.linalg.eigvalsh(g)
        if np.any(np.abs(eig) <= tol):
            return False
        negatives = int(np.sum(eig < 0))
        return negatives == (0 if self.signature == "riemannian" else 1)


def constant_metric(matrix, signature: str = "riemannian", names=None) -> MetricField:
    g = np.array(matrix, dtype=float)
    n = g.shape[0]
    dg = np.zeros((n, n, n))
    ddg = np.zeros((n, n, n, n))
    return MetricField(n, signature, lambda x: (g, dg, ddg), names)


def metric_from_jets(entries, dim: int, signature: str, names=None) -> MetricField:
    """Build a metric from a function ``point -> {(i, j): Jet2 or float}``.

    Only ``i <= j`` entries need to be given; missing entries are zero.
    """

    def evaluator(x):
        g = np.zeros((dim, dim))
        dg = np.zeros((dim, dim, dim))
        ddg = np.zeros((dim, dim, dim, dim))
        for (i, j), jet in entries(x).items():
            if hasattr(jet, "grad"):
                val, grad, hess = jet.value, jet.grad, jet.hess
            else:
                val, grad, hess = float(jet), 0.0, 0.0
            for a, b in {(i, j), (j, i)}:
                g[a, b] = val
                dg[a, b] = grad
                ddg[a, b] = hess
        return g, dg, ddg

    return MetricField(dim, signature, evaluator, None if names is None else tuple(names))


def inverse(g: np.ndarray) -> np.ndarray:
    """Inverse of a small metric matrix, refusing near-singular input."""
    if abs(np.linalg.det(g)) < SINGULAR_TOL:
        raise SingularMetricError(f"metric determinant {np.linalg.det(g):.3e} below {SINGULAR_TOL}")
    return np.linalg.solve(g, np.eye(g.shape[0]))


@dataclass(frozen=True)
class ChristoffelData:
    point: np.ndarray
    gamma: np.ndarray  # gamma[k, i, j] = Gamma^k_ij
    dgamma: np.ndarray  # dgamma[k, i, j, l] = d_l Gamma^k_ij


@dataclass(frozen=True)
class CurvatureData:
    point: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float


def _christoffel_from(g, dg, ddg):
    ginv = inverse(g)
    # first kind: lower[m, i, j] = 1/2 (d_i g_mj + d_j g_mi - d_m g_ij)
    lower = 0.5 * (dg.transpose(0, 2, 1) + dg - dg.transpose(2, 0, 1))
    gamma = np.einsum("km,mij->kij", ginv, lower)
    # d_l of the first kind, then d_l g^-1 = -g^-1 (d_l g) g^-1
    dlower = 0.5 * (
        ddg.transpose(0, 2, 1, 3) + ddg - ddg.transpose(2, 0, 1, 3)
    )
    dginv = -np.einsum("ka,abl,bm->kml", ginv, dg, ginv)
    dgamma = np.einsum("kml,mij->kijl", dginv, lower) + np.einsum("km,mijl->kijl", ginv, dlower)
    return ginv, gamma, dgamma


def christoffel(metric: MetricField, point) -> ChristoffelData:
    point = np.asarray(point, dtype=float)
    _, gamma, dgamma = _christoffel_from(*metric.components(point))
    gamma = 0.5 * (gamma + gamma.transpose(0, 2, 1))
    return ChristoffelData(point, gamma, dgamma)


def riemann(metric: MetricField, point) -> CurvatureData:
    point = np.asarray(point, dtype=float)
    g, dg, ddg = metric.components(point)
    ginv, gamma, dgamma = _christoffel_from(g, dg, ddg)
    # up[l, i, j, k] = R^l_ijk
    up = (
        dgamma.transpose(0, 3, 1, 2)
        - dgamma.transpose(0, 1, 3, 2)
        + np.einsum("lim,mjk->lijk", gamma, gamma)
        - np.einsum("ljm,mik->lijk", gamma, gamma)
    )
    rm = np.einsum("lm,mijk->ijkl", g, up)
    ric = np.einsum("iijk->jk", up)
    ric = 0.5 * (ric + ric.T)
    scalar = float(np.einsum("jk,jk->", ginv, ric))
    return CurvatureData(point, rm, ric, scalar)


def ricci_scalar(metric: MetricField, point):
    curv = riemann(metric, point)
    return curv.ricci, curv.scalar


def geodesic_acceleration(metric: MetricField, position, velocity) -> np.ndarray:
    """``-Gamma^k_ij xdot^i xdot^j`` at one phase-space point."""
    gamma = christoffel(metric, position).gamma
    v = np.asarray(velocity, dtype=float)
    return -np.einsum("kij,i,j->k", gamma, v, v)


def change_to_frame(tensor, frame) -> np.ndarray:
    """Contract every (covariant) slot of ``tensor`` with the frame vectors.

    ``frame`` is a matrix whose columns are the frame vectors in coordinate
    components, or any object with such a ``vectors`` attribute.
    """
    e = np.asarray(getattr(frame, "vectors", frame), dtype=float)
    if abs(np.linalg.det(e)) < SINGULAR_TOL:
        raise DegenerateFrameError("frame vectors are linearly dependent")
    out = np.asarray(tensor, dtype=float)
    for axis in range(out.ndim):
        out = np.moveaxis(np.tensordot(out, e, axes=([axis], [0])), -1, axis)
    return out


def endomorphism_norm(curv: CurvatureData, metric: MetricField, x_index: int, y_index: int) -> float:
    """Max-abs component of the endomorphism ``Z -> R(d_x, d_y) Z``."""
    ginv = inverse(metric.matrix(curv.point))
    # R^l_{x y k} = g^{lm} Rm_{x y k m}
    block = np.einsum("lm,km->kl", ginv, curv.riemann[x_index, y_index])
    return float(np.max(np.abs(block)))
