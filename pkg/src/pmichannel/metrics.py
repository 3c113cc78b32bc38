"""Phase-invariant distances and reconstruction-quality metrics."""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "dist",
    "phase_aligned_mse",
    "beam_precision",
    "procrustes_rel_change",
]


def dist(x: np.ndarray, y: np.ndarray) -> float:
    """Distance up to a global phase: min over phi of ||x - y*exp(j*phi)||.

    Equals sqrt(||x||^2 + ||y||^2 - 2|x^H y|); evaluated at the minimizing
    phase alignment, which stays accurate when the distance is tiny.  For
    real vectors this is min(||x - y||, ||x + y||).
    """
    x = np.asarray(x).ravel()
    y = np.asarray(y).ravel()
    if x.shape != y.shape:
        raise ValueError("vectors must have equal length")
    inner = np.vdot(x, y)
    phase = np.exp(-1j * np.angle(inner)) if inner != 0 else 1.0
    if not np.iscomplexobj(x) and not np.iscomplexobj(y):
        phase = np.sign(np.real(inner)) or 1.0
    return float(np.linalg.norm(x - phase * y))


def phase_aligned_mse(x_hat: np.ndarray, h: np.ndarray) -> float:
    """||x_hat * exp(-j*arg(h^H x_hat)) - h||^2, the squared phase-invariant error.

    When h^H x_hat vanishes every phase is equally good and zero is used.
    """
    x_hat = np.asarray(x_hat).ravel()
    h = np.asarray(h).ravel()
    if x_hat.shape != h.shape:
        raise ValueError("vectors must have equal length")
    inner = np.vdot(h, x_hat)
    phase = np.exp(-1j * np.angle(inner)) if inner != 0 else 1.0
    if not np.iscomplexobj(x_hat) and not np.iscomplexobj(h):
        phase = np.real(phase)
    return float(np.linalg.norm(x_hat * phase - h) ** 2)


def beam_precision(h_hat: np.ndarray, H: np.ndarray) -> float:
    """Energy of the true channel captured by the estimated beam space.

    tr(Qhat^H H H^H Qhat) / tr(U^H H H^H U), with U the top-r left singular
    vectors of H and Qhat an orthonormal basis of h_hat's column space, so
    the metric ignores the power scaling of the estimate.
    """
    Hh = np.asarray(h_hat)
    H = np.asarray(H)
    if Hh.ndim == 1:
        Hh = Hh[:, None]
    if H.ndim == 1:
        H = H[:, None]
    if np.linalg.norm(H) == 0:
        raise ValueError("true channel must be nonzero")
    r = Hh.shape[1]
    Q, _ = np.linalg.qr(Hh)
    U, s, _ = np.linalg.svd(H, full_matrices=False)
    top = s[:r] ** 2
    num = np.sum(np.abs(U.conj().T @ Q) ** 2 * (s**2)[:, None])
    return float(num / np.sum(top))


def procrustes_rel_change(X_new: np.ndarray, X_old: np.ndarray) -> float:
    """Relative change between iterates, minimized over a unitary alignment.

    Single column: min over phases of ||exp(-j*phi) x_new - x_old|| divided
    by ||x_old||, the phase being arg(x_old^H x_new).  Multi-column: min
    over unitary R of ||X_new R - X_old||_F / ||X_old||_F via the polar
    factor of X_new^H X_old.  A zero X_old returns +inf.
    """
    Xn = np.asarray(X_new)
    Xo = np.asarray(X_old)
    if Xn.shape != Xo.shape:
        raise ValueError("iterates must have equal shape")
    denom = np.linalg.norm(Xo)
    if denom == 0:
        return math.inf
    if Xn.ndim == 1 or Xn.shape[1] == 1:
        # Exact single-phase alignment: the new iterate is rotated onto the
        # old one before differencing.
        inner = np.vdot(Xo, Xn)
        phase = np.exp(-1j * np.angle(inner)) if inner != 0 else 1.0
        if not np.iscomplexobj(Xn) and not np.iscomplexobj(Xo):
            phase = np.sign(np.real(inner)) or 1.0
        return float(np.linalg.norm(phase * Xn - Xo) / denom)
    U, _, Vh = np.linalg.svd(Xn.conj().T @ Xo)
    R = U @ Vh
    return float(np.linalg.norm(Xn @ R - Xo) / denom)
