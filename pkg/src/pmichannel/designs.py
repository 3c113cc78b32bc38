"""Generators for codebooks, dimensionality-reduction matrices and channels.

Everything here is a pure function of its arguments plus a caller-owned RNG,
so experiments stay reproducible from a single seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Channel, Codebook

__all__ = [
    "UplinkCovariance",
    "dft_codebook",
    "identity_codebook",
    "haar_stiefel",
    "haar_stiefel_stack",
    "structured_q",
    "type1_q1",
    "synthetic_channel",
    "eigvecs_descending",
]

_HERM_TOL = 1e-10


@dataclass(frozen=True)
class UplinkCovariance:
    """Uplink spatial covariance and the subspace dimension used downstream."""

    Sigma: np.ndarray
    k: int

    def __post_init__(self):
        S = np.asarray(self.Sigma)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError("covariance must be square")
        if not np.allclose(S, S.conj().T, atol=_HERM_TOL):
            raise ValueError("covariance must be Hermitian")
        w = np.linalg.eigvalsh(S)
        if w.min() < -_HERM_TOL:
            raise ValueError("covariance must be positive semidefinite")
        object.__setattr__(self, "Sigma", S)


def eigvecs_descending(A: np.ndarray, k: int) -> np.ndarray:
    """Top-k eigenvectors of a Hermitian matrix, deterministically ordered.

    Eigenvalues descend; each eigenvector's phase is fixed by making its
    first non-negligible component real and positive, so repeated calls on
    the same input give bit-identical output.
    """
    A = np.asarray(A)
    if not np.allclose(A, A.conj().T, atol=_HERM_TOL):
        raise ValueError("input must be Hermitian")
    w, U = np.linalg.eigh(A)
    U = U[:, ::-1][:, :k]
    for j in range(U.shape[1]):
        col = U[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size:
            piv = col[nz[0]]
            U[:, j] = col * (np.conj(piv) / np.abs(piv))
    return U


def dft_codebook(p: int, r: int = 1) -> Codebook:
    """Normalized DFT codebook: V = DFT(p)/sqrt(p).

    Columns are orthonormal, so the coherence is zero.  For r > 1 the
    columns are grouped into p // r codewords of width r.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    if p % r != 0:
        raise ValueError("r must divide p")
    n = np.arange(p)
    V = np.exp(-2j * np.pi * np.outer(n, n) / p) / np.sqrt(p)
    return Codebook(V=V, r=r)


def identity_codebook(p: int, n: int | None = None, r: int = 1) -> Codebook:
    """First n columns of I_p as a real orthonormal codebook (coherence zero)."""
    n = p if n is None else n
    if not 1 <= n * r <= p:
        raise ValueError("need 1 <= n*r <= p")
    return Codebook(V=np.eye(p)[:, : n * r], r=r)


def haar_stiefel(
    d: int, p: int, rng: np.random.Generator, real: bool = False
) -> np.ndarray:
    """Haar-random d x p matrix with orthonormal columns.

    QR of an i.i.d. Gaussian matrix, with the R factor's diagonal phases
    absorbed into Q so the result is the unique Haar representative.
    Set ``real=True`` for the real Stiefel manifold.
    """
    if p > d:
        raise ValueError("need p <= d")
    if real:
        G = rng.standard_normal((d, p))
    else:
        G = rng.standard_normal((d, p)) + 1j * rng.standard_normal((d, p))
    Q, R = np.linalg.qr(G)
    diag = np.diagonal(R)
    phases = diag / np.abs(diag)
    return Q * phases.conj()


def haar_stiefel_stack(
    n: int, d: int, p: int, rng: np.random.Generator, real: bool = False
) -> np.ndarray:
    """n independent Haar Stiefel matrices as an (n, d, p) array.

    Same law as ``haar_stiefel``; uses a batched QR, which is much faster
    when thousands of design matrices are needed.
    """
    if p > d:
        raise ValueError("need p <= d")
    if real:
        G = rng.standard_normal((n, d, p))
    else:
        G = rng.standard_normal((n, d, p)) + 1j * rng.standard_normal((n, d, p))
    Q, R = np.linalg.qr(G)
    diag = np.einsum("nii->ni", R)
    phases = diag / np.abs(diag)
    return Q * phases.conj()[:, None, :]


def structured_q(
    sigma_ul: UplinkCovariance | np.ndarray, p: int, rng: np.random.Generator
) -> np.ndarray:
    """Fixed covariance-aware outer transform times a random inner unitary.

    Q = Q_out @ U with Q_out the top-p eigenvectors of the uplink covariance
    and U a Haar-random p x p unitary; the column space is the dominant
    uplink subspace while the inner layer injects per-round diversity.
    """
    S = sigma_ul.Sigma if isinstance(sigma_ul, UplinkCovariance) else np.asarray(sigma_ul)
    if not np.allclose(S, S.conj().T, atol=_HERM_TOL):
        raise ValueError("uplink covariance must be Hermitian")
    q_out = eigvecs_descending(S, p)
    return q_out @ haar_stiefel(p, p, rng)


def type1_q1(sigma_ul: UplinkCovariance | np.ndarray) -> np.ndarray:
    """First-round reduction matrix compatible with a dual-polarized codebook.

    Q1 = eigvecs(Sigma_ul, 8) @ (I_2 kron (DFT(2) kron DFT(2)) / 2); the
    inner 8 x 8 factor is unitary, so Q1 spans the top-8 uplink subspace.
    """
    S = sigma_ul.Sigma if isinstance(sigma_ul, UplinkCovariance) else np.asarray(sigma_ul)
    if S.shape[0] < 8:
        raise ValueError("need at least 8 antenna ports")
    f2 = np.array([[1.0, 1.0], [1.0, -1.0]])
    inner = np.kron(np.eye(2), np.kron(f2, f2) / 2.0)
    return eigvecs_descending(S, 8) @ inner


def _ula_steering(d: int, angle: float) -> np.ndarray:
    """Uniform-linear-array steering vector at half-wavelength spacing."""
    return np.exp(1j * np.pi * np.sin(angle) * np.arange(d))


def synthetic_channel(
    d: int,
    n_rx: int,
    paths: int,
    rng: np.random.Generator,
    angle_jitter: float = 0.03,
) -> tuple[Channel, UplinkCovariance]:
    """Finite-ray geometric channel plus a partially matching uplink covariance.

    The downlink channel is a sum of ``paths`` rays with ULA steering vectors
    and random receive signatures, normalized to unit Frobenius norm.  The
    uplink covariance is built from the same ray directions (slightly
    jittered) with independent gains, so the uplink subspace prior is
    informative but not exact.
    """
    if paths < 1:
        raise ValueError("need at least one path")
    angles = rng.uniform(-np.pi / 3, np.pi / 3, size=paths)
    # Power-decaying complex path gains.
    powers = np.exp(-0.5 * np.arange(paths))
    g = np.sqrt(powers) * (rng.standard_normal(paths) + 1j * rng.standard_normal(paths))
    H = np.zeros((d, n_rx), dtype=complex)
    for ell in range(paths):
        b = rng.standard_normal(n_rx) + 1j * rng.standard_normal(n_rx)
        b /= np.linalg.norm(b)
        H += g[ell] * np.outer(_ula_steering(d, angles[ell]), b.conj())
    H /= np.linalg.norm(H)

    ul_angles = angles + angle_jitter * rng.standard_normal(paths)
    ul_powers = powers * rng.uniform(0.5, 1.5, size=paths)
    Sigma = np.zeros((d, d), dtype=complex)
    for ell in range(paths):
        s = _ula_steering(d, ul_angles[ell])
        Sigma += ul_powers[ell] * np.outer(s, s.conj())
    Sigma /= np.trace(Sigma).real
    # Small isotropic floor keeps the covariance strictly PSD.
    Sigma += 1e-8 * np.eye(d)
    Sigma = 0.5 * (Sigma + Sigma.conj().T)
    return Channel(H=H), UplinkCovariance(Sigma=Sigma, k=min(2 * paths, d))
