"""Comparison estimators: spectral, alternating minimization, subspace PR.

All three consume the same feedback rounds as the likelihood solver; AM and
the phase-retrieval solvers additionally require the CQI values.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .designs import eigvecs_descending, haar_stiefel
from .likelihood import NumericalFailureError
from .metrics import procrustes_rel_change
from .model import EstimationProblem

__all__ = [
    "BaselineConfig",
    "BaselineReport",
    "DegenerateEstimateWarning",
    "two_stage_estimate",
    "spectral_estimate",
    "am_estimate_single",
    "am_estimate_multi",
    "subspace_pr_estimate",
]


class DegenerateEstimateWarning(UserWarning):
    pass


@dataclass
class BaselineConfig:
    """Knobs shared by the iterative baselines.

    ``lambda_am`` defaults to 1 for single-stream AM and 100 for the
    multi-stream variant when left unset.
    """

    lambda_am: Optional[float] = None
    max_iters: int = 100
    rel_tol: float = 1e-3
    pr_variant: str = "best-of-both"
    init: str = "spectral"
    seed: int = 0

    def __post_init__(self):
        if self.lambda_am is not None and self.lambda_am < 0:
            raise ValueError("regularizer must be nonnegative")


@dataclass
class BaselineReport:
    iterations: int
    objective: float
    stop_reason: str
    degenerate: bool = False
    variant: Optional[str] = None


def two_stage_estimate(problem: EstimationProblem) -> np.ndarray:
    """Single-round estimate Q_1 V_{I_1}: outer reduction times the codeword."""
    rd = problem.rounds[0]
    return rd.Q @ problem.codebook.codeword(rd.pmi)


def _pmi_covariance(problem: EstimationProblem, basis: Optional[np.ndarray] = None) -> np.ndarray:
    """(1/T) sum_t W_t V_{I_t} V_{I_t}^H W_t^H with W_t = Q_t or B^H Q_t."""
    cb = problem.codebook
    dim = problem.d if basis is None else basis.shape[1]
    dtype = complex if np.iscomplexobj(problem.q_stack) or np.iscomplexobj(cb.V) else float
    cov = np.zeros((dim, dim), dtype=dtype)
    for rd in problem.rounds:
        W = rd.Q if basis is None else basis.conj().T @ rd.Q
        E = W @ cb.codeword(rd.pmi)
        cov += E @ E.conj().T
    return cov / problem.T


def spectral_estimate(problem: EstimationProblem, r: Optional[int] = None) -> np.ndarray:
    """Top-r eigenvectors of the sample covariance of selected codewords.

    At T = 1 the column space equals range(Q_1 V_{I_1}), i.e. the two-stage
    precoding estimate.
    """
    r = r if r is not None else problem.codebook.r
    cov = _pmi_covariance(problem)
    w = np.linalg.eigvalsh(cov)[::-1]
    if r > np.sum(w > w[0] * 1e-12):
        warnings.warn(
            "requested more beams than the PMI covariance rank; "
            "extra columns filled from the eigenbasis",
            DegenerateEstimateWarning,
        )
    return eigvecs_descending(cov, r)


def _am_phase_ls_loop(
    rows: np.ndarray,
    targets: np.ndarray,
    lam: float,
    x0: np.ndarray,
    max_iters: int,
    rel_tol: float,
) -> tuple[np.ndarray, BaselineReport]:
    """Alternate exact phase and regularized least-squares updates.

    rows[t] is the sensing vector b_t, so the residual model is
    |b_t^H x| ~ targets[t].  Both block updates are exact minimizers, so the
    objective sum_t (|b_t^H x| - targets_t)^2 + lam ||x||^2 never increases.
    """
    T, dim = rows.shape
    gram = rows.T @ rows.conj() + lam * np.eye(dim)
    singular = False
    x = x0
    obj = np.inf
    stop = "max-iters"
    it = 0
    for it in range(1, max_iters + 1):
        z = rows.conj() @ x  # b_t^H x
        mag = np.abs(z)
        phases = np.where(mag > 0, z / np.where(mag > 0, mag, 1.0), 1.0)
        rhs = rows.T @ (phases * targets)  # sum_t b_t e^{-j phi_t} y_t
        if lam > 0:
            x_new = np.linalg.solve(gram, rhs)
        else:
            try:
                x_new = np.linalg.solve(gram, rhs)
            except np.linalg.LinAlgError:
                singular = True
                x_new = np.linalg.pinv(gram) @ rhs
        obj = float(np.sum((np.abs(rows.conj() @ x_new) - targets) ** 2) + lam * np.linalg.norm(x_new) ** 2)
        if np.linalg.norm(x_new) == 0 and np.linalg.norm(x) == 0:
            rel = 0.0
        else:
            rel = procrustes_rel_change(x_new, x)
        x = x_new
        if rel < rel_tol:
            stop = "converged"
            break
    return x, BaselineReport(iterations=it, objective=obj, stop_reason=stop, degenerate=singular)


def am_estimate_single(
    problem: EstimationProblem,
    config: Optional[BaselineConfig] = None,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, BaselineReport]:
    """Single-stream alternating minimization on CQI-matched magnitudes.

    Minimizes sum_t (|v_{I_t}^H Q_t^H x| - sqrt(eta_t))^2 + lambda ||x||^2 by
    alternating an exact phase assignment with a regularized least-squares
    solve; spectral initialization by default.
    """
    config = config or BaselineConfig()
    if problem.codebook.r != 1:
        raise ValueError("single-stream AM requires a width-1 codebook")
    eta = problem.cqi_array
    lam = config.lambda_am if config.lambda_am is not None else 1.0
    rows = np.stack(
        [rd.Q @ problem.codebook.codeword(rd.pmi)[:, 0] for rd in problem.rounds]
    )
    if config.init == "spectral":
        x0 = spectral_estimate(problem, 1)[:, 0]
    elif config.init == "identity":
        x0 = np.eye(problem.d, 1, dtype=rows.dtype)[:, 0]
    elif config.init == "random":
        rng = rng or np.random.default_rng(config.seed)
        x0 = haar_stiefel(problem.d, 1, rng, real=not np.iscomplexobj(rows))[:, 0]
    else:
        raise ValueError(f"unknown initialization {config.init!r}")
    return _am_phase_ls_loop(
        rows, np.sqrt(eta), lam, x0.astype(rows.dtype), config.max_iters, config.rel_tol
    )


def am_estimate_multi(
    problem: EstimationProblem,
    r: int,
    config: Optional[BaselineConfig] = None,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, BaselineReport]:
    """Sequential multi-stream AM under an equal CQI partition.

    Stream k is solved in the orthogonal complement of the previously
    returned columns with per-stream targets eta_t / r and random
    initialization, then normalized, so the output has orthonormal columns.
    """
    config = config or BaselineConfig()
    rng = rng or np.random.default_rng(config.seed)
    eta = problem.cqi_array
    lam = config.lambda_am if config.lambda_am is not None else (1.0 if r == 1 else 100.0)
    d = problem.d
    if r > d:
        raise ValueError("stream count exceeds the ambient dimension")
    cb = problem.codebook
    dtype = complex if np.iscomplexobj(problem.q_stack) or np.iscomplexobj(cb.V) else float
    cols = []
    total_iters = 0
    last = None
    for k in range(r):
        if cols:
            prev = np.stack(cols, axis=1)
            Qc, _ = np.linalg.qr(prev, mode="complete")
            P = Qc[:, len(cols) :]
        else:
            P = np.eye(d, dtype=dtype)
        if P.shape[1] < 1:
            raise ValueError("no orthogonal complement left for the next stream")
        stream_col = min(k, cb.r - 1)
        rows = np.stack(
            [
                P.conj().T @ (rd.Q @ cb.codeword(rd.pmi)[:, stream_col])
                for rd in problem.rounds
            ]
        )
        u0 = haar_stiefel(P.shape[1], 1, rng, real=dtype is float)[:, 0]
        u, rep = _am_phase_ls_loop(
            rows, np.sqrt(eta / r), lam, u0.astype(rows.dtype), config.max_iters, config.rel_tol
        )
        total_iters += rep.iterations
        last = rep
        nrm = np.linalg.norm(u)
        if nrm == 0:
            warnings.warn("AM stream collapsed to zero; using a complement basis vector", DegenerateEstimateWarning)
            u = np.eye(P.shape[1], 1, dtype=rows.dtype)[:, 0]
            nrm = 1.0
        cols.append(P @ (u / nrm))
    H = np.stack(cols, axis=1)
    report = BaselineReport(
        iterations=total_iters,
        objective=last.objective if last else 0.0,
        stop_reason=last.stop_reason if last else "converged",
        degenerate=last.degenerate if last else False,
    )
    return H, report


def _pr_data(problem: EstimationProblem, basis: np.ndarray) -> np.ndarray:
    """M_t = B^H Q_t V_{I_t}, stacked as (T, k, r)."""
    cb = problem.codebook
    return np.stack(
        [basis.conj().T @ rd.Q @ cb.codeword(rd.pmi) for rd in problem.rounds]
    )


def _intensities(Ms: np.ndarray, S: np.ndarray) -> np.ndarray:
    proj = np.einsum("tkr,km->trm", Ms.conj(), S)
    return np.einsum("trm,trm->t", proj, proj.conj()).real


def _wf_loss_grad(Ms: np.ndarray, eta: np.ndarray, S: np.ndarray) -> tuple[float, np.ndarray]:
    """Intensity loss mean((y_t - eta_t)^2) and its gradient in S."""
    y = _intensities(Ms, S)
    resid = y - eta
    loss = float(np.mean(resid**2))
    MhS = np.einsum("tkr,km->trm", Ms.conj(), S)
    grad = (4.0 / Ms.shape[0]) * np.einsum("t,tkr,trm->km", resid, Ms, MhS)
    return loss, grad


def _af_loss_grad(Ms: np.ndarray, eta: np.ndarray, S: np.ndarray) -> tuple[float, np.ndarray]:
    """Amplitude loss mean((sqrt(y_t) - sqrt(eta_t))^2) and its gradient."""
    y = _intensities(Ms, S)
    amp = np.sqrt(y)
    loss = float(np.mean((amp - np.sqrt(eta)) ** 2))
    safe = np.where(amp > 1e-15, amp, 1.0)
    factor = np.where(amp > 1e-15, 1.0 - np.sqrt(eta) / safe, 0.0)
    MhS = np.einsum("tkr,km->trm", Ms.conj(), S)
    grad = (2.0 / Ms.shape[0]) * np.einsum("t,tkr,trm->km", factor, Ms, MhS)
    return loss, grad


def _pr_descent(
    Ms: np.ndarray,
    eta: np.ndarray,
    S0: np.ndarray,
    step0: float,
    loss_grad,
    max_iters: int,
    rel_tol: float,
) -> tuple[np.ndarray, float, int, str]:
    S = S0
    loss, grad = loss_grad(Ms, eta, S)
    step = step0
    stop = "max-iters"
    it = 0
    for it in range(1, max_iters + 1):
        trial = step
        S_new = S - trial * grad
        loss_new, grad_new = loss_grad(Ms, eta, S_new)
        while loss_new > loss and trial > 1e-20 * step0:
            trial /= 2.0
            S_new = S - trial * grad
            loss_new, grad_new = loss_grad(Ms, eta, S_new)
        if not np.isfinite(loss_new):
            raise NumericalFailureError(f"non-finite phase-retrieval loss at iteration {it}")
        rel = procrustes_rel_change(S_new, S) if np.linalg.norm(S) > 0 else 0.0
        S, loss, grad = S_new, loss_new, grad_new
        step = trial if trial < step else min(2.0 * trial, step0)
        if rel < rel_tol:
            stop = "converged"
            break
    return S, loss, it, stop


def subspace_pr_estimate(
    problem: EstimationProblem,
    prior,
    r: Optional[int] = None,
    config: Optional[BaselineConfig] = None,
) -> tuple[np.ndarray, BaselineReport]:
    """Phase retrieval of B_k S from CQI magnitudes inside a subspace prior.

    Runs gradient descent on the intensity loss (Wirtinger flow) and/or the
    amplitude loss (amplitude flow) from a subspace-aware spectral
    initialization; "best-of-both" keeps whichever solution has the lower
    amplitude residual.
    """
    config = config or BaselineConfig()
    B = prior.B if hasattr(prior, "B") else np.asarray(prior)
    r = r if r is not None else problem.codebook.r
    eta = problem.cqi_array
    Ms = _pr_data(problem, B)
    if np.max(eta) <= 0:
        warnings.warn("all CQI values vanish; returning the zero estimate", DegenerateEstimateWarning)
        S = np.zeros((B.shape[1], r), dtype=Ms.dtype)
        return B @ S, BaselineReport(0, 0.0, "degenerate", degenerate=True)
    cov = np.einsum("tkr,tlr->kl", Ms, Ms.conj()) / Ms.shape[0]
    lam_max = float(np.linalg.eigvalsh(cov)[-1].real)
    S0 = eigvecs_descending(cov, r).astype(Ms.dtype)
    y0 = _intensities(Ms, S0)
    scale = np.sqrt(np.sum(eta) / np.sum(y0)) if np.sum(y0) > 0 else 1.0
    S0 = scale * S0
    step0 = 1.0 / lam_max if lam_max > 0 else 1.0

    runs = {}
    if config.pr_variant in ("wirtinger", "best-of-both"):
        runs["wirtinger"] = _pr_descent(
            Ms, eta, S0, step0, _wf_loss_grad, config.max_iters, config.rel_tol
        )
    if config.pr_variant in ("amplitude", "best-of-both"):
        runs["amplitude"] = _pr_descent(
            Ms, eta, S0, step0, _af_loss_grad, config.max_iters, config.rel_tol
        )
    if not runs:
        raise ValueError(f"unknown phase-retrieval variant {config.pr_variant!r}")
    # Compare candidates on the common amplitude residual.
    def amp_loss(S):
        return _af_loss_grad(Ms, eta, S)[0]

    name = min(runs, key=lambda k: amp_loss(runs[k][0]))
    S, loss, iters, stop = runs[name]
    return B @ S, BaselineReport(iterations=iters, objective=loss, stop_reason=stop, variant=name)
