"""Probabilistic PMI feedback model.

A user observes the channel through a per-round dimensionality-reduction
matrix Q_t, picks the codebook entry with the largest effective gain and
reports only its index (the PMI).  This module holds the domain types and
the softmax relaxation of that hard selection rule, including sampling of
feedback indices and generation of complete feedback histories.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "Channel",
    "Codebook",
    "FeedbackRound",
    "EstimationProblem",
    "effective_codeword",
    "gain",
    "all_gains",
    "round_gains",
    "softmax_pmf",
    "sample_pmi",
    "hard_pmi",
    "cqi_value",
    "simulate_rounds",
    "simulate_problem",
]

_ORTHO_TOL = 1e-10


def _as_matrix(x: np.ndarray) -> np.ndarray:
    """View a vector as a single-column matrix; matrices pass through."""
    x = np.asarray(x)
    return x[:, None] if x.ndim == 1 else x


@dataclass(frozen=True)
class Channel:
    """Downlink channel: a d x n_rx matrix (one column per receive antenna)."""

    H: np.ndarray

    def __post_init__(self):
        H = _as_matrix(self.H)
        if H.shape[0] < 1:
            raise ValueError("channel needs at least one transmit dimension")
        if not np.all(np.isfinite(H)):
            raise ValueError("channel entries must be finite")
        object.__setattr__(self, "H", H)

    @property
    def d(self) -> int:
        return self.H.shape[0]

    @property
    def n_rx(self) -> int:
        return self.H.shape[1]

    @property
    def vector(self) -> np.ndarray:
        """The channel as a vector; only valid for a single-antenna user."""
        if self.n_rx != 1:
            raise ValueError("multi-antenna channel has no vector form")
        return self.H[:, 0]


@dataclass(frozen=True)
class Codebook:
    """Shared codebook in the reduced p-dimensional domain.

    ``V`` is p x (N*r); columns are grouped into N blocks of width r, one
    block per codeword.  Single-stream codewords must be unit norm.
    """

    V: np.ndarray
    r: int = 1

    def __post_init__(self):
        V = np.asarray(self.V)
        if V.ndim != 2:
            raise ValueError("codebook must be a 2-D array")
        if self.r < 1 or V.shape[1] % self.r != 0:
            raise ValueError("codeword width r must divide the column count")
        norms = np.linalg.norm(V, axis=0)
        if self.r == 1 and not np.allclose(norms, 1.0, atol=1e-8):
            raise ValueError("single-stream codewords must have unit norm")
        object.__setattr__(self, "V", V)

    @property
    def p(self) -> int:
        return self.V.shape[0]

    @property
    def n_codewords(self) -> int:
        return self.V.shape[1] // self.r

    def codeword(self, i: int) -> np.ndarray:
        """The i-th codeword block, shape (p, r)."""
        if not 0 <= i < self.n_codewords:
            raise IndexError(f"codeword index {i} out of range")
        return self.V[:, i * self.r : (i + 1) * self.r]

    @cached_property
    def coherence(self) -> float:
        """max over i != j of the largest singular value of V_i^H V_j.

        Reduces to max |v_i^H v_j| for single-stream codebooks.
        """
        n = self.n_codewords
        if n < 2:
            return 0.0
        G = self.V.conj().T @ self.V
        mu = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                blk = G[i * self.r : (i + 1) * self.r, j * self.r : (j + 1) * self.r]
                s = np.abs(blk[0, 0]) if self.r == 1 else np.linalg.norm(blk, 2)
                mu = max(mu, float(s))
        return mu


@dataclass(frozen=True)
class FeedbackRound:
    """One communication round: reduction matrix, reported PMI, optional CQI.

    The CQI is stored after rounding to the nearest IEEE-754 32-bit value,
    matching a 32-bit quantized report.
    """

    Q: np.ndarray
    pmi: int
    cqi: Optional[float] = None

    def __post_init__(self):
        Q = np.asarray(self.Q)
        if Q.ndim != 2:
            raise ValueError("Q must be a 2-D array")
        gram = Q.conj().T @ Q
        if not np.allclose(gram, np.eye(Q.shape[1]), atol=_ORTHO_TOL):
            raise ValueError("Q must have orthonormal columns (Q^H Q = I)")
        object.__setattr__(self, "Q", Q)
        if self.cqi is not None:
            if self.cqi < 0:
                raise ValueError("CQI must be nonnegative")
            object.__setattr__(self, "cqi", float(np.float32(self.cqi)))


@dataclass(frozen=True)
class EstimationProblem:
    """Immutable bundle of T feedback rounds, codebook and model parameters.

    ``radius`` is the norm bound of the constrained likelihood problem; it
    may be left None and chosen at solve time.
    """

    rounds: tuple
    codebook: Codebook
    tau: float
    radius: Optional[float] = None

    def __post_init__(self):
        rounds = tuple(self.rounds)
        if len(rounds) < 1:
            raise ValueError("need at least one feedback round")
        if self.tau <= 0:
            raise ValueError("temperature must be positive")
        if self.radius is not None and self.radius <= 0:
            raise ValueError("radius must be positive")
        d, p = rounds[0].Q.shape
        for rd in rounds:
            if rd.Q.shape != (d, p):
                raise ValueError("all rounds must share the same Q shape")
            if rd.pmi >= self.codebook.n_codewords:
                raise ValueError("PMI out of codebook range")
        if p != self.codebook.p:
            raise ValueError("codebook dimension does not match Q columns")
        object.__setattr__(self, "rounds", rounds)

    @property
    def T(self) -> int:
        return len(self.rounds)

    @property
    def d(self) -> int:
        return self.rounds[0].Q.shape[0]

    @property
    def p(self) -> int:
        return self.rounds[0].Q.shape[1]

    @property
    def n_codewords(self) -> int:
        return self.codebook.n_codewords

    @cached_property
    def q_stack(self) -> np.ndarray:
        """All reduction matrices stacked as a (T, d, p) array."""
        return np.stack([rd.Q for rd in self.rounds])

    @cached_property
    def effective_stack(self) -> np.ndarray:
        """Lifted codebook Q_t @ V for every round, shape (T, d, N*r)."""
        return np.matmul(self.q_stack, self.codebook.V)

    @cached_property
    def effective_flat(self) -> np.ndarray:
        """Effective codeword columns flattened to (d, T*N*r) for fast GEMMs."""
        A = self.effective_stack
        return np.ascontiguousarray(A.transpose(1, 0, 2).reshape(A.shape[1], -1))

    @cached_property
    def effective_flat_h(self) -> np.ndarray:
        """Conjugate transpose of ``effective_flat``, cached for hot loops."""
        return np.ascontiguousarray(self.effective_flat.conj().T)

    @cached_property
    def pmi_array(self) -> np.ndarray:
        return np.array([rd.pmi for rd in self.rounds], dtype=np.intp)

    @cached_property
    def cqi_array(self) -> np.ndarray:
        """CQI values as a float array; raises if any round lacks one."""
        vals = [rd.cqi for rd in self.rounds]
        if any(v is None for v in vals):
            raise ValueError("not every round carries a CQI value")
        return np.array(vals, dtype=float)

    @property
    def has_cqi(self) -> bool:
        return all(rd.cqi is not None for rd in self.rounds)


def effective_codeword(problem: EstimationProblem, t: int, i: int) -> np.ndarray:
    """Codeword i lifted through round t's reduction matrix: Q_t @ V_i.

    Returns a vector for single-stream codebooks, a (d, r) matrix otherwise.
    """
    if not 0 <= t < problem.T:
        raise IndexError(f"round index {t} out of range")
    a = problem.rounds[t].Q @ problem.codebook.codeword(i)
    return a[:, 0] if problem.codebook.r == 1 else a


def _gains_from_qstack(qs: np.ndarray, cb: Codebook, x: np.ndarray) -> np.ndarray:
    """Squared Frobenius gains ||V_i^H Q_t^H X||_F^2 for all rounds and codewords.

    qs: (T, d, p) stacked reduction matrices; x: (d,) or (d, m).
    Returns a real (T, N) array.
    """
    X = _as_matrix(x)
    # B[t] = Q_t^H X, then C[t] = V^H B[t] gives every codeword column at once.
    B = np.einsum("tdp,dm->tpm", qs.conj(), X)
    C = np.einsum("pc,tpm->tcm", cb.V.conj(), B)
    T = qs.shape[0]
    C = C.reshape(T, cb.n_codewords, cb.r, X.shape[1])
    return np.einsum("tnrm,tnrm->tn", C, C.conj()).real


def _gains_from_proj(problem: EstimationProblem, C: np.ndarray) -> np.ndarray:
    """Reduce per-column projections (T*N*r, m) to per-codeword gains (T, N)."""
    cb = problem.codebook
    sq = C.real**2
    if np.iscomplexobj(C):
        sq = sq + C.imag**2
    return sq.reshape(problem.T, cb.n_codewords, -1).sum(axis=2)


def all_gains(problem: EstimationProblem, x: np.ndarray) -> np.ndarray:
    """Gain matrix of shape (T, N); entry (t, i) is round t's gain at codeword i."""
    return _gains_from_proj(problem, problem.effective_flat_h @ _as_matrix(x))


def round_gains(problem: EstimationProblem, t: int, x: np.ndarray) -> np.ndarray:
    if not 0 <= t < problem.T:
        raise IndexError(f"round index {t} out of range")
    return _gains_from_qstack(problem.q_stack[t : t + 1], problem.codebook, x)[0]


def gain(problem: EstimationProblem, t: int, i: int, x: np.ndarray) -> float:
    """||V_i^H Q_t^H X||_F^2; reduces to |a_{t,i}^H x|^2 for one stream."""
    if not 0 <= i < problem.n_codewords:
        raise IndexError(f"codeword index {i} out of range")
    X = _as_matrix(x)
    if X.shape[0] != problem.d:
        raise ValueError("x has wrong leading dimension")
    proj = problem.codebook.codeword(i).conj().T @ problem.rounds[t].Q.conj().T @ X
    return float(np.sum(np.abs(proj) ** 2))


def _softmax(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction; safe for large scores."""
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_pmf(problem: EstimationProblem, t: int, x: np.ndarray) -> np.ndarray:
    """Selection probabilities: entry i proportional to exp(gain(t,i,x)/tau)."""
    return _softmax(round_gains(problem, t, x) / problem.tau)


def sample_pmi(
    problem: EstimationProblem, t: int, x: np.ndarray, rng: np.random.Generator
) -> int:
    """Draw a feedback index from the softmax distribution of round t.

    Inverse-CDF sampling over the pmf; in law this matches perturbing each
    gain with independent Gumbel noise and taking the argmax.
    """
    pmf = softmax_pmf(problem, t, x)
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(pmf), u, side="right"))
    return min(idx, pmf.shape[0] - 1)


def hard_pmi(problem: EstimationProblem, t: int, x: np.ndarray) -> int:
    """Argmax-gain index for round t; ties broken by the smallest index."""
    return int(np.argmax(round_gains(problem, t, x)))


def cqi_value(problem: EstimationProblem, t: int, x: np.ndarray) -> float:
    """Gain at the round's reported PMI, rounded to the nearest 32-bit float."""
    g = gain(problem, t, problem.rounds[t].pmi, x)
    return float(np.float32(g))


def simulate_rounds(
    qs: Sequence[np.ndarray],
    codebook: Codebook,
    x_true: np.ndarray,
    tau: float,
    rng: Optional[np.random.Generator] = None,
    rule: str = "softmax",
    attach_cqi: bool = False,
) -> list:
    """Generate feedback rounds for a known channel.

    rule="softmax" draws each PMI from the temperature-tau softmax model
    (requires ``rng``); rule="hard" applies the deterministic argmax rule.
    """
    if rule not in ("softmax", "hard"):
        raise ValueError(f"unknown feedback rule {rule!r}")
    if rule == "softmax" and rng is None:
        raise ValueError("softmax sampling needs an rng")
    qs = [np.asarray(Q) for Q in qs]
    gains = _gains_from_qstack(np.stack(qs), codebook, x_true)
    rounds = []
    for t, Q in enumerate(qs):
        if rule == "hard":
            pmi = int(np.argmax(gains[t]))
        else:
            pmf = _softmax(gains[t] / tau)
            u = rng.random()
            pmi = min(int(np.searchsorted(np.cumsum(pmf), u, side="right")), len(pmf) - 1)
        cqi = float(np.float32(gains[t, pmi])) if attach_cqi else None
        rounds.append(FeedbackRound(Q=Q, pmi=pmi, cqi=cqi))
    return rounds


def simulate_problem(
    qs: Sequence[np.ndarray],
    codebook: Codebook,
    x_true: np.ndarray,
    tau: float,
    rng: Optional[np.random.Generator] = None,
    rule: str = "softmax",
    attach_cqi: bool = False,
    radius: Optional[float] = None,
) -> EstimationProblem:
    """Convenience wrapper: simulate rounds and bundle them into a problem."""
    rounds = simulate_rounds(qs, codebook, x_true, tau, rng, rule, attach_cqi)
    return EstimationProblem(rounds=tuple(rounds), codebook=codebook, tau=tau, radius=radius)
