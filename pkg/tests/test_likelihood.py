import numpy as np
import pytest

from pmichannel import designs, likelihood, metrics, model, theory
from conftest import random_problem


def fd_gradient(problem, x, h=1e-6):
    """Independent central-difference oracle in realified coordinates."""
    x = np.asarray(x)
    complex_mode = np.iscomplexobj(x)
    out = np.zeros(x.shape, dtype=complex if complex_mode else float)
    units = (1.0, 1j) if complex_mode else (1.0,)
    for idx in np.ndindex(*x.shape):
        for unit in units:
            e = np.zeros(x.shape, dtype=out.dtype)
            e[idx] = unit
            fp = likelihood.nll(problem, x + h * e)
            fm = likelihood.nll(problem, x - h * e)
            out[idx] += (fp - fm) / (2 * h) * unit
    return out


class TestNll:
    def test_single_codeword_is_zero(self, rng):
        prob, x = random_problem(rng, p=2, n=1)
        assert likelihood.nll(prob, x) == 0.0

    def test_zero_point_gives_log_n(self, rng):
        prob, _ = random_problem(rng, n=3)
        assert abs(likelihood.nll(prob, np.zeros(prob.d)) - np.log(3)) < 1e-12

    def test_scalar_oracle(self):
        # d=2, N=2, T=1: explicit effective codewords and direct evaluation
        V = np.array([[1.0, 0.0], [0.0, 1.0]], dtype=complex)
        cb = model.Codebook(V=V)
        q = np.eye(2, dtype=complex)
        rd = model.FeedbackRound(Q=q, pmi=1)
        prob = model.EstimationProblem((rd,), cb, tau=0.3)
        x = np.array([0.4 + 0.1j, -0.2j])
        g = np.abs(x) ** 2
        expected = np.log(np.exp((g[0] - g[1]) / 0.3) + 1.0)
        assert abs(likelihood.nll(prob, x) - expected) < 1e-12

    def test_nonnegative(self, rng):
        for _ in range(10):
            prob, x = random_problem(rng)
            assert likelihood.nll(prob, 2.0 * x) >= 0.0


class TestRelaxedLoss:
    def test_zero_point(self, rng):
        prob, _ = random_problem(rng, n=3)
        assert abs(likelihood.relaxed_loss(prob, np.zeros(prob.d))) < 1e-12

    def test_single_codeword(self, rng):
        prob, x = random_problem(rng, p=2, n=1)
        assert abs(likelihood.relaxed_loss(prob, x)) < 1e-12

    def test_affine_identity(self, rng):
        for _ in range(30):
            prob, x = random_problem(rng, tau=float(rng.uniform(0.1, 3.0)))
            scale = float(rng.uniform(0.1, 2.0))
            lhs = likelihood.relaxed_loss(prob, scale * x)
            rhs = prob.tau * likelihood.nll(prob, scale * x) - prob.tau * np.log(prob.n_codewords)
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


class TestGradient:
    def test_single_codeword_zero(self, rng):
        prob, x = random_problem(rng, p=2, n=1)
        assert np.linalg.norm(likelihood.nll_gradient(prob, x)) == 0.0

    def test_zero_point_zero(self, rng):
        prob, _ = random_problem(rng)
        assert np.linalg.norm(likelihood.nll_gradient(prob, np.zeros(prob.d))) == 0.0

    def test_real_matches_paper_formula(self, rng):
        prob, x = random_problem(rng, complex_mode=False, d=3, p=3, n=3, T=2)
        x = rng.standard_normal(3)
        expected = np.zeros(3)
        for t in range(prob.T):
            pmf = model.softmax_pmf(prob, t, x)
            i_sel = prob.rounds[t].pmi
            a_sel = model.effective_codeword(prob, t, i_sel)
            for j in range(prob.n_codewords):
                a = model.effective_codeword(prob, t, j)
                A_diff = np.outer(a, a) - np.outer(a_sel, a_sel)
                expected += (2 / prob.tau) * pmf[j] * (A_diff @ x)
        expected /= prob.T
        np.testing.assert_allclose(likelihood.nll_gradient(prob, x), expected, atol=1e-12)

    def test_fd_real(self, rng):
        prob, _ = random_problem(rng, complex_mode=False, d=3, p=3, n=3, T=2)
        x = 0.8 * rng.standard_normal(3)
        g = likelihood.nll_gradient(prob, x)
        fd = fd_gradient(prob, x)
        assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-6

    def test_fd_complex_multistream(self, rng):
        prob, _ = random_problem(rng, d=5, p=4, n=2, r=2, T=3)
        X = 0.5 * (rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2)))
        G = likelihood.nll_gradient(prob, X)
        fd = fd_gradient(prob, X)
        assert np.linalg.norm(G - fd) / np.linalg.norm(fd) < 1e-6

    def test_unitary_covariance(self, rng):
        prob, _ = random_problem(rng, d=5, p=4, n=2, r=2, T=3)
        X = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
        U = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))[0]
        assert abs(likelihood.nll(prob, X @ U) - likelihood.nll(prob, X)) < 1e-10
        G = likelihood.nll_gradient(prob, X)
        GU = likelihood.nll_gradient(prob, X @ U)
        np.testing.assert_allclose(GU, G @ U, atol=1e-10)

    def test_descent_direction(self, rng):
        prob, x = random_problem(rng)
        g = likelihood.nll_gradient(prob, x)
        f0 = likelihood.nll(prob, x)
        assert likelihood.nll(prob, x - 1e-4 * g) < f0


class TestHessianReal:
    def test_single_codeword_zero(self, rng):
        prob, x = random_problem(rng, complex_mode=False, p=2, n=1)
        H = likelihood.nll_hessian_real(prob, x.real)
        np.testing.assert_allclose(H, np.zeros_like(H), atol=1e-14)

    def test_fd_oracle(self, rng):
        prob, _ = random_problem(rng, complex_mode=False, d=4, p=3, n=3, T=3)
        x = 0.7 * rng.standard_normal(4)
        H = likelihood.nll_hessian_real(prob, x)
        assert np.max(np.abs(H - H.T)) < 1e-12
        eps = 1e-6
        Hfd = np.zeros_like(H)
        for i in range(4):
            e = np.zeros(4)
            e[i] = eps
            Hfd[:, i] = (
                likelihood.nll_gradient(prob, x + e) - likelihood.nll_gradient(prob, x - e)
            ) / (2 * eps)
        assert np.max(np.abs(H - 0.5 * (Hfd + Hfd.T))) < 1e-5

    def test_complex_input_rejected(self, rng):
        prob, x = random_problem(rng)
        with pytest.raises(ValueError):
            likelihood.nll_hessian_real(prob, x)

    def test_population_hessian_beats_beta0(self):
        # E-Hessian at h on a certified design dominates the computable
        # strong-convexity constant.
        rng = np.random.default_rng(77)
        d, p, n, T, tau, radius = 6, 3, 3, 300, 0.5, 1.5
        cb = designs.identity_codebook(p, n)
        h = rng.standard_normal(d)
        h /= np.linalg.norm(h)
        qs = designs.haar_stiefel_stack(T, d, p, rng, real=True)
        prob = model.simulate_problem(qs, cb, h, tau, rng, radius=radius)
        sec = theory.certify_secant(qs, cb, h, trials=100, rng=rng, radius=radius)
        # Traceless-operator floor adjusted so it covers all secant matrices.
        kappa_eff = sec.operator_min * (1.0 - 1.0 / d)
        p_min = theory.p_min_value(n, radius, tau)
        beta0 = theory.beta0_value(kappa_eff, p_min, np.linalg.norm(h), tau)
        # Population Hessian at h: replace the selected-codeword term of the
        # sample Hessian by its expectation (the other terms do not depend
        # on the observed indices).
        H_sample = likelihood.nll_hessian_real(prob, h)
        corr = np.zeros((d, d))
        for t in range(T):
            pmf = model.softmax_pmf(prob, t, h)
            a_sel = model.effective_codeword(prob, t, prob.rounds[t].pmi)
            corr += np.outer(a_sel, a_sel)
            for i in range(n):
                a = model.effective_codeword(prob, t, i)
                corr -= pmf[i] * np.outer(a, a)
        H_pop = H_sample + (2.0 / (tau * T)) * corr
        lam_min = np.linalg.eigvalsh(H_pop)[0]
        assert lam_min >= beta0 > 0


class TestSolveMle:
    def test_single_round_aligns_with_selected_codeword(self, rng):
        prob, _ = random_problem(rng, d=6, p=4, n=4, T=1, tau=1.0, radius=20.0)
        x, rep = likelihood.solve_mle(
            prob, likelihood.MleConfig(init="spectral", max_iters=100)
        )
        a = model.effective_codeword(prob, 0, prob.rounds[0].pmi)
        corr = abs(np.vdot(a, x[:, 0])) / np.linalg.norm(x)
        assert corr > 0.99

    def test_single_codeword_immediate_stop(self, rng):
        prob, x = random_problem(rng, p=2, n=1)
        _, rep = likelihood.solve_mle(
            prob, likelihood.MleConfig(init="explicit", x0=x)
        )
        assert rep.iterations == 1
        assert rep.stop_reason == "converged"
        assert rep.rel_change == 0.0

    def test_monte_carlo_sanity_real(self):
        rng = np.random.default_rng(3)
        d, p, n, T, tau = 3, 3, 3, 2000, 0.5
        cb = designs.identity_codebook(p, n)
        h = rng.standard_normal(d)
        h /= np.linalg.norm(h)
        qs = designs.haar_stiefel_stack(T, d, p, rng, real=True)
        prob = model.simulate_problem(qs, cb, h, tau, rng, radius=2.0)
        x0 = np.eye(d, 1)
        x, rep = likelihood.solve_mle(
            prob, likelihood.MleConfig(init="explicit", x0=x0, max_iters=300, rel_tol=1e-9)
        )
        assert metrics.dist(x[:, 0], h) < metrics.dist(x0[:, 0], h)
        assert likelihood.nll(prob, x[:, 0]) <= likelihood.nll(prob, h) + 1e-6

    def test_objective_monotone(self, rng):
        prob, _ = random_problem(rng, d=5, p=3, n=3, T=20, radius=3.0)
        vals = []

        orig = likelihood._value_and_grad

        def spy(problem, X):
            out = orig(problem, X)
            vals.append(out[0])
            return out

        likelihood._value_and_grad = spy
        try:
            likelihood.solve_mle(prob, likelihood.MleConfig(init="identity", max_iters=40))
        finally:
            likelihood._value_and_grad = orig
        accepted = np.array(vals)
        assert np.all(np.diff(accepted) <= 1e-12)

    def test_norm_constraint_respected(self, rng):
        prob, _ = random_problem(rng, T=2, radius=0.5)
        x, rep = likelihood.solve_mle(prob, likelihood.MleConfig(init="identity", max_iters=50))
        assert np.linalg.norm(x) <= 0.5 + 1e-12

    def test_subspace_mode_stays_in_span(self, rng):
        prob, _ = random_problem(rng, d=6, p=4, n=4, T=5, radius=4.0)
        B = designs.haar_stiefel(6, 3, rng)
        prior = likelihood.SubspacePrior(B)
        x, rep = likelihood.solve_mle(
            prob, likelihood.MleConfig(init="identity", max_iters=50), prior
        )
        resid = x - B @ (B.conj().T @ x)
        assert np.linalg.norm(resid) < 1e-10
        assert rep.coefficients is not None

    def test_report_fields(self, rng):
        prob, _ = random_problem(rng, T=3, radius=2.0)
        _, rep = likelihood.solve_mle(prob, likelihood.MleConfig(max_iters=5))
        assert rep.stop_reason in ("converged", "max-iters")
        assert rep.radius == 2.0
        assert np.isfinite(rep.nll)


class TestPopulationExcessRisk:
    def test_zero_at_truth(self, rng):
        prob, h = random_problem(rng)
        assert likelihood.population_excess_risk(prob, h, h) == 0.0

    def test_phase_invariance(self, rng):
        prob, h = random_problem(rng)
        assert likelihood.population_excess_risk(prob, h, np.exp(0.9j) * h) < 1e-12

    def test_enumeration_oracle(self, rng):
        from scipy.special import logsumexp

        for _ in range(10):
            prob, h = random_problem(rng, d=4, p=3, n=3, T=3)
            x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            risk = likelihood.population_excess_risk(prob, h, x)
            enum = 0.0
            for t in range(prob.T):
                pmf = model.softmax_pmf(prob, t, h)
                gx = np.array([model.gain(prob, t, i, x) for i in range(3)]) / prob.tau
                gh = np.array([model.gain(prob, t, i, h) for i in range(3)]) / prob.tau
                for i in range(3):
                    ell_x = logsumexp(gx - gx[i])
                    ell_h = logsumexp(gh - gh[i])
                    enum += pmf[i] * (ell_x - ell_h)
            enum /= prob.T
            assert abs(risk - enum) < 1e-12

    def test_nonnegative(self, rng):
        for _ in range(10):
            prob, h = random_problem(rng)
            x = rng.standard_normal(prob.d) + 1j * rng.standard_normal(prob.d)
            assert likelihood.population_excess_risk(prob, h, x) >= 0.0

    def test_lower_bound_by_lifted_distance(self):
        # risk >= (kappa0 p_min^2 / 4 tau^2) ||xx^T - hh^T||_F^2 on a
        # certified real design
        rng = np.random.default_rng(21)
        d, p, n, T, tau, radius = 5, 3, 3, 400, 0.6, 1.5
        cb = designs.identity_codebook(p, n)
        h = rng.standard_normal(d)
        h /= np.linalg.norm(h)
        qs = designs.haar_stiefel_stack(T, d, p, rng, real=True)
        prob = model.simulate_problem(qs, cb, h, tau, rng, radius=radius)
        sec = theory.certify_secant(qs, cb, h, trials=50, rng=rng, radius=radius)
        kappa_eff = sec.operator_min * (1.0 - 1.0 / d)
        p_min = theory.p_min_value(n, radius, tau)
        for _ in range(20):
            x = rng.standard_normal(d)
            x *= rng.uniform(0.2, radius) / np.linalg.norm(x)
            risk = likelihood.population_excess_risk(prob, h, x)
            lifted = np.linalg.norm(np.outer(x, x) - np.outer(h, h)) ** 2
            assert risk >= kappa_eff * p_min**2 / (4 * tau**2) * lifted - 1e-12
