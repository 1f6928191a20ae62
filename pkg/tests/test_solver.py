import numpy as np
import pytest

import nullgraph as ng
from nullgraph.solver import (
    SolverConfig,
    SolverDivergence,
    SolverError,
    TvProxDenoiser,
    WaveletSoftDenoiser,
    auto_step,
    contraction_rate,
    make_denoiser,
    psnr,
    quadratic_fixed_point,
    run_pnp_pgd,
    smooth_gradient,
    smooth_objective,
    spectral_step_size,
)
from nullgraph.wavelet import wavedec2, waverec2, wavelet_soft_denoise


# ---------------------------------------------------------------------------
# wavelet transform and denoisers
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("filt", ["haar", "db4"])
def test_wavelet_orthogonal_roundtrip(filt, rng):
    img = rng.standard_normal((2, 16, 16))
    ll, det = wavedec2(img, filt, 2)
    rec = waverec2(ll, det, filt)
    assert np.abs(rec - img).max() <= 1e-12
    energy = (ll**2).sum() + sum((b**2).sum() for bands in det for b in bands)
    assert energy == pytest.approx((img**2).sum(), rel=1e-12)


def test_wavelet_threshold_zero_is_identity(rng):
    img = rng.standard_normal((1, 8, 8))
    out = wavelet_soft_denoise(img, "haar", 2, 0.0)
    assert np.abs(out - img).max() <= 1e-10


def test_wavelet_constant_image_unchanged():
    img = np.full((1, 8, 8), 0.37)
    out = wavelet_soft_denoise(img, "db4", 2, 0.5)
    assert np.abs(out - img).max() <= 1e-12


@pytest.mark.parametrize("filt", ["haar", "db4"])
def test_wavelet_denoiser_nonexpansive(filt, rng):
    den = WaveletSoftDenoiser(filt, 2, 0.1)
    for _ in range(1000):
        u = rng.standard_normal((1, 8, 8))
        v = rng.standard_normal((1, 8, 8))
        assert np.linalg.norm(den(u) - den(v)) <= np.linalg.norm(u - v) + 1e-12


def test_wavelet_dimension_guard():
    with pytest.raises(ValueError):
        wavedec2(np.zeros((1, 6, 6)), "haar", 2)  # 3x3 after one level
    with pytest.raises(ValueError):
        wavedec2(np.zeros((1, 4, 4)), "db4", 2)  # band shorter than filter


def test_tv_prox_denoiser_smooths(rng):
    den = TvProxDenoiser(weight=0.2, inner_iters=30)
    img = rng.standard_normal((1, 8, 8))
    out = den(img)
    lap = ng.build_laplacian("Grid4NN", 8, 8)
    assert ng.dirichlet_energy(lap, out.ravel()) < ng.dirichlet_energy(lap, img.ravel())


def test_make_denoiser_dispatch():
    assert make_denoiser("identity")(np.ones((1, 2, 2))) is not None
    assert isinstance(make_denoiser("WaveletSoft", filt="db4", levels=1, threshold=0.1),
                      WaveletSoftDenoiser)
    assert isinstance(make_denoiser("TvProx", weight=0.1), TvProxDenoiser)
    with pytest.raises(SolverError):
        make_denoiser("dncnn")


# ---------------------------------------------------------------------------
# objective and gradient
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def problem():
    op = ng.BlockAverageSR(1, 8, 8, 2)
    lap = ng.build_laplacian("Grid4NN", 8, 8)
    basis = ng.null_mode_basis(op, lap).truncate(10)
    return op, lap, basis


def test_objective_zero_at_consistent_point(problem, rng):
    op, lap, basis = problem
    x = rng.standard_normal(op.n)
    y = op.apply(x)
    assert smooth_objective(op, y, x) == pytest.approx(0.0, abs=1e-20)


def test_objective_graph_term_is_null_dirichlet_energy(problem, rng):
    op, lap, basis = problem
    x = rng.standard_normal(op.n)
    y = np.zeros(op.m)
    base = smooth_objective(op, y, x)
    with_graph = smooth_objective(op, y, x, laplacian=lap, gamma_g=2.0)
    expected = ng.dirichlet_energy(lap, op.project_null(x))
    assert with_graph - base == pytest.approx(expected, abs=1e-10)


def fd_gradient(fun, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


@pytest.mark.parametrize("topo", ["Grid4NN", "Grid8NN", "SymNormalized", "Identity"])
def test_gradient_matches_finite_differences_all_kinds(topo, rng):
    ops = [
        ng.BlockAverageSR(1, 4, 4, 2),
        ng.HadamardCS(1, 4, 4, 6),
        ng.BayerMosaic(3, 4, 4),
        ng.GaussianBlur(1, 4, 4),
    ]
    for op in ops:
        lap = ng.build_laplacian(topo, 4, 4)
        if op.channels == 3:
            lap = ng.channel_lift(lap, 3)
        k = min(5, op.null_dim)
        basis = ng.null_mode_basis(op, lap).truncate(k) if k else None
        gamma = 0.7 if k else 0.0
        coeff_hat = rng.standard_normal(k) if k else None
        y = rng.standard_normal(op.m)

        def f(x):
            return smooth_objective(op, y, x, basis, coeff_hat, lap, gamma, 0.3)

        for _ in range(5):
            x = rng.standard_normal(op.n)
            analytic = smooth_gradient(op, y, x, basis, coeff_hat, lap, gamma, 0.3)
            numeric = fd_gradient(f, x)
            denom = max(np.linalg.norm(numeric), 1e-12)
            assert np.linalg.norm(analytic - numeric) / denom <= 1e-5


# ---------------------------------------------------------------------------
# step sizing and contraction
# ---------------------------------------------------------------------------

def test_step_spectrum_singular_without_graph(problem):
    op, lap, basis = problem
    ss = spectral_step_size(op, gamma_g=0.0)
    assert ss.singular and ss.lam_min == 0.0 and np.isinf(ss.kappa)
    assert ss.lam_max == pytest.approx(0.25, abs=1e-10)  # (1/f^2) for f=2


def test_step_spectrum_positive_with_graph(problem):
    op, lap, basis = problem
    ss = spectral_step_size(op, lap, gamma_g=0.1)
    assert not ss.singular and ss.lam_min > 0
    assert 0 < ss.rho_star < 1
    assert ss.alpha_star == pytest.approx(2.0 / (ss.lam_min + ss.lam_max))


def test_step_spectrum_power_matches_dense(problem):
    # Power iteration stalls on clustered extremes; percent-level agreement is
    # what 50 iterations buy, and is enough for step sizing.
    op, lap, basis = problem
    dense = spectral_step_size(op, lap, gamma_g=0.1, method="dense")
    power = spectral_step_size(op, lap, gamma_g=0.1, method="power")
    assert power.lam_max == pytest.approx(dense.lam_max, rel=1e-2)
    assert power.lam_min == pytest.approx(dense.lam_min, abs=0.05 * dense.lam_max)


def test_kappa_shrinks_with_graph_weight():
    op = ng.BlockAverageSR(1, 16, 16, 4)
    lap = ng.build_laplacian("Grid4NN", 16, 16)
    k_tiny = spectral_step_size(op, lap, gamma_g=1e-3).kappa
    k_mid = spectral_step_size(op, lap, gamma_g=0.1).kappa
    assert k_mid < k_tiny


def test_auto_step_matches_lambda_max(problem):
    op, lap, basis = problem
    dense = spectral_step_size(op, lap, gamma_g=0.1, method="dense")
    power = spectral_step_size(op, lap, gamma_g=0.1, method="power")
    alpha = auto_step(op, lap, 0.1)
    assert alpha == pytest.approx(1.0 / power.lam_max, rel=1e-9)
    assert alpha < 2.0 / dense.lam_max  # stays inside the stable range


def test_contraction_identity_denoiser(problem, rng):
    op, lap, basis = problem
    ss = spectral_step_size(op, lap, gamma_g=0.1)
    y = op.apply(rng.standard_normal(op.n))
    x_star = quadratic_fixed_point(op, y, laplacian=lap, gamma_g=0.1)
    cfg = SolverConfig(step_alpha=ss.alpha_star, gamma_g=0.1, iterations=25)
    trace = run_pnp_pgd(op, y, cfg, laplacian=lap, x_true=x_star)
    _, summary = contraction_rate(trace.err_norm)
    assert summary <= ss.rho_star + 1e-6


def test_contraction_rate_constant_trace():
    ratios, summary = contraction_rate(np.ones(12))
    assert np.allclose(ratios, 1.0)
    assert summary == pytest.approx(1.0)


def test_monotone_residual_gradient_descent(problem, rng):
    op, lap, basis = problem
    x_true = rng.standard_normal(op.n)
    y = op.apply(x_true)  # consistent, no noise
    cfg = SolverConfig(step_alpha=4.0, iterations=40)  # alpha < 2/lam_max = 8
    trace = run_pnp_pgd(op, y, cfg)
    res = [np.sqrt(2.0 * v) for v in trace.objective]
    assert all(b <= a + 1e-12 for a, b in zip(res, res[1:]))


# ---------------------------------------------------------------------------
# main loop behavior
# ---------------------------------------------------------------------------

def test_trace_lengths_and_final_shape(problem, rng):
    op, lap, basis = problem
    y = rng.standard_normal(op.m)
    cfg = SolverConfig(step_alpha=1.0, iterations=7)
    trace = run_pnp_pgd(op, y, cfg, x_true=rng.standard_normal(op.n))
    assert trace.objective.shape == (8,)
    assert trace.psnr.shape == (8,)
    assert trace.err_norm.shape == (8,)
    assert trace.final.shape3 == (1, 8, 8)
    rows = list(trace.rows())
    assert rows[0][0] == 0 and rows[-1][0] == 7


def test_initialization_includes_lifted_prediction(problem, rng):
    op, lap, basis = problem
    y = rng.standard_normal(op.m)
    coeff_hat = rng.standard_normal(basis.k)
    cfg = SolverConfig(step_alpha=1.0, gamma=0.5, iterations=1)
    trace = run_pnp_pgd(op, y, cfg, basis=basis, coeff_hat=coeff_hat)
    # reconstruct the documented x0 and apply one step manually
    x0 = op.adjoint(y) + basis.lift(coeff_hat)
    g = smooth_gradient(op, y, x0, basis, coeff_hat, None, 0.5, 0.0)
    assert np.allclose(trace.final.data, x0 - 1.0 * g, atol=1e-12)
    cfg_pinv = SolverConfig(step_alpha=1.0, gamma=0.5, iterations=1, init_pinv=True)
    trace_pinv = run_pnp_pgd(op, y, cfg_pinv, basis=basis, coeff_hat=coeff_hat)
    x0p = op.pinv_apply(y) + basis.lift(coeff_hat)
    gp = smooth_gradient(op, y, x0p, basis, coeff_hat, None, 0.5, 0.0)
    assert np.allclose(trace_pinv.final.data, x0p - gp, atol=1e-12)


def test_null_graph_gradient_never_touches_measurements(problem, rng):
    op, lap, basis = problem
    x = rng.standard_normal(op.n)
    tx = ng.apply_null_restricted(op, lap, x)
    assert np.linalg.norm(op.apply(0.1 * tx)) <= 1e-8 * np.linalg.norm(x)


def test_divergence_guard_raises(problem, rng):
    op, lap, basis = problem
    y = rng.standard_normal(op.m)
    cfg = SolverConfig(step_alpha=1e4, iterations=200)  # far beyond 2/lam_max
    with pytest.raises(SolverDivergence):
        run_pnp_pgd(op, y, cfg)


def test_solver_requires_pieces(problem, rng):
    op, lap, basis = problem
    y = rng.standard_normal(op.m)
    with pytest.raises(SolverError):
        run_pnp_pgd(op, y, SolverConfig(gamma=0.1, iterations=1))
    with pytest.raises(SolverError):
        run_pnp_pgd(op, y, SolverConfig(gamma_g=0.1, iterations=1))


def test_solver_deterministic(problem, rng):
    op, lap, basis = problem
    y = rng.standard_normal(op.m)
    cfg = SolverConfig(step_alpha="auto", gamma=0.1, gamma_g=0.05, iterations=10,
                       denoiser=WaveletSoftDenoiser("haar", 2, 0.02))
    coeff_hat = rng.standard_normal(basis.k)
    a = run_pnp_pgd(op, y, cfg, basis=basis, laplacian=lap, coeff_hat=coeff_hat)
    b = run_pnp_pgd(op, y, cfg, basis=basis, laplacian=lap, coeff_hat=coeff_hat)
    assert np.array_equal(a.final.data, b.final.data)
    assert np.array_equal(a.objective, b.objective)


# ---------------------------------------------------------------------------
# psnr
# ---------------------------------------------------------------------------

def test_psnr_values():
    x = np.zeros(16)
    assert np.isinf(psnr(x, x))
    assert psnr(np.ones(4), np.zeros(4)) == pytest.approx(0.0)
    y = np.zeros(100)
    y[0] = 1.0
    assert psnr(y, np.zeros(100)) == pytest.approx(20.0)  # MSE = 0.01
    with pytest.raises(ValueError):
        psnr(np.zeros(3), np.zeros(4))
    with pytest.raises(ValueError):
        psnr(x, x, peak=0.0)
