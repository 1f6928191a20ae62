"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
report.  The reconstruction criteria (08, 09) share a session fixture holding
the 32x32 downsampling problem, its null-mode basis, and the population
predictor, so the suite stays inside its runtime budget.
"""

import time

import numpy as np
import pytest
import scipy.linalg

import nullgraph as ng
from nullgraph.experiments import parse_config_text, perturb_operator, run_experiment
from nullgraph.gmrf import (
    GmrfPrior,
    coverage_closed_form,
    coverage_empirical,
    minimax_bound,
    per_mode_predictability,
    sample_gmrf,
    select_p,
    select_p_from_spectrum,
)
from nullgraph.predictors import wiener_predictor
from nullgraph.solver import (
    SolverConfig,
    WaveletSoftDenoiser,
    auto_step,
    contraction_rate,
    quadratic_fixed_point,
    run_pnp_pgd,
    spectral_step_size,
)


def report(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num:02d} {name}: {status}{' - ' + detail if detail else ''}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


# ---------------------------------------------------------------------------
# 01 - projector / decomposition suite on every operator kind
# ---------------------------------------------------------------------------

def test_criterion_01_projectors():
    t0 = time.perf_counter()
    ops = [
        ng.HadamardCS(1, 32, 32, 102),      # n = 1024, first ~10% of rows
        ng.BlockAverageSR(3, 32, 32, 4),    # n = 3072
        ng.BayerMosaic(3, 32, 32),          # n = 3072
        # Effective null space: directions below tau are invisible to 1e-8,
        # so the blur needs tau at that level (and a bandwidth wide enough
        # that such directions exist).
        ng.GaussianBlur(3, 32, 32, sigma_k=2.0, tau_svd=1e-8),
    ]
    rng = np.random.default_rng(0)
    ok = all(op.null_dim > 0 for op in ops)
    for op in ops:
        for _ in range(25):
            x = rng.standard_normal(op.n)
            nx = np.linalg.norm(x)
            pn = op.project_null(x)
            pr = op.project_range(x)
            ok &= np.linalg.norm(op.project_null(pn) - pn) <= 1e-10 * nx
            ok &= np.linalg.norm(x - pr - pn) <= 1e-10 * nx
            ok &= np.linalg.norm(op.apply(pn)) <= 1e-8 * nx
        x, y = rng.standard_normal((2, op.n))
        sym_gap = abs(op.project_null(x) @ y - x @ op.project_null(y))
        ok &= sym_gap <= 1e-10 * np.linalg.norm(x) * np.linalg.norm(y)
    elapsed = time.perf_counter() - t0
    report(1, "projector/decomposition suite", ok and elapsed < 10.0,
           f"4 kinds at n<=3072, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 02 - iterative eigensolver matches the dense oracle
# ---------------------------------------------------------------------------

def test_criterion_02_eigensolver_oracle():
    t0 = time.perf_counter()
    cases = [
        ng.BlockAverageSR(1, 16, 16, 4),   # SR f=4 at 16x16
        ng.HadamardCS(1, 16, 16, 64),      # m/n = 0.25 at n = 256
    ]
    ok = True
    detail = []
    for op in cases:
        lap = ng.build_laplacian("Grid4NN", 16, 16)
        dense = ng.eig_dense_null(op, lap)
        lan = ng.eig_smallest_null(op, lap, 32, tol=1e-10)
        dmu = np.abs(lan.eigenvalues - dense.eigenvalues[:32]).max()
        angle = scipy.linalg.subspace_angles(lan.vectors.T, dense.vectors[:32].T).max()
        ok &= dmu <= 1e-8 and angle <= 1e-6
        detail.append(f"{op.kind}: |dmu|={dmu:.1e}, angle={angle:.1e}")
    elapsed = time.perf_counter() - t0
    report(2, "eigensolver oracle equivalence", ok and elapsed < 60.0,
           "; ".join(detail) + f", {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 03 - coverage dominance, linearity, and sampled consistency
# ---------------------------------------------------------------------------

def _analysis_operators():
    return [
        (ng.BlockAverageSR(1, 8, 8, 2), 8, 8),
        (ng.HadamardCS(1, 16, 16, 64), 16, 16),
        (ng.BayerMosaic(3, 8, 8), 8, 8),
        (ng.GaussianBlur(1, 16, 16), 16, 16),
    ]


def test_criterion_03_coverage():
    t0 = time.perf_counter()
    ok = True
    for op, h, w in _analysis_operators():
        for topo in ("Grid4NN", "Grid8NN", "SymNormalized"):
            lap = ng.channel_lift(ng.build_laplacian(topo, h, w), op.channels)
            basis = ng.null_mode_basis(op, lap)
            curve = coverage_closed_form(GmrfPrior(lap), basis)
            ps = np.arange(1, basis.null_dim + 1)
            ok &= np.all(curve.values >= ps / basis.null_dim - 1e-10)
        ident = ng.channel_lift(ng.build_laplacian("Identity", h, w), op.channels)
        ibasis = ng.null_mode_basis(op, ident)
        icurve = coverage_closed_form(GmrfPrior(ident), ibasis)
        ps = np.arange(1, ibasis.null_dim + 1)
        ok &= np.abs(icurve.values - ps / ibasis.null_dim).max() <= 1e-10
    # sampled consistency on the 8x8 downsampling problem (mild-coupling prior)
    op = ng.BlockAverageSR(1, 8, 8, 2)
    gaps = []
    for topo in ("Grid8NN", "Identity"):
        lap = ng.build_laplacian(topo, 8, 8)
        basis = ng.null_mode_basis(op, lap)
        prior = GmrfPrior(lap)
        closed = coverage_closed_form(prior, basis)
        emp = coverage_empirical(basis, op, sample_gmrf(prior, 5000, 3))
        gaps.append(np.abs(emp.values - closed.values).max())
        ok &= gaps[-1] <= 0.02
    elapsed = time.perf_counter() - t0
    report(3, "coverage dominance + sampled consistency", ok and elapsed < 120.0,
           f"max sampled gap {max(gaps):.3f} <= 0.02, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 04 - worst-case bound attained by the witness, never exceeded by samples
# ---------------------------------------------------------------------------

def test_criterion_04_minimax():
    t0 = time.perf_counter()
    op = ng.BlockAverageSR(1, 8, 8, 2)
    lap = ng.build_laplacian("Grid4NN", 8, 8)
    basis = ng.null_mode_basis(op, lap)
    tau, p = 1.0, 5
    mb = minimax_bound(basis, p, tau)
    sp = basis.truncate(p)
    witness_resid = np.linalg.norm(mb.witness - sp.lift(sp.project(mb.witness))) ** 2
    ok = abs(witness_resid - tau / basis.eigenvalues[p]) <= 1e-8

    rng = np.random.default_rng(1)
    mu, q = basis.eigenvalues, basis.null_dim
    worst = 0.0
    for _ in range(1000):
        a = rng.standard_normal(q)
        a *= np.sqrt(tau / float(mu @ a**2)) * rng.uniform() ** (1.0 / q)
        worst = max(worst, float(np.sum(a[p:] ** 2)))
    ok &= worst <= mb.bound + 1e-8

    ident = ng.build_laplacian("Identity", 8, 8)
    ibasis = ng.null_mode_basis(op, ident)
    flat_ok = all(
        abs(minimax_bound(ibasis, pp, tau).bound - tau) <= 1e-10
        for pp in (1, 10, 25, ibasis.null_dim - 1)
    )
    ok &= flat_ok
    elapsed = time.perf_counter() - t0
    report(4, "minimax bound", ok and elapsed < 30.0,
           f"witness exact, 1000 samples <= bound, flat spectrum gives tau, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 05 - per-mode predictability bound
# ---------------------------------------------------------------------------

def test_criterion_05_predictability():
    t0 = time.perf_counter()
    ok = True
    for op, h, w in _analysis_operators():
        for topo in ("Grid4NN", "Grid8NN", "SymNormalized"):
            lap = ng.channel_lift(ng.build_laplacian(topo, h, w), op.channels)
            basis = ng.null_mode_basis(op, lap)
            rep = per_mode_predictability(GmrfPrior(lap), op, basis, 0.05)
            ok &= np.all(rep.rho2 <= rep.bound + 1e-8)
        ident = ng.channel_lift(ng.build_laplacian("Identity", h, w), op.channels)
        ibasis = ng.null_mode_basis(op, ident)
        irep = per_mode_predictability(GmrfPrior(ident), op, ibasis, 0.05)
        ok &= np.abs(irep.rho2).max() <= 1e-10

    # identity operator: trivial null space, empty report
    eye_op = ng.ExplicitDense(np.eye(64), 1, 8, 8)
    lap = ng.build_laplacian("Grid4NN", 8, 8)
    ebasis = ng.null_mode_basis(eye_op, lap)
    erep = per_mode_predictability(GmrfPrior(lap), eye_op, ebasis, 0.0)
    ok &= eye_op.null_dim == 0 and erep.k == 0
    # noiseless full-row-rank case achieves the bound with equality
    op = ng.BlockAverageSR(1, 8, 8, 2)
    lap = ng.build_laplacian("Grid4NN", 8, 8)
    basis = ng.null_mode_basis(op, lap)
    rep0 = per_mode_predictability(GmrfPrior(lap), op, basis, 0.0)
    eq_gap = np.abs(rep0.rho2 - rep0.bound).max()
    ok &= eq_gap <= 1e-8
    elapsed = time.perf_counter() - t0
    report(5, "predictability bound", ok and elapsed < 60.0,
           f"equality gap {eq_gap:.1e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 06 - convergence analysis: contraction at alpha*, conditioning improvement
# ---------------------------------------------------------------------------

def test_criterion_06_convergence():
    t0 = time.perf_counter()
    op = ng.BlockAverageSR(1, 16, 16, 4)
    lap = ng.build_laplacian("Grid4NN", 16, 16)
    ss = spectral_step_size(op, lap, gamma_g=0.1)
    rng = np.random.default_rng(5)
    ok = ss.lam_min > 0
    rates = []
    for trial in range(3):
        y = op.apply(rng.standard_normal(op.n))
        x_star = quadratic_fixed_point(op, y, laplacian=lap, gamma_g=0.1)
        cfg = SolverConfig(step_alpha=ss.alpha_star, gamma_g=0.1, iterations=25)
        trace = run_pnp_pgd(op, y, cfg, laplacian=lap, x_true=x_star)
        _, rate = contraction_rate(trace.err_norm)
        rates.append(rate)
        ok &= rate <= ss.rho_star + 1e-6
    # conditioning: gamma_g = 0 leaves the quadratic singular; kappa at 0.1 is
    # strictly below the vanishing-weight (positive-spectrum) condition number
    ss0 = spectral_step_size(op, gamma_g=0.0)
    ss_eps = spectral_step_size(op, lap, gamma_g=1e-3)
    ok &= ss0.singular and np.isinf(ss0.kappa)
    ok &= ss.kappa < ss_eps.kappa
    elapsed = time.perf_counter() - t0
    report(6, "fixed-point convergence", ok and elapsed < 60.0,
           f"max rate {max(rates):.4f} <= rho*={ss.rho_star:.4f}, "
           f"kappa {ss.kappa:.1f} < {ss_eps.kappa:.1f}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 07 - automatic mode-count selection on crafted spectra
# ---------------------------------------------------------------------------

def test_criterion_07_select_p():
    t0 = time.perf_counter()
    q = 40
    flat = select_p_from_spectrum(np.ones(q))
    onehot = select_p_from_spectrum(np.r_[1.0, np.zeros(q - 1)])
    cum = np.array([0.5, 0.94, 0.96] + [0.96 + 1e-4 * i for i in range(1, q - 2)])
    plateau = select_p_from_spectrum(np.diff(cum, prepend=0.0))
    ok = flat == q and onehot == 1 and plateau == 3
    elapsed = time.perf_counter() - t0
    report(7, "mode-count selection", ok and elapsed < 1.0,
           f"flat->{flat}, one-hot->{onehot}, plateau->{plateau}, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# 08 / 09 - reconstruction ordering and inexact-operator robustness
# ---------------------------------------------------------------------------

RECON_SIGMA2 = 0.05
RECON_GAMMA = 0.02
RECON_GAMMA_G = 0.1
RECON_ITERS = 250
RECON_TRIALS = 20


@pytest.fixture(scope="module")
def recon_setup():
    """32x32 SR f=4 problem with graph and flat null bases and predictors."""
    op = ng.BlockAverageSR(1, 32, 32, 4)
    lap4 = ng.build_laplacian("Grid4NN", 32, 32)
    lapI = ng.build_laplacian("Identity", 32, 32)
    # Prior scaled so samples centered at 0.5 use most of [0, 1].
    ref = GmrfPrior(lap4, 1.0, 0.01)
    scale = 0.15 / np.sqrt(np.diag(ref.covariance_dense()).max())
    prior4 = GmrfPrior(lap4, 1.0 / scale**2, 0.01 / scale**2)
    priorI = GmrfPrior(lapI, 1.0 / scale**2, 0.01 / scale**2)
    basis4 = ng.null_mode_basis(op, lap4)
    basisI = ng.null_mode_basis(op, lapI)
    p4 = select_p(coverage_closed_form(prior4, basis4))
    pI = select_p(coverage_closed_form(priorI, basisI))  # flat spectrum -> q
    s4 = basis4.truncate(p4)
    sI = basisI.truncate(pI)
    wien4 = wiener_predictor(prior4, op, s4, RECON_SIGMA2)
    wienI = wiener_predictor(priorI, op, sI, RECON_SIGMA2)
    alpha = auto_step(op, lap4, RECON_GAMMA_G)  # shared, stiffest arm
    truths = sample_gmrf(prior4, RECON_TRIALS, 1234) + 0.5
    y_mean = op.apply(np.full(op.n, 0.5))
    return {
        "op": op, "lap4": lap4, "lapI": lapI, "s4": s4, "sI": sI,
        "wien4": wien4, "wienI": wienI, "alpha": alpha, "truths": truths,
        "y_mean": y_mean, "p4": p4, "pI": pI,
    }


def _denoiser():
    return WaveletSoftDenoiser("db4", 2, 0.1)


def _run_arm(env, y, truth, gamma, gamma_g, which):
    cfg = SolverConfig(step_alpha=env["alpha"], gamma=gamma, gamma_g=gamma_g,
                       iterations=RECON_ITERS, denoiser=_denoiser(), init_pinv=True)
    if which == "baseline":
        return run_pnp_pgd(env["op"], y, cfg, x_true=truth)
    basis = env["s4"] if which == "grid4" else env["sI"]
    lap = env["lap4"] if which == "grid4" else env["lapI"]
    wien = env["wien4"] if which == "grid4" else env["wienI"]
    # predictor built for the centered prior; measurements carry the 0.5 mean
    coeff_hat = wien.predict(y - env["y_mean"])
    return run_pnp_pgd(env["op"], y, cfg, basis=basis, laplacian=lap,
                        x_true=truth, coeff_hat=coeff_hat)


def _stabilization_iters(curve, margin=0.1):
    bad = np.nonzero(np.abs(curve - curve[-1]) > margin)[0]
    return int(bad[-1] + 1) if bad.size else 0


def test_criterion_08_reconstruction_ordering(recon_setup):
    t0 = time.perf_counter()
    env = recon_setup
    finals = {"baseline": [], "identity": [], "grid4": []}
    stab = {"on": [], "off": []}
    for t in range(RECON_TRIALS):
        truth = env["truths"][t]
        y = ng.measure(env["op"], truth, RECON_SIGMA2, seed=100 + t).data
        tr_b = _run_arm(env, y, truth, 0.0, 0.0, "baseline")
        tr_i = _run_arm(env, y, truth, RECON_GAMMA, RECON_GAMMA_G, "identity")
        tr_4 = _run_arm(env, y, truth, RECON_GAMMA, RECON_GAMMA_G, "grid4")
        tr_4off = _run_arm(env, y, truth, RECON_GAMMA, 0.0, "grid4")
        finals["baseline"].append(tr_b.psnr[-1])
        finals["identity"].append(tr_i.psnr[-1])
        finals["grid4"].append(tr_4.psnr[-1])
        stab["on"].append(_stabilization_iters(tr_4.psnr))
        stab["off"].append(_stabilization_iters(tr_4off.psnr))
    mean = {k: float(np.mean(v)) for k, v in finals.items()}
    gap = mean["grid4"] - mean["baseline"]
    ordering = mean["grid4"] >= mean["identity"] >= mean["baseline"]
    faster = int(np.sum(np.array(stab["on"]) < np.array(stab["off"])))
    speed_ok = np.mean(stab["on"]) < np.mean(stab["off"]) and faster >= 15
    elapsed = time.perf_counter() - t0
    report(
        8, "reconstruction ordering",
        ordering and gap >= 0.5 and speed_ok and elapsed < 600.0,
        f"PSNR grid4 {mean['grid4']:.2f} >= identity {mean['identity']:.2f} >= "
        f"baseline {mean['baseline']:.2f}, gap {gap:.2f} dB >= 0.5; "
        f"graph weight stabilizes in {np.mean(stab['on']):.0f} vs "
        f"{np.mean(stab['off']):.0f} iterations ({faster}/{RECON_TRIALS} trials faster), "
        f"{elapsed:.0f}s",
    )


def test_criterion_09_inexact_operator(recon_setup):
    t0 = time.perf_counter()
    env = recon_setup
    gaps = []
    for t in range(RECON_TRIALS):
        truth = env["truths"][t]
        op_true = perturb_operator(env["op"], 0.005, seed=9000 + t)
        y = ng.measure(op_true, truth, RECON_SIGMA2, seed=100 + t).data
        tr_4 = _run_arm(env, y, truth, RECON_GAMMA, RECON_GAMMA_G, "grid4")
        tr_b = _run_arm(env, y, truth, 0.0, 0.0, "baseline")
        gaps.append(tr_4.psnr[-1] - tr_b.psnr[-1])
    gaps = np.array(gaps)
    ok = bool(np.all(gaps > 0.0))
    elapsed = time.perf_counter() - t0
    report(9, "inexact forward operator", ok and elapsed < 600.0,
           f"gap positive on {int((gaps > 0).sum())}/{RECON_TRIALS} paired trials, "
           f"mean {gaps.mean():.2f} dB, {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 10 - determinism of emitted artifacts
# ---------------------------------------------------------------------------

DETERMINISM_CFG = """
[experiment]
kind = {kind}
seed = 21
out = {out}
trials = 2

[operator]
kind = BlockAverageSR
height = 8
width = 8
factor = 2

[graph]
topologies = Identity,Grid4NN

[solver]
iterations = 10
denoiser = WaveletSoft
wavelet = db4
levels = 2
threshold = 0.05
gamma = 0.02
gamma_g = 0.1
predictor = ridge

[corpus]
train_count = 6
"""


def test_criterion_10_determinism(tmp_path):
    t0 = time.perf_counter()
    ok = True
    for kind in ("Spectrum", "Coverage", "Predictability", "SelectP",
                 "MinimaxBound", "Reconstruct", "ConvergenceAblation",
                 "PerturbedOperator"):
        outs = []
        for rep_dir in ("a", "b"):
            out = tmp_path / kind / rep_dir
            cfg = parse_config_text(DETERMINISM_CFG.format(kind=kind, out=out))
            run_experiment(cfg)
            outs.append(out)
        for path in sorted(outs[0].glob("*.csv")) + sorted(outs[0].glob("*.svg")):
            twin = outs[1] / path.name
            ok &= twin.is_file() and path.read_bytes() == twin.read_bytes()
    elapsed = time.perf_counter() - t0
    report(10, "determinism", ok and elapsed < 120.0,
           f"byte-identical CSV/SVG artifacts across reruns, {elapsed:.0f}s")
