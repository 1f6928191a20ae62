"""Config-driven experiment runner.

Configs are a line-oriented ``key = value`` format with ``[section]`` headers,
``#`` comments, and fail-closed validation: unknown sections or keys, duplicate
keys, and missing required keys are errors (with line numbers), so a config
file fully determines an experiment.  A seed is mandatory; identical config
and seed produce byte-identical CSV/SVG artifacts.

Null-mode bases are cached on disk keyed by (operator hash, topology, n, k),
since the eigendecomposition is the one expensive offline step and is reused
across experiments.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import gmrf as gmrf_mod
from . import graphs, operators, output, predictors, solver, spectral


class ConfigError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


EXPERIMENT_KINDS = (
    "Spectrum",
    "Coverage",
    "Predictability",
    "SelectP",
    "MinimaxBound",
    "Reconstruct",
    "ConvergenceAblation",
    "PerturbedOperator",
)


# ---------------------------------------------------------------------------
# Config format
# ---------------------------------------------------------------------------

def _conv_int(s):
    return int(s)


def _conv_float(s):
    return float(s)


def _conv_bool(s):
    low = s.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"expected boolean, got {s!r}")


def _conv_str(s):
    return s


def _conv_str_list(s):
    return tuple(part.strip() for part in s.split(",") if part.strip())


def _conv_float_list(s):
    return tuple(float(part) for part in s.split(",") if part.strip())


def _conv_int_or_auto(s):
    return "auto" if s.lower() == "auto" else int(s)


def _conv_float_or_auto(s):
    return "auto" if s.lower() == "auto" else float(s)


def _conv_phase(s):
    parts = [int(p) for p in s.split(",")]
    if len(parts) != 2:
        raise ValueError("phase must be 'row,col'")
    return tuple(parts)


# (converter, default); default None with required=True means the key must appear.
SCHEMA = {
    "experiment": {
        "kind": (_conv_str, None),
        "seed": (_conv_int, None),
        "trials": (_conv_int, 20),
        "out": (_conv_str, None),
        "cache": (_conv_str, None),
    },
    "operator": {
        "kind": (_conv_str, "BlockAverageSR"),
        "channels": (_conv_int, 1),
        "height": (_conv_int, 8),
        "width": (_conv_int, 8),
        "factor": (_conv_int, 2),
        "rows": (_conv_int_or_auto, "auto"),  # auto = 10% of n for HadamardCS
        "phase": (_conv_phase, (0, 0)),
        "sigma_k": (_conv_float, 1.0),
        "tau_svd": (_conv_float, 1e-3),
        "matrix": (_conv_str, ""),
    },
    "graph": {
        "topologies": (_conv_str_list, ("Identity", "Grid4NN", "Grid8NN")),
    },
    "prior": {
        "alpha": (_conv_float, 1.0),
        "epsilon": (_conv_float, 0.01),
    },
    "noise": {
        "sigma2": (_conv_float, 0.05),
    },
    "modes": {
        "k": (_conv_int_or_auto, "auto"),
        "p": (_conv_int_or_auto, "auto"),
        "tol": (_conv_float, 1e-10),
        "method": (_conv_str, "auto"),
        "kappa": (_conv_float, 0.95),
        "delta": (_conv_float, 1e-3),
        "plateau": (_conv_int, 10),
        "empirical_samples": (_conv_int, 0),
    },
    "minimax": {
        "tau": (_conv_float, 1.0),
        "samples": (_conv_int, 1000),
    },
    "corpus": {
        "generator": (_conv_str, "GmrfSample"),
        "train_count": (_conv_int, 100),
    },
    "solver": {
        "alpha": (_conv_float_or_auto, "auto"),
        "gamma": (_conv_float, 0.0),
        "gamma_g": (_conv_float, 0.0),
        "gamma_g_values": (_conv_float_list, (0.0, 0.1)),
        "lambda": (_conv_float, 0.0),
        "iterations": (_conv_int, 100),
        "denoiser": (_conv_str, "Identity"),
        "wavelet": (_conv_str, "haar"),
        "levels": (_conv_int, 2),
        "threshold": (_conv_float, 0.0),
        "tv_weight": (_conv_float, 0.05),
        "tv_iters": (_conv_int, 50),
        "delta": (_conv_float, 0.0),
        "init_pinv": (_conv_bool, False),
        "predictor": (_conv_str, "ridge"),
        "ridge_beta": (_conv_float_or_auto, "auto"),
    },
    "perturb": {
        "xi_sigma": (_conv_float, 0.005),
    },
}


@dataclass
class ExperimentConfig:
    values: dict           # section -> key -> typed value (defaults filled in)
    source_text: str = ""

    def __getitem__(self, section):
        return self.values[section]

    @property
    def kind(self):
        return self.values["experiment"]["kind"]

    @property
    def seed(self):
        return self.values["experiment"]["seed"]

    def config_hash(self) -> str:
        canon = json.dumps(
            {s: {k: repr(v) for k, v in kv.items()} for s, kv in self.values.items()},
            sort_keys=True,
        )
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def parse_config_text(text, path="<config>") -> ExperimentConfig:
    values = {s: dict() for s in SCHEMA}
    seen = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{path}:{lineno}: malformed section header {raw.strip()!r}")
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"{path}:{lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if section is None:
            raise ConfigError(f"{path}:{lineno}: key outside any [section]")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in SCHEMA[section]:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r} in [{section}]")
        if (section, key) in seen:
            raise ConfigError(
                f"{path}:{lineno}: duplicate key {key!r} in [{section}] "
                f"(first set on line {seen[(section, key)]})"
            )
        seen[(section, key)] = lineno
        conv = SCHEMA[section][key][0]
        try:
            values[section][key] = conv(val)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    for sec, keys in SCHEMA.items():
        for key, (_, default) in keys.items():
            values[sec].setdefault(key, default)
    if values["experiment"]["seed"] is None:
        raise ConfigError(f"{path}: seed required (set 'seed = <int>' in [experiment])")
    kind = values["experiment"]["kind"]
    if kind is not None and kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"{path}: unknown experiment kind {kind!r}")
    return ExperimentConfig(values, text)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(p.read_text(encoding="utf-8"), str(path))


# ---------------------------------------------------------------------------
# Building blocks from a config
# ---------------------------------------------------------------------------

def operator_from_config(cfg: ExperimentConfig) -> operators.LinearMap:
    sec = cfg["operator"]
    kind = sec["kind"]
    c, h, w = sec["channels"], sec["height"], sec["width"]
    try:
        if kind == "HadamardCS":
            rows = sec["rows"]
            if rows == "auto":
                rows = max(1, (c * h * w) // 10)
            return operators.HadamardCS(c, h, w, rows)
        if kind == "BlockAverageSR":
            return operators.BlockAverageSR(c, h, w, sec["factor"])
        if kind == "BayerMosaic":
            return operators.BayerMosaic(c, h, w, sec["phase"])
        if kind == "GaussianBlur":
            return operators.GaussianBlur(c, h, w, sec["sigma_k"], sec["tau_svd"])
        if kind == "ExplicitDense":
            if not sec["matrix"]:
                raise ConfigError("ExplicitDense requires 'matrix = <csv path>'")
            return operators.load_dense_csv(sec["matrix"], c, h, w)
    except operators.OperatorError as exc:
        raise ConfigError(f"operator construction failed: {exc}") from exc
    raise ConfigError(f"unknown operator kind {kind!r}")


def laplacians_from_config(cfg: ExperimentConfig):
    sec = cfg["operator"]
    out = []
    for topo in cfg["graph"]["topologies"]:
        try:
            lap = graphs.build_laplacian(topo, sec["height"], sec["width"])
        except graphs.GraphError as exc:
            raise ConfigError(str(exc)) from exc
        out.append(graphs.channel_lift(lap, sec["channels"]))
    return out


def prior_from_config(cfg: ExperimentConfig, lap) -> gmrf_mod.GmrfPrior:
    return gmrf_mod.GmrfPrior(lap, cfg["prior"]["alpha"], cfg["prior"]["epsilon"])


def solver_config_from(cfg: ExperimentConfig, gamma=None, gamma_g=None,
                       alpha=None) -> solver.SolverConfig:
    sec = cfg["solver"]
    den = solver.make_denoiser(
        sec["denoiser"],
        filt=sec["wavelet"],
        levels=sec["levels"],
        threshold=sec["threshold"],
        weight=sec["tv_weight"],
        inner_iters=sec["tv_iters"],
    )
    return solver.SolverConfig(
        step_alpha=sec["alpha"] if alpha is None else alpha,
        gamma=sec["gamma"] if gamma is None else gamma,
        gamma_g=sec["gamma_g"] if gamma_g is None else gamma_g,
        lam=sec["lambda"],
        iterations=sec["iterations"],
        denoiser=den,
        delta=sec["delta"],
        init_pinv=sec["init_pinv"],
    )


# ---------------------------------------------------------------------------
# Synthetic corpora and operator perturbation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticCorpus:
    images: tuple
    generator: str
    seed: int


def generate_corpus(kind, shape3, count, seed, prior=None) -> SyntheticCorpus:
    """Seeded synthetic images in [0, 1] standing in for a dataset.

    GmrfSample draws from the prior (default Grid4NN GMRF on the grid) and
    rescales each image affinely to [0, 1].  PiecewiseSmooth overlays 2-5
    constant rectangles on a gentle linear gradient and clips.
    """
    c, h, w = shape3
    count = int(count)
    images = []
    if kind == "GmrfSample":
        if count > 0:
            if prior is None:
                lap = graphs.channel_lift(graphs.build_laplacian("Grid4NN", h, w), c)
                prior = gmrf_mod.GmrfPrior(lap)
            raw = gmrf_mod.sample_gmrf(prior, count, seed)
            for row in raw:
                lo, hi = row.min(), row.max()
                if hi - lo < 1e-12:
                    row = np.full_like(row, 0.5)
                else:
                    row = (row - lo) / (hi - lo)
                images.append(operators.ImageSignal(row, c, h, w))
    elif kind == "PiecewiseSmooth":
        rng = np.random.default_rng(seed)
        yy, xx = np.meshgrid(np.arange(h) / max(h - 1, 1),
                             np.arange(w) / max(w - 1, 1), indexing="ij")
        for _ in range(count):
            base = (
                rng.uniform(0.2, 0.8)
                + rng.uniform(-0.4, 0.4) * xx
                + rng.uniform(-0.4, 0.4) * yy
            )
            img = np.repeat(base[None], c, axis=0)
            for _ in range(rng.integers(2, 6)):
                y0, y1 = np.sort(rng.integers(0, h, size=2))
                x0, x1 = np.sort(rng.integers(0, w, size=2))
                val = rng.uniform(0.0, 1.0, size=c)
                img[:, y0 : y1 + 1, x0 : x1 + 1] = val[:, None, None]
            images.append(operators.ImageSignal.from_chw(np.clip(img, 0.0, 1.0)))
    else:
        raise ConfigError(f"unknown corpus generator {kind!r}")
    return SyntheticCorpus(tuple(images), kind, seed)


def perturb_operator(op, xi_sigma, seed):
    """H + H_xi with i.i.d. Gaussian entries of std xi_sigma (dense kinds only)."""
    if xi_sigma < 0:
        raise ValueError("xi_sigma must be nonnegative")
    if xi_sigma == 0:
        return op
    rng = np.random.default_rng(seed)
    noisy = op.dense() + rng.normal(0.0, xi_sigma, size=(op.m, op.n))
    return operators.ExplicitDense(noisy, op.channels, op.height, op.width)


# ---------------------------------------------------------------------------
# Basis cache
# ---------------------------------------------------------------------------

def cached_basis(cache_dir, op, lap, k, tol=1e-10, method="auto"):
    """Load or compute the k smoothest null modes; returns (basis, cache_key)."""
    key = f"{op.operator_hash()}_{lap.topology}_{op.n}_{k}"
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"basis_{key}.csv"
    if path.is_file():
        return spectral.load_basis(path), key
    basis = spectral.null_mode_basis(op, lap, k, tol=tol, method=method)
    spectral.save_basis(basis, path)
    return basis, key


# ---------------------------------------------------------------------------
# Experiment kinds
# ---------------------------------------------------------------------------

def _outdir(cfg):
    out = cfg["experiment"]["out"]
    if not out:
        raise ConfigError("output directory required (config 'out' or --out)")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cache_dir(cfg, outdir):
    return Path(cfg["experiment"]["cache"] or (outdir / "basis_cache"))


def _full_bases(cfg, op, outdir):
    if op.null_dim == 0:
        raise ConfigError(
            "operator has a trivial null space; nothing to analyze "
            "(for blur, lower tau_svd or widen sigma_k)"
        )
    laps = laplacians_from_config(cfg)
    cache = _cache_dir(cfg, outdir)
    bases, keys = {}, []
    for lap in laps:
        basis, key = cached_basis(
            cache, op, lap, op.null_dim, tol=cfg["modes"]["tol"],
            method=cfg["modes"]["method"],
        )
        bases[lap.topology] = (lap, basis)
        keys.append(key)
    return bases, keys


def run_spectrum(cfg, outdir):
    op = operator_from_config(cfg)
    bases, keys = _full_bases(cfg, op, outdir)
    files, series = [], []
    for topo, (_, basis) in bases.items():
        mu = basis.eigenvalues
        top = mu.max() if mu.size and mu.max() > 0 else 1.0
        rows = [(i + 1, mu[i], mu[i] / top) for i in range(mu.size)]
        path = outdir / f"spectrum_{topo}.csv"
        output.emit_csv(rows, path, header=("index", "mu", "mu_normalized"))
        files.append(path)
        series.append((topo, np.arange(1, mu.size + 1), mu / top))
    svg = outdir / "spectrum.svg"
    # Normalization by the largest eigenvalue; the reference index convention
    # is ambiguous, so the label says exactly what is plotted.
    output.emit_svg(series, svg, title="Null-restricted spectrum",
                    xlabel="mode index", ylabel="mu / mu_max")
    files.append(svg)
    return files, keys


def run_coverage(cfg, outdir):
    op = operator_from_config(cfg)
    bases, keys = _full_bases(cfg, op, outdir)
    files, series = [], []
    n_emp = cfg["modes"]["empirical_samples"]
    for topo, (lap, basis) in bases.items():
        prior = prior_from_config(cfg, lap)
        curve = gmrf_mod.coverage_closed_form(prior, basis)
        path = outdir / f"coverage_{topo}.csv"
        output.emit_csv(
            [(p + 1, curve.values[p]) for p in range(curve.q)], path, header=("p", "C")
        )
        files.append(path)
        series.append((topo, np.arange(1, curve.q + 1), curve.values))
        if n_emp > 0:
            samples = gmrf_mod.sample_gmrf(prior, n_emp, cfg.seed)
            emp = gmrf_mod.coverage_empirical(basis, op, samples)
            epath = outdir / f"coverage_empirical_{topo}.csv"
            output.emit_csv(
                [(p + 1, emp.values[p]) for p in range(emp.q)], epath, header=("p", "C")
            )
            files.append(epath)
    svg = outdir / "coverage.svg"
    output.emit_svg(series, svg, title="Null-space coverage", xlabel="p", ylabel="C(p)")
    files.append(svg)
    return files, keys


def run_predictability(cfg, outdir):
    op = operator_from_config(cfg)
    bases, keys = _full_bases(cfg, op, outdir)
    sigma2 = cfg["noise"]["sigma2"]
    files, series = [], []
    for topo, (lap, basis) in bases.items():
        prior = prior_from_config(cfg, lap)
        report = gmrf_mod.per_mode_predictability(prior, op, basis, sigma2)
        rows = [
            (j + 1, report.mu[j], report.rho2[j], report.bound[j], report.c[j])
            for j in range(report.k)
        ]
        path = outdir / f"predictability_{topo}.csv"
        output.emit_csv(rows, path, header=("mode_index", "mu", "rho2", "bound", "c"))
        files.append(path)
        series.append((topo, np.arange(1, report.k + 1), report.rho2))
    svg = outdir / "predictability.svg"
    output.emit_svg(series, svg, title="Per-mode predictability",
                    xlabel="null mode index", ylabel="rho^2")
    files.append(svg)
    return files, keys


def run_select_p(cfg, outdir):
    op = operator_from_config(cfg)
    bases, keys = _full_bases(cfg, op, outdir)
    modes = cfg["modes"]
    rows, files = [], []
    for topo, (lap, basis) in bases.items():
        prior = prior_from_config(cfg, lap)
        curve = gmrf_mod.coverage_closed_form(prior, basis)
        p_star = gmrf_mod.select_p(curve, modes["kappa"], modes["delta"], modes["plateau"])
        rows.append((topo, p_star, curve.values[p_star - 1]))
        path = outdir / f"coverage_{topo}.csv"
        output.emit_csv(
            [(p + 1, curve.values[p]) for p in range(curve.q)], path, header=("p", "C")
        )
        files.append(path)
    path = outdir / "select_p.csv"
    output.emit_csv(rows, path, header=("topology", "p_star", "coverage_at_p"))
    files.append(path)
    return files, keys


def run_minimax(cfg, outdir):
    op = operator_from_config(cfg)
    bases, keys = _full_bases(cfg, op, outdir)
    tau = cfg["minimax"]["tau"]
    n_samples = cfg["minimax"]["samples"]
    p_cfg = cfg["modes"]["p"]
    rng = np.random.default_rng(cfg.seed)
    rows, files = [], []
    for topo, (_, basis) in bases.items():
        q = basis.null_dim
        p = max(1, round(0.1 * op.n)) if p_cfg == "auto" else int(p_cfg)
        p = min(p, q - 1)
        bd = gmrf_mod.minimax_bound(basis, p, tau)
        witness_res = float(
            np.linalg.norm(bd.witness - basis.truncate(p).lift(basis.truncate(p).project(bd.witness))) ** 2
        )
        max_res = 0.0
        mu = basis.eigenvalues
        for _ in range(n_samples):
            a = rng.standard_normal(q)
            energy = float(mu @ a**2)
            if energy > 0:
                a *= np.sqrt(tau / energy) * rng.uniform() ** (1.0 / q)
            resid = float(np.sum(a[p:] ** 2))
            max_res = max(max_res, resid)
        rows.append((topo, p, tau, bd.bound, witness_res, max_res))
    path = outdir / "minimax.csv"
    output.emit_csv(
        rows, path,
        header=("topology", "p", "tau", "bound", "witness_residual", "max_sampled_residual"),
    )
    files.append(path)
    return files, keys


def _reconstruction_pieces(cfg, op, outdir, topology=None):
    """Shared setup: Laplacian, full basis, selected p, predictor factory."""
    modes = cfg["modes"]
    sec_op = cfg["operator"]
    topo = topology or cfg["graph"]["topologies"][0]
    if op.null_dim == 0:
        raise ConfigError(
            "operator has a trivial null space; nothing to regularize "
            "(for blur, lower tau_svd or widen sigma_k)"
        )
    lap = graphs.channel_lift(
        graphs.build_laplacian(topo, sec_op["height"], sec_op["width"]),
        sec_op["channels"],
    )
    # The plateau rule needs the full spectrum; with an explicit p a partial
    # basis (config key k) is enough.
    if modes["p"] == "auto" or modes["k"] == "auto":
        k = op.null_dim
    else:
        k = min(max(int(modes["k"]), int(modes["p"])), op.null_dim)
    basis, key = cached_basis(
        _cache_dir(cfg, outdir), op, lap, k,
        tol=modes["tol"], method=modes["method"],
    )
    prior = prior_from_config(cfg, lap)
    if modes["p"] == "auto":
        curve = gmrf_mod.coverage_closed_form(prior, basis)
        p = gmrf_mod.select_p(curve, modes["kappa"], modes["delta"], modes["plateau"])
    else:
        p = min(int(modes["p"]), basis.k)
    s_basis = basis.truncate(p)
    return lap, prior, basis, s_basis, key


def _make_predictor(cfg, op, s_basis, prior, seed):
    which = cfg["solver"]["predictor"].lower()
    sigma2 = cfg["noise"]["sigma2"]
    if which == "zero":
        return predictors.zero_predictor(s_basis.k, op.m)
    if which == "wiener":
        return predictors.wiener_predictor(prior, op, s_basis, sigma2)
    if which == "ridge":
        train = generate_corpus(
            cfg["corpus"]["generator"], op.image_shape,
            cfg["corpus"]["train_count"], seed,
        )
        pairs = predictors.make_pairs(op, s_basis, train.images, sigma2, seed + 1)
        beta = cfg["solver"]["ridge_beta"]
        return predictors.train_ridge(pairs, None if beta == "auto" else beta)
    raise ConfigError(f"unknown predictor {which!r}")


def run_reconstruct(cfg, outdir):
    op = operator_from_config(cfg)
    lap, prior, _, s_basis, key = _reconstruction_pieces(cfg, op, outdir)
    trials = cfg["experiment"]["trials"]
    sigma2 = cfg["noise"]["sigma2"]
    corpus = generate_corpus(cfg["corpus"]["generator"], op.image_shape, trials, cfg.seed)
    predictor = _make_predictor(cfg, op, s_basis, prior, cfg.seed + 7919)
    sol_cfg = solver_config_from(cfg)
    rows, traces, files = [], [], []
    for t, img in enumerate(corpus.images):
        y = operators.measure(op, img.data, sigma2, seed=cfg.seed + 31 * t).data
        trace = solver.run_pnp_pgd(
            op, y, sol_cfg, basis=s_basis, predictor=predictor,
            laplacian=lap, x_true=img,
        )
        rows.append((t, trace.psnr[0], trace.psnr[-1]))
        traces.append(trace.psnr)
        if t == 0:
            tpath = outdir / "trace_trial0.csv"
            output.emit_csv(trace.rows(), tpath,
                            header=("iter", "objective", "psnr", "err_norm"))
            files.append(tpath)
            output.write_image(img, outdir / "truth.pgm" if op.channels == 1 else outdir / "truth.ppm")
            recon = trace.final
            output.write_image(recon, outdir / "recon.pgm" if op.channels == 1 else outdir / "recon.ppm")
            files += [outdir / ("truth.pgm" if op.channels == 1 else "truth.ppm"),
                      outdir / ("recon.pgm" if op.channels == 1 else "recon.ppm")]
    path = outdir / "trials.csv"
    output.emit_csv(rows, path, header=("trial", "psnr_init", "psnr_final"))
    files.append(path)
    mean_curve = np.mean(np.stack(traces), axis=0)
    path = outdir / "trace_mean.csv"
    output.emit_csv(
        [(k, mean_curve[k]) for k in range(mean_curve.size)], path,
        header=("iter", "psnr_mean"),
    )
    files.append(path)
    svg = outdir / "trace.svg"
    output.emit_svg(
        [("mean PSNR", np.arange(mean_curve.size), mean_curve)], svg,
        title="Reconstruction", xlabel="iteration", ylabel="PSNR (dB)",
    )
    files.append(svg)
    return files, [key]


def _iters_to_plateau(curve, margin=0.1):
    """First iteration after which the curve stays within margin of its final value."""
    bad = np.nonzero(np.abs(curve - curve[-1]) > margin)[0]
    return int(bad[-1] + 1) if bad.size else 0


def run_convergence_ablation(cfg, outdir):
    op = operator_from_config(cfg)
    lap, prior, _, s_basis, key = _reconstruction_pieces(cfg, op, outdir)
    trials = cfg["experiment"]["trials"]
    sigma2 = cfg["noise"]["sigma2"]
    arms = cfg["solver"]["gamma_g_values"]
    corpus = generate_corpus(cfg["corpus"]["generator"], op.image_shape, trials, cfg.seed)
    predictor = _make_predictor(cfg, op, s_basis, prior, cfg.seed + 7919)
    # One shared step size (sized for the largest gamma_g) so the comparison
    # isolates the regularizer instead of the step.
    alpha_cfg = cfg["solver"]["alpha"]
    if alpha_cfg == "auto":
        alpha_cfg = solver.auto_step(op, lap, max(arms))
    files, series, summary = [], [], []
    for gg in arms:
        sol_cfg = solver_config_from(cfg, gamma_g=gg, alpha=alpha_cfg)
        curves = []
        for t, img in enumerate(corpus.images):
            y = operators.measure(op, img.data, sigma2, seed=cfg.seed + 31 * t).data
            trace = solver.run_pnp_pgd(
                op, y, sol_cfg, basis=s_basis, predictor=predictor,
                laplacian=lap, x_true=img,
            )
            curves.append(trace.psnr)
        mean_curve = np.mean(np.stack(curves), axis=0)
        tag = output.fmt(gg)
        path = outdir / f"ablation_gamma_g_{tag}.csv"
        output.emit_csv(
            [(k, mean_curve[k]) for k in range(mean_curve.size)], path,
            header=("iter", "psnr_mean"),
        )
        files.append(path)
        series.append((f"gamma_g={tag}", np.arange(mean_curve.size), mean_curve))
        summary.append((gg, mean_curve[-1], _iters_to_plateau(mean_curve)))
    path = outdir / "ablation_summary.csv"
    output.emit_csv(summary, path, header=("gamma_g", "final_psnr", "iters_to_within_0.1dB"))
    files.append(path)
    svg = outdir / "ablation.svg"
    output.emit_svg(series, svg, title="Null-graph regularizer ablation",
                    xlabel="iteration", ylabel="PSNR (dB)")
    files.append(svg)
    return files, [key]


def run_perturbed(cfg, outdir):
    op = operator_from_config(cfg)
    lap, prior, _, s_basis, key = _reconstruction_pieces(cfg, op, outdir)
    trials = cfg["experiment"]["trials"]
    sigma2 = cfg["noise"]["sigma2"]
    xi = cfg["perturb"]["xi_sigma"]
    corpus = generate_corpus(cfg["corpus"]["generator"], op.image_shape, trials, cfg.seed)
    predictor = _make_predictor(cfg, op, s_basis, prior, cfg.seed + 7919)
    reg_cfg = solver_config_from(cfg)
    base_cfg = solver_config_from(cfg, gamma=0.0, gamma_g=0.0)
    rows, files = [], []
    for t, img in enumerate(corpus.images):
        # Measurements come from the perturbed operator; reconstruction still
        # uses the nominal one.
        op_true = perturb_operator(op, xi, seed=cfg.seed + 1001 + t)
        y = operators.measure(op_true, img.data, sigma2, seed=cfg.seed + 31 * t).data
        tr_g = solver.run_pnp_pgd(op, y, reg_cfg, basis=s_basis,
                                   predictor=predictor, laplacian=lap, x_true=img)
        tr_b = solver.run_pnp_pgd(op, y, base_cfg, x_true=img)
        rows.append((t, tr_g.psnr[-1], tr_b.psnr[-1], tr_g.psnr[-1] - tr_b.psnr[-1]))
    path = outdir / "perturbed.csv"
    output.emit_csv(rows, path, header=("trial", "psnr_regularized", "psnr_baseline", "gap"))
    files.append(path)
    gaps = np.array([r[3] for r in rows])
    path = outdir / "perturbed_summary.csv"
    output.emit_csv(
        [(xi, gaps.mean(), gaps.min(), float((gaps > 0).mean()))], path,
        header=("xi_sigma", "mean_gap", "min_gap", "fraction_positive"),
    )
    files.append(path)
    return files, [key]


_RUNNERS = {
    "Spectrum": run_spectrum,
    "Coverage": run_coverage,
    "Predictability": run_predictability,
    "SelectP": run_select_p,
    "MinimaxBound": run_minimax,
    "Reconstruct": run_reconstruct,
    "ConvergenceAblation": run_convergence_ablation,
    "PerturbedOperator": run_perturbed,
}


def run_experiment(cfg: ExperimentConfig):
    """Execute the configured experiment; write artifacts, then the manifest."""
    kind = cfg.kind
    if kind not in _RUNNERS:
        raise ConfigError(f"config does not name a runnable experiment kind (got {kind!r})")
    outdir = _outdir(cfg)
    t0 = time.perf_counter()
    try:
        files, cache_keys = _RUNNERS[kind](cfg, outdir)
    except (spectral.ConvergenceError, solver.SolverError, gmrf_mod.GmrfError,
            np.linalg.LinAlgError) as exc:
        raise NumericalError(f"{kind}: {exc}") from exc
    manifest = {
        "kind": kind,
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "basis_cache_keys": sorted(set(cache_keys)),
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "artifacts": sorted(Path(f).name for f in files),
    }
    with open(outdir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest
