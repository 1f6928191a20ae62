"""Graph-smooth null-space representations for linear inverse problems.

The toolkit splits an imaging operator's domain into what the sensor sees and
what it cannot (range/null decomposition), restricts a grid-graph Laplacian to
the invisible part, and uses that operator's smoothest eigenmodes as a
low-dimensional, measurement-predictable basis for the null space.  On top of
the basis sit coverage/predictability analytics under a Gaussian Markov
random field prior, linear coefficient predictors, and a plug-and-play
proximal-gradient solver with a null-only graph regularizer.
"""

from .graphs import GraphLaplacian, build_laplacian, channel_lift, dirichlet_energy, spectral_bound
from .gmrf import (
    CoverageCurve,
    GmrfPrior,
    coverage_closed_form,
    coverage_empirical,
    minimax_bound,
    per_mode_predictability,
    prior_spectrum,
    sample_gmrf,
    select_p,
)
from .operators import (
    BayerMosaic,
    BlockAverageSR,
    ExplicitDense,
    GaussianBlur,
    HadamardCS,
    ImageSignal,
    LinearMap,
    Measurement,
    build_operator,
    measure,
)
from .predictors import CoeffPredictor, r2_score, train_ridge, wiener_predictor
from .solver import (
    IdentityDenoiser,
    RunTrace,
    SolverConfig,
    TvProxDenoiser,
    WaveletSoftDenoiser,
    contraction_rate,
    psnr,
    run_pnp_pgd,
    smooth_gradient,
    smooth_objective,
    spectral_step_size,
)
from .spectral import (
    NullSpectralBasis,
    apply_null_restricted,
    build_s,
    eig_dense_null,
    eig_smallest_null,
    null_mode_basis,
)

__version__ = "0.1.0"
