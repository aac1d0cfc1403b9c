"""Mean-square optimal filtering of generalized stochastic processes.

The package is organised in layers: discrete grids (:mod:`.grid`), spectral
measures and the frequency-domain filter (:mod:`.spectral`), covariance
operators and sampling (:mod:`.gsp`), Weyl calculus (:mod:`.weyl`), Gabor
frames (:mod:`.gabor`), the Gabor symbol matrix (:mod:`.gabor_matrix`) and the
operator-equation solvers (:mod:`.solvers`).  ``BACKEND`` names the kernel
implementation picked at import time (``"cython"`` or ``"python"``).
"""
from ._backend import BACKEND
from .gabor import (GaborCoefficients, GaborSystem, analyze, default_system, dual_window,
                    frame_bounds, frame_operator, gabor_mod_norm, symplectic_shift, synthesize)
from .gabor_matrix import (MatrixM, build_M, calM, decay_fit, m_matvec, symplectic_stft,
                           verify_composition)
from .grid import Grid, GridFunction, fourier, inverse_fourier
from .gsp import (CovarianceOperator, NotPSDError, derivative_noise_cov, sample, white_noise_cov,
                  wss_cov)
from .solvers import (FilterSolution, lmmse_oracle, mse, residual_orthogonality, solve_commuting,
                      solve_douglas, solve_general, solve_wss)
from .spectral import (SpectralMeasure, WienerFilter, atom, band, lebesgue, power_law, rn_filter,
                       wss_mse)
from .weyl import WeylSymbol, cross_wigner, mod_norm, symbol_from_operator, weyl_quantize

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Grid", "GridFunction", "fourier", "inverse_fourier",
    "SpectralMeasure", "WienerFilter", "atom", "band", "lebesgue", "power_law", "rn_filter", "wss_mse",
    "CovarianceOperator", "NotPSDError", "derivative_noise_cov", "sample", "white_noise_cov", "wss_cov",
    "WeylSymbol", "cross_wigner", "mod_norm", "symbol_from_operator", "weyl_quantize",
    "GaborCoefficients", "GaborSystem", "analyze", "default_system", "dual_window", "frame_bounds",
    "frame_operator", "gabor_mod_norm", "symplectic_shift", "synthesize",
    "MatrixM", "build_M", "calM", "decay_fit", "m_matvec", "symplectic_stft", "verify_composition",
    "FilterSolution", "lmmse_oracle", "mse", "residual_orthogonality", "solve_commuting",
    "solve_douglas", "solve_general", "solve_wss",
]
