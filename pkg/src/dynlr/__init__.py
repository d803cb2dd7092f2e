"""dynlr: dynamic tomography with joint nonnegative low-rank decomposition.

Reconstructs a space-time image from undersampled projection data while
factorizing it into nonnegative spatial and temporal components, via
monotone multiplicative solvers, plus a separated low-rank baseline and a
full experiment harness.
"""

from ._accel import NUMBA_AVAILABLE, NUMBA_ENABLED
from .errors import ConfigError, NumericalError
from .gradtv import (GradTvConfig, denoise_frame, gradtv_solve,
                     low_rank_prox, pca_decompose, posthoc_nmf, tv_denoise)
from .linalg import (DEFAULT_FLOOR, SvdResult, best_rank_k, project_floor,
                     soft_threshold_singular_values, svd)
from .metrics import QualityReport, evaluate_stack, match_components, psnr, ssim
from .phantoms import (GroundTruth, add_gaussian_noise, dynamic_shepp_logan,
                       simulate_measurements, vessel_phantom)
from .radon import (Geometry, ImageGrid, RadonOperator, SamplingSchedule,
                    TINY_GOLDEN_ANGLE, apply, apply_adjoint,
                    backprojection_init, build_operator, build_operators,
                    default_geometry, golden_angle_schedule)
from .solvers import (JointConfig, JointResult, SolveTrace,
                      apply_feature_order, bc_solve, bc_update_B, bc_update_C,
                      bcx_solve, bcx_update_B, bcx_update_C, bcx_update_X,
                      cost_bc, cost_bcx, init_factors, order_features,
                      sbc_solve, sbc_update_B, sbc_update_C)
from .tv import (NeighborhoodSystem, TvParams, matrices_pz, matrix_p,
                 matrix_z, qubp_lambda, qubp_step, tv_gradient,
                 tv_surrogate_gap, tv_value)

__version__ = "0.1.0"
