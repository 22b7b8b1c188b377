"""Compressive high-speed video from a single rolling-shutter camera frame.

A diffuser at the imaging pupil turns the system PSF into a random
speckle pattern that spreads every scene point over all sensor rows; the
rolling shutter then samples each row group at a different instant, so
one captured frame is a compressed encoding of a short video. This
package provides the matrix-free forward model, speckle PSF synthesis
and ingestion, a proximal-gradient sparse decoder, scene generators, and
evaluation metrics.
"""

from .core import (
    AcquisitionParams,
    ConfigurationError,
    DegenerateOperatorError,
    DimensionError,
    DivergenceError,
    GenerationError,
    NoDominantFrequencyError,
    PsfImage,
    RollingSpeckleError,
    SensorFrame,
    ShutterSchedule,
    VideoTensor,
    effective_fps,
    problem_dims,
)
from .forward import (
    ForwardOperator,
    apply_adjoint,
    apply_forward,
    build_dense_operator,
    convolve2d_same,
    vec_to_video,
    video_to_vec,
)
from .metrics import (
    SweepCell,
    dominant_frequency,
    phase_transition_sweep,
    psnr,
    relative_error,
    support_f1,
)
from .psf import (
    CoverageReport,
    PupilSpec,
    check_coverage,
    full_coverage_grid,
    load_psf,
    speckle_grain_fwhm,
    synthesize_speckle_psf,
)
from .scenes import (
    GLYPH_ATLAS,
    GLYPH_ATLAS_VERSION,
    add_gaussian_noise,
    gen_blinking_sources,
    gen_moving_glyphs,
)
from .solver import (
    SolveReport,
    SolverConfig,
    SparsityTransform,
    objective_value,
    power_method_lipschitz,
    prox_l1_nonneg,
    soft_threshold,
    solve,
)

__version__ = "0.1.0"
