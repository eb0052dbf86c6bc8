"""collapsim: spontaneous wave-function collapse dynamics on finite lattices.

Stochastic trajectory integration of diffusive (density-coupled) and
discrete-hit localization models, a Lindblad density-matrix oracle for
cross-validation, deterministic parallel ensembles, and the amplification /
visibility phenomenology layer.
"""

from .collapse_ops import (
    CollapseOperatorSet,
    KernelMatrix,
    WhiteningTransform,
    csl_operators,
    gaussian_kernel,
    grw_hit_weights,
    grw_localization,
    whiten,
)
from .engine import (
    IntegratorConfig,
    NoiseIncrements,
    TrajectoryRecord,
    em_step,
    run_grw_trajectory,
    run_trajectory,
    sample_noise,
)
from .ensembles import (
    EnsembleProblem,
    EnsembleStats,
    born_frequencies,
    fitted_decay_rate,
    oracle_comparison,
    run_ensemble,
)
from .errors import (
    CollapsimError,
    ConfigurationError,
    DegenerateHitError,
    DegenerateInputError,
    EnsembleError,
    FitQualityError,
    InconclusiveCollapseError,
    KernelIntegrityError,
    NumericalOverflowError,
    ResourceLimitError,
    StepSizeError,
    UnsupportedModelError,
)
from .lattice import (
    LatticeGrid,
    Operator,
    StateVector,
    bosonic_basis,
    build_lattice,
    compose_distinguishable,
    kinetic_hamiltonian,
    make_superposition,
    site_number_operators,
)
from .lindblad import (
    DensityMatrix,
    csl_two_point_rate,
    evolve_density,
    lindblad_rhs,
    trace_distance,
)
from .physics import (
    AmplificationInputs,
    CollapseParams,
    amplification_rate,
    energy_gain_slope,
    preset,
    visibility_prediction,
)

__version__ = "0.1.0"
