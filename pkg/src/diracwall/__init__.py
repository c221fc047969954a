"""Spectral integral-equation solver for 2D Dirac operators with a linear domain wall."""

from .errors import (
    ConfigError,
    DiracWallError,
    InvalidRegime,
    MergeSingular,
    MissingEnergy,
    NearSingular,
    NoRoot,
    NotPropagating,
    ThresholdEnergy,
)
from .greens import green_column_down, green_column_up, green_point_eval
from .leaf_solver import (
    BoundaryAmplitudes,
    DensityCoefficients,
    LeafConfig,
    LeafSystem,
    TRMatrix,
    build_G_hat,
    build_V_hat,
    extract_outgoing,
    leaf_TR,
    radiate_field,
    solve_leaf_density,
)
from .localized_modes import WellConfig, detect_null_space, find_resonant_length, localized_field, quantization_residual
from .merge_engine import build_tree, intersection_matrix, merge_TR, recover_amplitudes, recover_leaf_densities
from .potentials import Family, PotentialSpec, coupling_frequency, eval_potential, make_potential
from .spectral_basis import (
    EnergyContext,
    ModeIndex,
    hermite_eval,
    mode_inner_sigma3,
    mode_profile,
    mode_wavenumber,
    propagating_modes,
)
from .transport import (
    ScatteringMatrix,
    conductivity,
    current_profile,
    currents_from_S,
    scattering_from_TR,
    solve_slab,
)

__version__ = "0.1.0"
