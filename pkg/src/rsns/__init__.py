"""Computational lab for the two-dimensional cubic resonant Schroedinger system.

Exact enumeration of the four-wave resonant set over lattice windows, two
independently verified evaluators of the resonant nonlinearity, numerical
verification of its weighted symmetries and size estimates, free-flow
space-time norm measurements on the torus, and a split-step simulator for
the coupled field system with conservation, covariance, virial, and
scattering diagnostics.
"""

from .config import ExperimentConfig, PRESETS, config_from_sources
from .dynamics import (
    BoundaryMassWarning,
    BoxGrid,
    DiagnosticsRecord,
    FieldState,
    ObservationResiduals,
    ScatteringDiagnostic,
    SimConfig,
    Trajectory,
    boundary_mass_fraction,
    energy,
    evolve,
    galilean_apply,
    gaussian_state,
    l2h1_norm,
    linear_step,
    lp_project,
    mass0,
    mass1,
    momentum,
    morawetz_functional,
    morawetz_lhs,
    nonlinear_rhs,
    observation_residuals,
    plane_wave_state,
    scattering_diagnostic,
    strang_step,
)
from .errors import (
    BudgetError,
    ConfigError,
    InstabilityError,
    RsnsError,
    SnapshotFormatError,
)
from .lattice import (
    FrequencyWindow,
    ModeIndex,
    ResonantTable,
    ResonantTriple,
    TripleKind,
    build_table,
    circle_lattice_points,
    circle_tail_sum,
    enumerate_triples,
    enumerate_triples_oracle,
    is_resonant,
)
from .sequences import (
    CoefSequence,
    EstimateReport,
    FailureScanResult,
    apply_nonlinearity_batch,
    apply_nonlinearity_direct,
    apply_nonlinearity_spectral,
    estimate_ratios,
    estimate_ratios_many,
    failure_scan,
    norm_hs,
    weighted_quartic_form,
)
from .snapshots import read_snapshot, snapshot_roundtrip, write_snapshot
from .torus import (
    BilinearResult,
    StrichartzResult,
    TorusField,
    annulus_modes,
    bilinear_measure,
    cubic_pairing_quadrature,
    strichartz_l4_measure,
    torus_propagate,
)

__version__ = "0.1.0"
