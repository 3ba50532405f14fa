"""Simulation toolkit for error-tolerant macrorealism witness experiments."""

from .qudit import (
    DimensionError,
    InvariantError,
    OrthonormalBasis,
    Projector,
    PureState,
    QuantumState,
    UnitaryChannel,
    apply_dephasing,
    apply_unitary,
    born_probability,
    make_superposition,
    random_unitary,
)
from .reck import (
    CoherenceSpec,
    DecompositionPlan,
    OpticalLayout,
    TwoLevelRotation,
    blind_measurement_layout,
    decompose,
    emit_layout,
    min_quartz_thickness,
    reconstruct,
)
from .shotnoise import (
    CountRecord,
    DetectorProfile,
    NoiseStudyResult,
    efficiency_correct,
    estimate_witness,
    noise_sweep,
    sample_counts,
    sd_of_violation,
)
from .witness import (
    BlindMeasurement,
    Channel,
    OptimalConfigSpec,
    WitnessConfig,
    WitnessReport,
    analytic_v,
    builtin_configs,
    compute_witness_v,
    compute_witness_w,
    control_sum,
    full_report,
    optimal_config,
    theoretical_wmax,
)

__version__ = "0.1.0"
