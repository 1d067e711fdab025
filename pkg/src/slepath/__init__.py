"""Chordal SLE numerics: Loewner traces, rough-path quantities, closed-form
checks, crossing statistics, and fractal dimension estimators."""

from .loewner import (
    KappaParams,
    DrivingFunction,
    PlanarPath,
    TraceError,
    UPPER_HALF_PLANE,
    UNIT_DISK,
    SMALL_DISK,
    SEED_RULE,
    RIGHT,
    LEFT,
    UNDECIDED,
    sample_driving,
    elementary_forward_map,
    elementary_inverse_map,
    sqrt_upper,
    compute_trace,
    to_unit_disk,
    to_small_disk,
    small_disk_trace,
    left_passage_side,
    write_path_csv,
    read_path_csv,
)
from .geometry import (
    Annulus,
    CrossingRecord,
    DecayFit,
    INNER,
    OUTER,
    crossing_times,
    crossing_counts,
    crossing_probability,
    wilson_half_width,
    least_squares_slope,
    fit_decay,
    catalan_number,
    box_count,
    tortuosity_segments,
)
from .roughpath import (
    TensorSeries,
    Partition,
    YoungResult,
    SimplicityError,
    all_words,
    identity_series,
    segment_signature,
    chen_concat,
    signature_of_polyline,
    shuffle_product,
    young_integral,
    p_variation,
    simple_approximation,
)
from .formulas import (
    QuadratureSpec,
    QuadratureError,
    DEFAULT_QUAD,
    ExpectedSignature3,
    phi,
    below_probability,
    a_kappa_quadrature,
    a_kappa_closed_form,
    a_kappa_double_integral,
    h_closed_form,
    h_quadrature,
    h_antiderivative_check,
    expected_signature_level3,
    write_akappa_table,
)
from .experiments import (
    COMMANDS,
    OUTPUT_DIR_ENV,
    ExperimentConfig,
    ExperimentError,
    WordStat,
    SignatureMcResult,
    PassagePointResult,
    LeftPassageResult,
    CrossingRow,
    CrossingLadderResult,
    DimensionResult,
    default_config,
    config_echo,
    config_json,
    resolve_output_path,
    geometric_time_grid,
    run_signature_mc,
    run_left_passage,
    run_crossing_ladder,
    run_dimension,
    run_trace,
    run,
    write_crossing_csv,
    write_dimension_csv,
)

__all__ = [
    "KappaParams",
    "DrivingFunction",
    "PlanarPath",
    "TraceError",
    "UPPER_HALF_PLANE",
    "UNIT_DISK",
    "SMALL_DISK",
    "SEED_RULE",
    "RIGHT",
    "LEFT",
    "UNDECIDED",
    "sample_driving",
    "elementary_forward_map",
    "elementary_inverse_map",
    "sqrt_upper",
    "compute_trace",
    "to_unit_disk",
    "to_small_disk",
    "small_disk_trace",
    "left_passage_side",
    "write_path_csv",
    "read_path_csv",
    "Annulus",
    "CrossingRecord",
    "DecayFit",
    "INNER",
    "OUTER",
    "crossing_times",
    "crossing_counts",
    "crossing_probability",
    "wilson_half_width",
    "least_squares_slope",
    "fit_decay",
    "catalan_number",
    "box_count",
    "tortuosity_segments",
    "TensorSeries",
    "Partition",
    "YoungResult",
    "SimplicityError",
    "all_words",
    "identity_series",
    "segment_signature",
    "chen_concat",
    "signature_of_polyline",
    "shuffle_product",
    "young_integral",
    "p_variation",
    "simple_approximation",
    "QuadratureSpec",
    "QuadratureError",
    "DEFAULT_QUAD",
    "ExpectedSignature3",
    "phi",
    "below_probability",
    "a_kappa_quadrature",
    "a_kappa_closed_form",
    "a_kappa_double_integral",
    "h_closed_form",
    "h_quadrature",
    "h_antiderivative_check",
    "expected_signature_level3",
    "write_akappa_table",
    "COMMANDS",
    "OUTPUT_DIR_ENV",
    "ExperimentConfig",
    "ExperimentError",
    "WordStat",
    "SignatureMcResult",
    "PassagePointResult",
    "LeftPassageResult",
    "CrossingRow",
    "CrossingLadderResult",
    "DimensionResult",
    "default_config",
    "config_echo",
    "config_json",
    "resolve_output_path",
    "geometric_time_grid",
    "run_signature_mc",
    "run_left_passage",
    "run_crossing_ladder",
    "run_dimension",
    "run_trace",
    "run",
    "write_crossing_csv",
    "write_dimension_csv",
]
