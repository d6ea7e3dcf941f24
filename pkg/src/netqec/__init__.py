"""netqec: noisy-network QEC memory simulations.

Surface and bivariate-bicycle codes, two-node Tanner-graph partitioning,
circuit-level syndrome extraction with GHZ / Bell-pair network primitives,
fast frame and error-model samplers, matching and BP+OSD decoders, and a
Monte-Carlo harness with the logical-error-rate ansatz fit.
"""

from .codes import (
    BBSpec,
    BinaryMatrix,
    CssCode,
    InvalidCodeError,
    PRESETS,
    build_bb_code,
    build_surface_code,
    load_preset,
)
from .partition import (
    Partition,
    PartitionError,
    PartitionStats,
    TannerGraph,
    bipartition,
    build_combined_tanner,
    export_partition,
    import_partition,
    partition_stats,
)
from .circuit import (
    Circuit,
    CircuitError,
    Instruction,
    NoiseModel,
    Rec,
    bell_fidelity_to_p,
    build_bb_circuit,
    build_surface_circuit,
    circuit_from_text,
    circuit_to_text,
    ghz_measure_gadget,
    teleported_cnot_gadget,
)
from .tableau import TableauSimulator
from .sim import (
    DetectorErrorModel,
    FrameSample,
    dem_sample,
    extract_dem,
    frame_sample,
)
from .decode import (
    BpOsdConfig,
    BpOsdDecoder,
    DecodeError,
    ErrorRateEstimate,
    MatchingDecoder,
    MatchingGraph,
    bposd_decode,
    logical_error_rate,
    mwpm_decode,
    wilson_interval,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    ExperimentPoint,
    FitResult,
    fit_ansatz,
    resolve_code,
    run_experiment,
    run_point,
)

__version__ = "0.1.0"

__all__ = [
    "BBSpec", "BinaryMatrix", "CssCode", "InvalidCodeError", "PRESETS",
    "build_bb_code", "build_surface_code", "load_preset",
    "Partition", "PartitionError", "PartitionStats", "TannerGraph",
    "bipartition", "build_combined_tanner", "export_partition",
    "import_partition", "partition_stats",
    "Circuit", "CircuitError", "Instruction", "NoiseModel", "Rec",
    "bell_fidelity_to_p", "build_bb_circuit", "build_surface_circuit",
    "circuit_from_text", "circuit_to_text", "ghz_measure_gadget",
    "teleported_cnot_gadget",
    "TableauSimulator",
    "DetectorErrorModel", "FrameSample", "dem_sample", "extract_dem",
    "frame_sample",
    "BpOsdConfig", "BpOsdDecoder", "DecodeError", "ErrorRateEstimate",
    "MatchingDecoder", "MatchingGraph", "bposd_decode", "logical_error_rate",
    "mwpm_decode", "wilson_interval",
    "ConfigError", "ExperimentConfig", "ExperimentPoint", "FitResult",
    "fit_ansatz", "resolve_code", "run_experiment", "run_point",
]
