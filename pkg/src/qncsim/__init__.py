"""Quantized network coding for sparse data gathering in sensor networks."""

from .decode import (
    DecodeError,
    DecodeProblem,
    DecodeResult,
    RipEstimate,
    best_rip_scaling,
    c1_constant,
    error_bound,
    exhaustive_sparse_oracle,
    l1_min_decode,
    rip_constant,
)
from .forward import ForwardingRun, forwarding_schedule, simulate_forwarding
from .graph import Edge, GraphError, NetworkGraph, RoutingTable, generate_random_network, shortest_paths_to_gateway
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    ResultRow,
    compute_snr,
    emit_csv,
    optimize_block_length,
    read_csv,
    run_experiment,
)
from .qnc import (
    CoefficientSchedule,
    MeasurementRecord,
    QNCRun,
    Quantizer,
    QuantizerOverflow,
    assemble_measurements,
    build_transfer_matrices,
    compute_epsilon_sq,
    compute_psi,
    edge_quantizers,
    generate_coefficients,
    psi_stack,
    quantize,
    quantizer_for_edge,
    simulate_qnc,
)
from .signal import MessageEnsemble, generate_sparse_messages, random_orthonormal_basis
from .transcript import Transcript, decode_report, forwarding_transcript, verify_transcript

__version__ = "0.1.0"
