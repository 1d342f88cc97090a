"""Open-quantum-system dynamical maps: divisibility, information backflow, measures."""

__version__ = "0.1.0"

from .analysis import (
    AlbertiResult,
    ClassificationReport,
    ClassifyConfig,
    MarkovReport,
    alberti_check,
    check_cpd,
    check_gtde,
    check_p_divisibility,
    classify,
    monotonicity_report,
)
from .channels import (
    QuantumChannel,
    compose,
    convert,
    extend_with_identity,
    intermediate_map,
    random_cptp,
    verify_cptp,
)
from .dynamics import (
    DynamicalMapFamily,
    ProbabilityFunctions,
    RateFunctions,
    TimeGrid,
    channel_at,
    gamma_from_lambda,
    invertibility_scan,
    lambda_from_probs,
    lambda_from_rates,
    preset,
)
from .linalg import (
    DensityMatrix,
    Ensemble,
    Space,
    hermitian_eig,
    matrix_sqrt_psd,
    partial_trace,
    qubit_from_bloch,
    random_state,
    schatten_norm,
    trace_norm,
    von_neumann_entropy,
)
from .quantifiers import (
    QuantifierDefinition,
    QuantifierSpec,
    Trajectory,
    coherent_information,
    evaluate_pq,
    evaluate_trajectory,
    lift_s_to_sa,
    pq_blp,
    pq_fidelity,
    pq_gtd,
    pq_pnorm_combo,
    pq_qfi,
    pq_qmi,
    register_quantifier,
)
