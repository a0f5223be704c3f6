"""Ramsey sensing with a bit-flip repetition code.

Simulation of the continuously corrected sensor, closed-form solutions for
its logical signal, a discrete channel-based model of the same protocol,
and the estimation tools needed to quantify how error correction biases
the measured frequency.
"""

from .qcore import (
    TOLERANCES,
    Channel,
    DensityMatrix,
    Operator,
    Superoperator,
    ToleranceConfig,
    channel_to_superoperator,
    dissipator,
    logical_states,
    logical_x,
    pauli_string,
)
from .lindblad import (
    ExpectationTrace,
    IntegrationError,
    SensorParams,
    build_liouvillian,
    evolve,
    ramsey_state,
    ramsey_trace,
    reduced_rhs,
    reduced_trace,
)
from .closedform import (
    EffectiveParams,
    EigenSolution,
    conjectured_trace,
    effective_param_derivatives,
    effective_params,
    eigen_solution,
    expectation_conjectured,
    expectation_full,
    expectation_full_domega,
    expectation_reduced,
    expectation_simplified,
    expectation_uncorrected,
    full_trace,
    q_full,
    uncorrected_trace,
    validity_check,
)
from .discrete import (
    REALISTIC_MAX_P,
    BiasReport,
    CycleSpec,
    biasedness_check,
    binomial_form,
    correction_channel,
    discrete_trace,
    expectation_discrete_normal,
    iterate_cycles,
    noise_channel,
    reconstruction_trace,
    sensing_channel,
)
from .spectral import Spectrum, effective_frequency_sweep, spectrum
from .inference import (
    BoundReport,
    FitResult,
    ShotRecord,
    bias_statistic,
    crb_audit,
    fisher_information,
    least_squares_fit,
    min_detectable_signal,
    optimal_sensing_time,
    run_fit_experiment,
    sample_shots,
)
from .cli import ComparisonReport, RunConfig, read_artifact, render_artifact

__version__ = "0.1.0"
