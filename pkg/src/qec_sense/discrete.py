"""Discrete channel-cycle model of the corrected Ramsey protocol.

One sensing cycle is the composition of three CPTP maps: a noise channel
N (total error probability ``p_noise``), the sensing unitary U(delta_tau),
and the detection-and-correction channel C. Iterating the cycle c times
gives the state after tau = c * delta_tau.

Because N splits into an ideal part and a normalized erroneous part N',
the c-fold product reduces to a binomial sum over how many cycles were
erroneous -- exactly when the per-cycle maps commute on the logical space
(true for the single-flip "optimal" noise model, false for the "realistic"
weight-1/2/3 model). The same commutator evaluated between U o N' and
U^{-1} decides whether correction biases the measured signal at all: the
erroneous subspaces precess at a different rate than the code space, so
each corrected error leaves a phase offset e^{2 i omega delta_tau} behind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import binom

from .lindblad import ExpectationTrace, SensorParams, _syndrome_projectors, ramsey_state
from .qcore import (
    TOLERANCES,
    Channel,
    DensityMatrix,
    Operator,
    channel_to_superoperator,
    logical_states,
    pauli_string,
)

__all__ = [
    "BiasReport",
    "CycleSpec",
    "REALISTIC_MAX_P",
    "bias_of_observable",
    "biasedness_check",
    "binomial_form",
    "correction_channel",
    "discrete_trace",
    "expectation_discrete_normal",
    "iterate_cycles",
    "noise_channel",
    "noise_error_part",
    "reconstructed_state",
    "reconstruction_trace",
    "sensing_channel",
]

# largest per-qubit flip probability keeping 3p + 3p^2 + p^3 <= 1
REALISTIC_MAX_P = 2.0 ** (1.0 / 3.0) - 1.0

NOISE_MODELS = ("optimal", "realistic")


@dataclass(frozen=True)
class CycleSpec:
    """Cycle count, interval duration and noise strength of a discrete run.

    ``p_noise`` is the total per-cycle error probability. The realistic
    model also records the per-qubit flip probability ``p_flip``; the two
    are tied by p_noise = 3p + 3p^2 + p^3.
    """

    c: int
    delta_tau: float
    p_noise: float
    noise_model: str
    p_flip: Optional[float] = None

    def __post_init__(self) -> None:
        if self.c < 0:
            raise ValueError("cycle count must be nonnegative")
        if self.delta_tau <= 0:
            raise ValueError("delta_tau must be positive")
        if not 0.0 <= self.p_noise <= 1.0:
            raise ValueError(f"p_noise = {self.p_noise} outside [0, 1]")
        if self.noise_model not in NOISE_MODELS:
            raise ValueError(f"unknown noise model {self.noise_model!r}")
        if self.noise_model == "realistic":
            if self.p_flip is None:
                raise ValueError("the realistic model needs a per-qubit flip probability")
            p = self.p_flip
            implied = 3.0 * p + 3.0 * p * p + p**3
            if abs(self.p_noise - implied) > 1e-12:
                raise ValueError(
                    f"p_noise = {self.p_noise} inconsistent with 3p + 3p^2 + p^3 = {implied}"
                )
        elif self.p_flip is not None:
            raise ValueError("p_flip applies to the realistic model only")

    @classmethod
    def optimal(cls, c: int, delta_tau: float, p_noise: float) -> "CycleSpec":
        return cls(c=c, delta_tau=delta_tau, p_noise=p_noise, noise_model="optimal")

    @classmethod
    def realistic(cls, c: int, delta_tau: float, p: float) -> "CycleSpec":
        if not 0.0 <= p <= REALISTIC_MAX_P:
            raise ValueError(f"per-qubit probability {p} outside [0, {REALISTIC_MAX_P:.4f}]")
        p_noise = min(3.0 * p + 3.0 * p * p + p**3, 1.0)
        return cls(c=c, delta_tau=delta_tau, p_noise=p_noise, noise_model="realistic", p_flip=p)

    @property
    def tau(self) -> float:
        return self.c * self.delta_tau

    @property
    def p_ideal(self) -> float:
        return 1.0 - self.p_noise


@dataclass(frozen=True)
class BiasReport:
    """Result of a biasedness check, plus the observable bias if evaluated.

    ``is_biased`` must equal ``commutator_norm > tolerance``.
    """

    commutator_norm: float
    is_biased: bool
    tolerance: float = 1e-10
    delta_observable: Optional[float] = None

    def __post_init__(self) -> None:
        if self.commutator_norm < 0:
            raise ValueError("commutator norm cannot be negative")
        if self.is_biased != (self.commutator_norm > self.tolerance):
            raise ValueError("is_biased inconsistent with commutator_norm and tolerance")


def _single_flips(n_qubits: int) -> list:
    return [
        pauli_string(n_qubits, "".join("X" if k == j else "I" for k in range(n_qubits))).matrix
        for j in range(n_qubits)
    ]


def noise_channel(spec: CycleSpec, n_qubits: int = 3) -> Channel:
    """The per-cycle noise map N.

    Optimal model: identity with weight 1 - p_noise plus one single-qubit
    flip with weight p_noise/3 each. Realistic model: flip weights p, p^2,
    p^3 by error weight, so p_noise = 3p + 3p^2 + p^3.
    """
    d = 2**n_qubits
    flips = _single_flips(n_qubits)
    if spec.noise_model == "optimal":
        kraus = [np.sqrt(spec.p_ideal) * np.eye(d, dtype=complex)]
        kraus += [np.sqrt(spec.p_noise / 3.0) * f for f in flips]
        return Channel(kraus=tuple(kraus))
    p = spec.p_flip
    kraus = [np.sqrt(spec.p_ideal) * np.eye(d, dtype=complex)]
    kraus += [np.sqrt(p) * f for f in flips]
    kraus += [
        np.sqrt(p * p) * (flips[k] @ flips[l])
        for k in range(n_qubits)
        for l in range(k + 1, n_qubits)
    ]
    kraus.append(np.sqrt(p**3) * flips[0] @ flips[1] @ flips[2])
    return Channel(kraus=tuple(kraus))


def noise_error_part(spec: CycleSpec, n_qubits: int = 3) -> Channel:
    """The normalized erroneous part N' with weights c_k / p_noise."""
    if spec.p_noise == 0.0:
        raise ValueError("p_noise = 0 leaves no erroneous part to normalize")
    flips = _single_flips(n_qubits)
    if spec.noise_model == "optimal":
        kraus = [np.sqrt(1.0 / 3.0) * f for f in flips]
        return Channel(kraus=tuple(kraus))
    p, pn = spec.p_flip, spec.p_noise
    kraus = [np.sqrt(p / pn) * f for f in flips]
    kraus += [
        np.sqrt(p * p / pn) * (flips[k] @ flips[l])
        for k in range(n_qubits)
        for l in range(k + 1, n_qubits)
    ]
    kraus.append(np.sqrt(p**3 / pn) * flips[0] @ flips[1] @ flips[2])
    return Channel(kraus=tuple(kraus))


def correction_channel(n_qubits: int = 3) -> Channel:
    """Detection and correction: project on each syndrome, flip the culprit.

    Kraus operators are P_0 (code space untouched) and sigma_x^(j) P_j for
    each single-error syndrome. The map lands in the code space, so it is
    idempotent.
    """
    if n_qubits != 3:
        raise ValueError("correction is defined for the three-qubit code only")
    projectors = _syndrome_projectors(n_qubits)
    p0 = np.eye(8, dtype=complex) - sum(projectors)
    flips = _single_flips(n_qubits)
    kraus = [p0] + [flips[j] @ projectors[j] for j in range(3)]
    return Channel(kraus=tuple(kraus))


def sensing_channel(p: SensorParams, delta_tau: float) -> Channel:
    """The unitary precession U(delta_tau) = exp(-i (omega/2) delta_tau sum_j Z_j)."""
    zsum = np.zeros((p.dim, p.dim), dtype=complex)
    for j in range(p.n_qubits):
        labels = "".join("Z" if k == j else "I" for k in range(p.n_qubits))
        zsum += pauli_string(p.n_qubits, labels).matrix
    phases = np.exp(-0.5j * p.omega * delta_tau * np.diag(zsum))
    return Channel(kraus=(np.diag(phases),))


def _cycle_superoperator(spec: CycleSpec, p: SensorParams) -> np.ndarray:
    sc = channel_to_superoperator(correction_channel(p.n_qubits)).matrix
    su = channel_to_superoperator(sensing_channel(p, spec.delta_tau)).matrix
    sn = channel_to_superoperator(noise_channel(spec, p.n_qubits)).matrix
    return sc @ su @ sn


def _as_density(out: np.ndarray) -> DensityMatrix:
    """Validate accumulated roundoff, then renormalize it away."""
    drift = abs(np.trace(out) - 1.0)
    if drift > TOLERANCES.trace_conservation:
        raise ValueError(f"cycle iteration drifted the trace by {drift:.3e}")
    out = 0.5 * (out + out.conj().T)
    return DensityMatrix(out / np.trace(out).real)


def iterate_cycles(spec: CycleSpec, p: SensorParams, rho0: DensityMatrix) -> DensityMatrix:
    """Apply the full cycle (C o U o N) exactly c times."""
    m = np.linalg.matrix_power(_cycle_superoperator(spec, p), spec.c)
    d = rho0.dim
    out = (m @ rho0.matrix.reshape(-1, order="F")).reshape(d, d, order="F")
    return _as_density(out)


def discrete_trace(spec: CycleSpec, p: SensorParams, corrected: bool = True) -> ExpectationTrace:
    """Cycle-resolved <sigma_x^L>, optionally without the correction step."""
    su = channel_to_superoperator(sensing_channel(p, spec.delta_tau)).matrix
    sn = channel_to_superoperator(noise_channel(spec, p.n_qubits)).matrix
    m = su @ sn
    if corrected:
        m = channel_to_superoperator(correction_channel(p.n_qubits)).matrix @ m
    d = p.dim
    state = ramsey_state(p.n_qubits).reshape(-1, order="F")
    values = np.empty(spec.c)
    for k in range(spec.c):
        state = m @ state
        values[k] = 2.0 * state[(d - 1) * d].real
    taus = spec.delta_tau * np.arange(1, spec.c + 1)
    return ExpectationTrace(taus=taus, values=values, provenance="discrete", params=p)


def _basis_commutator_norm(a: np.ndarray, b: np.ndarray, n_qubits: int) -> float:
    """Max entrywise modulus of (ab - ba) applied to the logical matrix units."""
    zero, one = logical_states(n_qubits)
    d = 2**n_qubits
    k = a @ b - b @ a
    worst = 0.0
    for left in (zero, one):
        for right in (zero, one):
            unit = np.outer(left, right.conj()).reshape(-1, order="F")
            image = (k @ unit).reshape(d, d, order="F")
            worst = max(worst, float(np.max(np.abs(image))))
    return worst


def biasedness_check(
    sensing: Channel,
    noise_err_part: Channel,
    logical_basis: Optional[list] = None,
    tolerance: float = 1e-10,
) -> BiasReport:
    """Evaluate the commutator [U o N', U^{-1}] on the logical basis.

    A nonzero commutator means corrected errors acquire a relative phase,
    so the correction biases the measured oscillation frequency.
    """
    if sensing.dim != noise_err_part.dim:
        raise ValueError("sensing and noise channels differ in dimension")
    d = sensing.dim
    su = channel_to_superoperator(sensing).matrix
    sn = channel_to_superoperator(noise_err_part).matrix
    u_inv = Channel(kraus=tuple(k.conj().T for k in sensing.kraus))
    sb = channel_to_superoperator(u_inv).matrix
    a = su @ sn
    if logical_basis is None:
        norm = _basis_commutator_norm(a, sb, int(round(math.log2(d))))
    else:
        k = a @ sb - sb @ a
        worst = 0.0
        for unit in logical_basis:
            unit = np.asarray(unit, dtype=complex)
            image = (k @ unit.reshape(-1, order="F")).reshape(d, d, order="F")
            worst = max(worst, float(np.max(np.abs(image))))
        norm = worst
    return BiasReport(commutator_norm=norm, is_biased=norm > tolerance, tolerance=tolerance)


def _binomial_commutator_norm(spec: CycleSpec, p: SensorParams) -> float:
    """Commutator of U with C o U o N' on the logical basis.

    This is the condition under which the c-fold cycle product collapses
    to a binomial sum: the ideal and erroneous per-cycle maps must commute.
    """
    su = channel_to_superoperator(sensing_channel(p, spec.delta_tau)).matrix
    sc = channel_to_superoperator(correction_channel(p.n_qubits)).matrix
    sn = channel_to_superoperator(noise_error_part(spec, p.n_qubits)).matrix
    return _basis_commutator_norm(su, sc @ su @ sn, p.n_qubits)


def binomial_form(
    spec: CycleSpec, p: SensorParams, rho_tau: DensityMatrix, verify: bool = False
) -> DensityMatrix:
    """Binomial reduction of the c-fold cycle product.

    sum_k Binom(c, p_noise)(k) [C o U o N' o U^{-1}]^k applied to the ideal
    state rho_tau. Equal to :func:`iterate_cycles` whenever the per-cycle
    maps commute on the logical space; ``verify`` checks that first and
    refuses if the commutator norm exceeds 1e-10.
    """
    if verify:
        norm = _binomial_commutator_norm(spec, p)
        if norm > 1e-10:
            raise ValueError(
                "binomial reduction invalid: ideal and erroneous cycle maps "
                f"do not commute on the logical space (commutator norm {norm:.3e})"
            )
    if spec.p_noise == 0.0:
        return rho_tau
    d = rho_tau.dim
    su = channel_to_superoperator(sensing_channel(p, spec.delta_tau)).matrix
    sc = channel_to_superoperator(correction_channel(p.n_qubits)).matrix
    sn = channel_to_superoperator(noise_error_part(spec, p.n_qubits)).matrix
    m = sc @ su @ sn @ su.conj().T  # U^{-1} superoperator of a unitary channel
    weights = binom.pmf(np.arange(spec.c + 1), spec.c, spec.p_noise)
    term = rho_tau.matrix.reshape(-1, order="F")
    acc = weights[0] * term
    for k in range(1, spec.c + 1):
        term = m @ term
        acc = acc + weights[k] * term
    return _as_density(acc.reshape(d, d, order="F"))


def reconstructed_state(spec: CycleSpec, p: SensorParams, rho_tau: DensityMatrix) -> DensityMatrix:
    """Mean-count approximation: apply [C o U o N' o U^{-1}] round(c p_noise) times."""
    power = _round_half_away(spec.c * spec.p_noise)
    if power == 0:
        return rho_tau
    d = rho_tau.dim
    su = channel_to_superoperator(sensing_channel(p, spec.delta_tau)).matrix
    sc = channel_to_superoperator(correction_channel(p.n_qubits)).matrix
    sn = channel_to_superoperator(noise_error_part(spec, p.n_qubits)).matrix
    m = np.linalg.matrix_power(sc @ su @ sn @ su.conj().T, power)
    out = (m @ rho_tau.matrix.reshape(-1, order="F")).reshape(d, d, order="F")
    return _as_density(out)


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def bias_of_observable(
    spec: CycleSpec, p: SensorParams, observable: Operator, rho_tau: DensityMatrix
) -> float:
    """Signed bias Tr(O rho(tau)) - Tr(O rho_tau) of the mean-count state."""
    reconstructed = reconstructed_state(spec, p, rho_tau)
    before = np.trace(observable.matrix @ rho_tau.matrix).real
    after = np.trace(observable.matrix @ reconstructed.matrix).real
    return float(after - before)


def reconstruction_trace(spec: CycleSpec, p: SensorParams) -> ExpectationTrace:
    """Per-cycle <sigma_x^L> of the mean-count reconstruction.

    At cycle k the ideal state U^k(rho_0) is corrected round(k p_noise)
    times by the erroneous map; for unbiased noise models the result keeps
    a constant envelope while tracking the biased oscillation frequency.
    """
    d = p.dim
    su = channel_to_superoperator(sensing_channel(p, spec.delta_tau)).matrix

    ideal = ramsey_state(p.n_qubits).reshape(-1, order="F")
    max_power = _round_half_away(spec.c * spec.p_noise)
    powers = [np.eye(d * d, dtype=complex)]
    if max_power > 0:
        sc = channel_to_superoperator(correction_channel(p.n_qubits)).matrix
        sn = channel_to_superoperator(noise_error_part(spec, p.n_qubits)).matrix
        m = sc @ su @ sn @ su.conj().T
        for _ in range(max_power):
            powers.append(m @ powers[-1])

    values = np.empty(spec.c)
    for k in range(1, spec.c + 1):
        ideal = su @ ideal
        state = powers[_round_half_away(k * spec.p_noise)] @ ideal
        values[k - 1] = 2.0 * state[(d - 1) * d].real
    taus = spec.delta_tau * np.arange(1, spec.c + 1)
    return ExpectationTrace(taus=taus, values=values, provenance="discrete", params=p)


def expectation_discrete_normal(
    spec: CycleSpec, p: SensorParams, tau: "float | np.ndarray"
) -> "float | np.ndarray":
    """Normal-law limit of the binomial error count.

    e^{-2 p_noise p_ideal omega^2 delta_tau tau} cos[3 omega (1 - (2/3) p_noise) tau];
    accurate for many cycles with p_noise away from 0 and 1.
    """
    tau = np.asarray(tau, dtype=float)
    rate = 2.0 * spec.p_noise * spec.p_ideal * p.omega**2 * spec.delta_tau
    freq = 3.0 * p.omega * (1.0 - (2.0 / 3.0) * spec.p_noise)
    out = np.exp(-rate * tau) * np.cos(freq * tau)
    return out if out.ndim else float(out)
