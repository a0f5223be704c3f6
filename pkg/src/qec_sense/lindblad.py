"""Continuous-time dynamics of the error-corrected Ramsey sensor.

The sensor is an n-qubit repetition code precessing under
H = sum_j (omega/2) sigma_z^(j) while each qubit suffers bit flips at rate
``gamma_err``. Error correction is modeled as three additional jump
operators that flip a qubit back whenever it disagrees with the other two,
at rate ``gamma_qec``. The logical Ramsey signal is

    <sigma_x^L>(tau) = 2 Re <0..0| rho(tau) |1..1>.

Besides the full master equation (a 64-dimensional linear ODE for n = 3)
this module carries the exact closed subsystem obeyed by the four coherence
components (q, e, e*, q*), where q = <000|rho|111> and e is the sum of the
three single-flip coherences. Dropping the two ``2 gamma_err`` entries that
mix e with e* is the approximation behind the closed-form solution in
:mod:`qec_sense.closedform`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .qcore import TOLERANCES, Superoperator, logical_states, pauli_string, unvec, vec

__all__ = [
    "PROVENANCES",
    "ExpectationTrace",
    "IntegrationError",
    "SensorParams",
    "build_liouvillian",
    "evolve",
    "logical_coherence",
    "ramsey_state",
    "ramsey_trace",
    "reduced_matrix",
    "reduced_rhs",
    "reduced_trace",
]

PROVENANCES = (
    "simulated",
    "analytic_full",
    "analytic_reduced",
    "conjectured",
    "uncorrected",
    "discrete",
)


class IntegrationError(RuntimeError):
    """Raised when the ODE integrator fails; carries the failing time."""

    def __init__(self, message: str, tau: float):
        super().__init__(f"{message} (tau = {tau})")
        self.tau = tau


@dataclass(frozen=True)
class SensorParams:
    """Physical parameters of one sensing run.

    ``omega`` is the total precession frequency per qubit. The optional
    triple (omega_q, xi, v_signal) describes its decomposition
    omega = omega_q + 2 xi v_signal for signal-to-frequency bookkeeping;
    if supplied it must be consistent with ``omega``.
    """

    omega: float
    gamma_err: float
    gamma_qec: float
    n_qubits: int = 3
    omega_q: Optional[float] = None
    xi: Optional[float] = None
    v_signal: Optional[float] = None

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise ValueError("need at least one qubit")
        if self.gamma_err < 0 or self.gamma_qec < 0:
            raise ValueError("rates must be nonnegative")
        decomposition = (self.omega_q, self.xi, self.v_signal)
        given = [x is not None for x in decomposition]
        if any(given) and not all(given):
            raise ValueError("omega_q, xi and v_signal must be supplied together")
        if all(given):
            synthesized = self.omega_q + 2.0 * self.xi * self.v_signal
            if abs(self.omega - synthesized) > 1e-12 * max(1.0, abs(self.omega)):
                raise ValueError(
                    f"omega = {self.omega} inconsistent with omega_q + 2 xi V = {synthesized}"
                )

    @property
    def dim(self) -> int:
        return 2**self.n_qubits


@dataclass(frozen=True)
class ExpectationTrace:
    """A sampled expectation signal with its provenance.

    ``taus`` must be strictly increasing; values are clipped-checked against
    the physical bound |<sigma_x^L>| <= 1 (tolerance 1e-6 for integrator
    noise).
    """

    taus: np.ndarray
    values: np.ndarray
    provenance: str
    params: Optional[SensorParams] = None

    def __post_init__(self) -> None:
        taus = np.asarray(self.taus, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if taus.ndim != 1 or values.shape != taus.shape:
            raise ValueError("taus and values must be 1-d arrays of equal length")
        if taus.size >= 2 and not np.all(np.diff(taus) > 0):
            raise ValueError("taus must be strictly increasing")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}, expected one of {PROVENANCES}")
        if values.size and float(np.max(np.abs(values))) > 1.0 + 1e-6:
            raise ValueError("expectation values exceed the physical bound |x| <= 1")
        taus.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.taus.size)


def _syndrome_projectors(n_qubits: int) -> list:
    """Projector onto 'qubit j disagrees with both partners', j = 1..3."""
    if n_qubits != 3:
        raise ValueError("correction jumps are defined for the three-qubit code only")
    projectors = []
    for j in range(3):
        P = np.zeros((8, 8), dtype=complex)
        for idx in range(8):
            bits = [(idx >> (2 - k)) & 1 for k in range(3)]
            others = [bits[k] for k in range(3) if k != j]
            if bits[j] != others[0] and bits[j] != others[1]:
                P[idx, idx] = 1.0
        projectors.append(P)
    return projectors


def build_liouvillian(p: SensorParams) -> Superoperator:
    """Generator of the master equation as a column-stacking matrix.

    Includes the Hamiltonian commutator, one bit-flip dissipator per qubit,
    and (for gamma_qec > 0, three qubits only) one correction jump per
    qubit: sqrt(gamma_qec) sigma_x^(j) projected on the single-error
    syndrome of qubit j.
    """
    d = p.dim
    eye = np.eye(d, dtype=complex)

    H = np.zeros((d, d), dtype=complex)
    for j in range(p.n_qubits):
        labels = "".join("Z" if k == j else "I" for k in range(p.n_qubits))
        H += 0.5 * p.omega * pauli_string(p.n_qubits, labels).matrix

    L = -1.0j * (np.kron(eye, H) - np.kron(H.T, eye))

    jumps = []
    if p.gamma_err > 0:
        for j in range(p.n_qubits):
            labels = "".join("X" if k == j else "I" for k in range(p.n_qubits))
            jumps.append(np.sqrt(p.gamma_err) * pauli_string(p.n_qubits, labels).matrix)
    if p.gamma_qec > 0:
        if p.n_qubits != 3:
            raise ValueError("gamma_qec > 0 requires the three-qubit code")
        for j, P in enumerate(_syndrome_projectors(p.n_qubits)):
            labels = "".join("X" if k == j else "I" for k in range(3))
            sx = pauli_string(3, labels).matrix
            jumps.append(np.sqrt(p.gamma_qec) * (sx @ P))

    for Lk in jumps:
        LdL = Lk.conj().T @ Lk
        L += np.kron(Lk.conj(), Lk)
        L -= 0.5 * np.kron(eye, LdL)
        L -= 0.5 * np.kron(LdL.T, eye)
    return Superoperator(L)


def evolve(
    liouvillian: Superoperator,
    rho0: np.ndarray,
    taus: np.ndarray,
    rtol: float = 1e-10,
    max_step: float = np.inf,
) -> np.ndarray:
    """Integrate rho' = L rho and return rho at each requested time.

    Uses an explicit high-order Runge-Kutta scheme (DOP853) on the
    vectorized complex system; at dimension 64 this is cheap even for stiff
    correction rates. Trace drift beyond ``TOLERANCES.trace_conservation``
    or an integrator failure raises :class:`IntegrationError`.
    """
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or taus.size == 0:
        raise ValueError("taus must be a nonempty 1-d array")
    if not np.all(np.diff(taus) > 0):
        raise ValueError("taus must be strictly increasing")

    Lmat = liouvillian.matrix
    y0 = vec(np.asarray(rho0, dtype=complex))

    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        return Lmat @ y

    t0 = min(0.0, float(taus[0]))
    sol = solve_ivp(
        rhs,
        (t0, float(taus[-1])),
        y0,
        method="DOP853",
        t_eval=taus,
        rtol=rtol,
        atol=1e-12,
        max_step=max_step,
    )
    if not sol.success:
        reached = float(sol.t[-1]) if sol.t.size else t0
        raise IntegrationError(f"integrator failed: {sol.message}", tau=reached)

    states = np.array([unvec(sol.y[:, i]) for i in range(sol.y.shape[1])])
    traces = np.einsum("kii->k", states)
    drift = float(np.max(np.abs(traces - 1.0)))
    if drift > TOLERANCES.trace_conservation:
        worst = int(np.argmax(np.abs(traces - 1.0)))
        raise IntegrationError(f"trace drifted by {drift:.3e}", tau=float(taus[worst]))
    return states


def ramsey_state(n_qubits: int = 3) -> np.ndarray:
    """Initial Ramsey state |+_L><+_L| with |+_L> = (|0..0> + |1..1>)/sqrt(2)."""
    zero, one = logical_states(n_qubits)
    plus = (zero + one) / np.sqrt(2.0)
    return np.outer(plus, plus.conj())


def logical_coherence(rho: np.ndarray) -> complex:
    """The matrix element q = <0..0| rho |1..1>."""
    rho = np.asarray(rho)
    return complex(rho[0, -1])


def ramsey_trace(p: SensorParams, taus: np.ndarray, rtol: float = 1e-10) -> ExpectationTrace:
    """Simulate the Ramsey protocol and return <sigma_x^L>(tau) = 2 Re q."""
    L = build_liouvillian(p)
    states = evolve(L, ramsey_state(p.n_qubits), taus, rtol=rtol)
    values = 2.0 * np.real(states[:, 0, -1])
    return ExpectationTrace(taus=taus, values=values, provenance="simulated", params=p)


def reduced_matrix(p: SensorParams, include_conjugate_mixing: bool = True) -> np.ndarray:
    """Generator of the exact 4-component coherence subsystem (q, e, e*, q*).

    With ``include_conjugate_mixing`` the system is exactly equivalent to
    the full master equation projected on the coherence sector. Without it,
    the two ``2 gamma_err`` entries coupling e and e* are dropped; that
    truncated system is what the closed-form solution integrates.
    """
    w, g, G = p.omega, p.gamma_err, p.gamma_qec
    mix = 2.0 * g if include_conjugate_mixing else 0.0
    return np.array(
        [
            [-3j * w - 3 * g, g + G, 0.0, 0.0],
            [3 * g, -1j * w - 3 * g - G, mix, 0.0],
            [0.0, mix, 1j * w - 3 * g - G, 3 * g],
            [0.0, 0.0, g + G, 3j * w - 3 * g],
        ],
        dtype=complex,
    )


def reduced_rhs(
    p: SensorParams, state: np.ndarray, include_conjugate_mixing: bool = True
) -> np.ndarray:
    """Time derivative of the (q, e, e*, q*) coherence vector."""
    state = np.asarray(state, dtype=complex).reshape(-1)
    if state.size != 4:
        raise ValueError("reduced state must have exactly four components")
    return reduced_matrix(p, include_conjugate_mixing) @ state


def reduced_trace(
    p: SensorParams,
    taus: np.ndarray,
    include_conjugate_mixing: bool = True,
    rtol: float = 1e-10,
) -> ExpectationTrace:
    """Integrate the 4-component subsystem from the Ramsey state (q = 1/2)."""
    taus = np.asarray(taus, dtype=float)
    M = reduced_matrix(p, include_conjugate_mixing)
    y0 = np.array([0.5, 0.0, 0.0, 0.5], dtype=complex)
    sol = solve_ivp(
        lambda _t, y: M @ y,
        (min(0.0, float(taus[0])), float(taus[-1])),
        y0,
        method="DOP853",
        t_eval=taus,
        rtol=rtol,
        atol=1e-12,
    )
    if not sol.success:
        reached = float(sol.t[-1]) if sol.t.size else 0.0
        raise IntegrationError(f"integrator failed: {sol.message}", tau=reached)
    values = 2.0 * np.real(sol.y[0, :])
    return ExpectationTrace(taus=taus, values=values, provenance="simulated", params=p)
