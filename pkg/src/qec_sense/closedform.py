"""Closed-form solutions for the corrected and uncorrected Ramsey signal.

All expressions solve the 4-component coherence system of
:mod:`qec_sense.lindblad` with the conjugate-mixing entries dropped. Writing
w = omega, g = gamma_err, G = gamma_qec, the logical coherence is

    q(tau) = C+ exp(lambda+ tau) - C- exp(lambda- tau),

with a complex discriminant D = G^2 + 12 G g + 12 g^2 - 4 i G w - 4 w^2,
eigenvalues lambda+- = (-G - 6 g - 4 i w +- sqrt(D)) / 2 and constants
C+- = (G - 2 i w)/(4 sqrt(D)) +- 1/4. The slow mode's imaginary and real
parts define the effective frequency and decay rate that a measurement
actually sees; their small-ratio expansions in r = g / G are provided to
third order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .lindblad import ExpectationTrace, SensorParams

__all__ = [
    "EffectiveParams",
    "EigenSolution",
    "conjectured_trace",
    "effective_param_derivatives",
    "effective_params",
    "effective_trace",
    "eigen_solution",
    "expectation_conjectured",
    "expectation_full",
    "expectation_full_domega",
    "expectation_reduced",
    "expectation_simplified",
    "expectation_uncorrected",
    "full_trace",
    "q_full",
    "uncorrected_trace",
    "validity_check",
]


@dataclass(frozen=True)
class EigenSolution:
    """Spectral data of the truncated coherence system."""

    discriminant: complex
    lambda_plus: complex
    lambda_minus: complex
    c_plus: complex
    c_minus: complex


@dataclass(frozen=True)
class EffectiveParams:
    """Effective precession frequency and decay rate at expansion order 1..3."""

    omega_eff: float
    gamma_eff: float
    order: int

    def __post_init__(self) -> None:
        if self.order not in (1, 2, 3):
            raise ValueError("expansion order must be 1, 2 or 3")


def eigen_solution(p: SensorParams) -> EigenSolution:
    w, g, G = p.omega, p.gamma_err, p.gamma_qec
    D = complex(G * G + 12.0 * G * g + 12.0 * g * g - 4.0j * G * w - 4.0 * w * w)
    root = np.sqrt(D)
    lam_p = 0.5 * (-G - 6.0 * g - 4.0j * w + root)
    lam_m = 0.5 * (-G - 6.0 * g - 4.0j * w - root)
    base = (G - 2.0j * w) / (4.0 * root)
    return EigenSolution(
        discriminant=D,
        lambda_plus=complex(lam_p),
        lambda_minus=complex(lam_m),
        c_plus=complex(base + 0.25),
        c_minus=complex(base - 0.25),
    )


def q_full(p: SensorParams, tau: "float | np.ndarray") -> "complex | np.ndarray":
    """Logical coherence q(tau) of the truncated system, from q(0) = 1/2."""
    tau = np.asarray(tau, dtype=float)
    es = eigen_solution(p)
    out = es.c_plus * np.exp(es.lambda_plus * tau) - es.c_minus * np.exp(es.lambda_minus * tau)
    return out if out.ndim else complex(out)


def expectation_full(p: SensorParams, tau: "float | np.ndarray") -> "float | np.ndarray":
    """<sigma_x^L>(tau) = 2 Re q(tau) for the truncated system."""
    out = 2.0 * np.real(q_full(p, tau))
    return out if np.ndim(out) else float(out)


def expectation_full_domega(p: SensorParams, tau: "float | np.ndarray") -> "float | np.ndarray":
    """Analytic d<sigma_x^L>/d omega for the closed-form solution.

    Differentiating q = C+ e^{lambda+ tau} - C- e^{lambda- tau} with
    d sqrt(D)/d w = -2 (i G + 2 w)/sqrt(D) gives

        d<sigma_x^L>/dw = 2 Re( -2 i tau q + dq ),
        dq = dC+ e^{lambda+ tau} - dC- e^{lambda- tau},
        dC+- = dC/dw -+ tau C+- (i G + 2 w)/sqrt(D),

    where dC/dw = -6 i g (G + g) / D^{3/2} is common to both constants.
    """
    tau = np.asarray(tau, dtype=float)
    w, g, G = p.omega, p.gamma_err, p.gamma_qec
    es = eigen_solution(p)
    root = np.sqrt(es.discriminant)
    q = es.c_plus * np.exp(es.lambda_plus * tau) - es.c_minus * np.exp(es.lambda_minus * tau)
    dc_common = -6.0j * g * (G + g) / es.discriminant ** 1.5
    shift = (1.0j * G + 2.0 * w) / root
    dc_plus = dc_common - tau * es.c_plus * shift
    dc_minus = dc_common + tau * es.c_minus * shift
    dq = dc_plus * np.exp(es.lambda_plus * tau) - dc_minus * np.exp(es.lambda_minus * tau)
    out = 2.0 * np.real(-2.0j * tau * q + dq)
    return out if out.ndim else float(out)


def effective_params(p: SensorParams, order: int = 3) -> EffectiveParams:
    """Small-ratio expansion of the slow mode, r = gamma_err / gamma_qec.

    Hard-coded orders:

    * 1: w_eff = w (1 - 2 r),                 g_eff = 2 r g
    * 2: + w 16 r^2,                          + (-12 r^2 g + 4 w^2 g / G^2)
    * 3: + w (-141 r^3) + 8 g w^3 / G^3,      + (84 r^3 g - 68 g^2 w^2 / G^3)
    """
    if order not in (1, 2, 3):
        raise ValueError("expansion order must be 1, 2 or 3")
    w, g, G = p.omega, p.gamma_err, p.gamma_qec
    if G <= 0:
        raise ValueError("effective parameters require gamma_qec > 0")
    r = g / G
    w_eff = w * (1.0 - 2.0 * r)
    g_eff = 2.0 * r * g
    if order >= 2:
        w_eff += w * 16.0 * r * r
        g_eff += -12.0 * r * r * g + 4.0 * w * w * g / (G * G)
    if order >= 3:
        w_eff += w * (-141.0 * r**3) + 8.0 * g * w**3 / G**3
        g_eff += 84.0 * r**3 * g - 68.0 * g * g * w * w / G**3
    return EffectiveParams(omega_eff=float(w_eff), gamma_eff=float(g_eff), order=order)


def effective_param_derivatives(p: SensorParams, order: int = 3) -> tuple:
    """(d w_eff / d w, d g_eff / d w) truncated at the same orders."""
    if order not in (1, 2, 3):
        raise ValueError("expansion order must be 1, 2 or 3")
    w, g, G = p.omega, p.gamma_err, p.gamma_qec
    if G <= 0:
        raise ValueError("effective parameters require gamma_qec > 0")
    r = g / G
    dw = 1.0 - 2.0 * r
    dg = 0.0
    if order >= 2:
        dw += 16.0 * r * r
        dg += 8.0 * w * g / (G * G)
    if order >= 3:
        dw += -141.0 * r**3 + 24.0 * g * w * w / G**3
        dg += -136.0 * g * g * w / G**3
    return float(dw), float(dg)


def validity_check(p: SensorParams) -> tuple:
    """Whether the small-ratio expansion applies, plus a signed margin.

    The expansion of sqrt(D) requires, with A = 12 G g + 12 g^2 - 4 w^2,

        A^2 + 16 G^2 w^2 - G^4 < 0   and   A^2 + 16 G^2 w^2 + G^4 > 0.

    The returned margin is the first left-hand side; negative means valid
    (more negative, deeper inside the region).
    """
    w, g, G = p.omega, p.gamma_err, p.gamma_qec
    A = 12.0 * G * g + 12.0 * g * g - 4.0 * w * w
    margin = A * A + 16.0 * G * G * w * w - G**4
    second = A * A + 16.0 * G * G * w * w + G**4
    return bool(margin < 0.0 and second > 0.0), float(margin)


def expectation_reduced(ep: EffectiveParams, tau: "float | np.ndarray") -> "float | np.ndarray":
    """Single damped cosine exp(-3 g_eff tau) cos(3 w_eff tau)."""
    tau = np.asarray(tau, dtype=float)
    out = np.exp(-3.0 * ep.gamma_eff * tau) * np.cos(3.0 * ep.omega_eff * tau)
    return out if out.ndim else float(out)


def expectation_simplified(
    p: SensorParams,
    tau: "float | np.ndarray",
    effective: "EffectiveParams | None" = None,
    warn_outside_validity: bool = True,
) -> "float | np.ndarray":
    """Two-term small-ratio form of the corrected signal.

    The slow term is 2 C+ exp(-6 r g tau) cos(3 w (1 - 2 r) tau) and the
    fast transient is -2 C- exp(-(G + 6 g - 6 g^2/G) tau) cos(w (1 + 6 r) tau)
    with real constants C+ = 1/2 - (3/2) r and C- = -(3/2) r. Passing
    ``effective`` replaces the slow term's rate and frequency by the given
    expansion-order values (3 g_eff, 3 w_eff).
    """
    w, g, G = p.omega, p.gamma_err, p.gamma_qec
    if G <= 0:
        raise ValueError("the simplified form requires gamma_qec > 0")
    if warn_outside_validity:
        ok, margin = validity_check(p)
        if not ok:
            warnings.warn(
                f"parameters outside the expansion validity region (margin {margin:.3g})",
                stacklevel=2,
            )
    tau = np.asarray(tau, dtype=float)
    r = g / G
    c_plus = 0.5 - 1.5 * r
    c_minus = -1.5 * r
    if effective is None:
        slow_rate = 6.0 * r * g
        slow_freq = 3.0 * w * (1.0 - 2.0 * r)
    else:
        slow_rate = 3.0 * effective.gamma_eff
        slow_freq = 3.0 * effective.omega_eff
    slow = 2.0 * c_plus * np.exp(-slow_rate * tau) * np.cos(slow_freq * tau)
    fast = 2.0 * c_minus * np.exp(-(G + 6.0 * g - 6.0 * g * g / G) * tau) * np.cos(
        w * (1.0 + 6.0 * r) * tau
    )
    out = slow - fast
    return out if out.ndim else float(out)


def expectation_conjectured(p: SensorParams, tau: "float | np.ndarray") -> "float | np.ndarray":
    """The unadjusted guess exp(-3 gamma_err tau) cos(3 omega tau)."""
    tau = np.asarray(tau, dtype=float)
    out = np.exp(-3.0 * p.gamma_err * tau) * np.cos(3.0 * p.omega * tau)
    return out if out.ndim else float(out)


def expectation_uncorrected(
    p: SensorParams, tau: "float | np.ndarray", reduced: bool = False
) -> "float | np.ndarray":
    """Exact signal of the sensor without correction (gamma_qec ignored).

    Solves the same coherence system at G = 0 with the conjugate mixing
    retained, valid for gamma_err < omega:

        <sigma_x^L> = (w^2/Du) e^{-3 g tau} cos(3 sqrt(Du) tau)
                      - (g^2/Du^{3/2}) e^{-3 g tau}
                        [sqrt(Du) cos^3(sqrt(Du) tau) - g sin^3(sqrt(Du) tau)]

    with Du = w^2 - g^2. The ``reduced`` variant keeps only the leading
    damped cosine at the shifted frequency w_err = w (1 - g^2 / (2 w^2)).
    """
    w, g = p.omega, p.gamma_err
    if g >= abs(w):
        raise ValueError("the uncorrected solution requires gamma_err < omega")
    tau = np.asarray(tau, dtype=float)
    if reduced:
        w_err = w * (1.0 - 0.5 * g * g / (w * w))
        out = np.exp(-3.0 * g * tau) * np.cos(3.0 * w_err * tau)
        return out if out.ndim else float(out)
    Du = w * w - g * g
    root = np.sqrt(Du)
    envelope = np.exp(-3.0 * g * tau)
    main = (w * w / Du) * envelope * np.cos(3.0 * root * tau)
    cubic = (g * g / Du**1.5) * envelope * (
        root * np.cos(root * tau) ** 3 - g * np.sin(root * tau) ** 3
    )
    out = main - cubic
    return out if out.ndim else float(out)


def full_trace(p: SensorParams, taus: np.ndarray) -> ExpectationTrace:
    return ExpectationTrace(
        taus=taus, values=expectation_full(p, taus), provenance="analytic_full", params=p
    )


def conjectured_trace(p: SensorParams, taus: np.ndarray) -> ExpectationTrace:
    return ExpectationTrace(
        taus=taus, values=expectation_conjectured(p, taus), provenance="conjectured", params=p
    )


def uncorrected_trace(p: SensorParams, taus: np.ndarray, reduced: bool = False) -> ExpectationTrace:
    return ExpectationTrace(
        taus=taus,
        values=expectation_uncorrected(p, taus, reduced=reduced),
        provenance="uncorrected",
        params=p,
    )


def effective_trace(ep: EffectiveParams, taus: np.ndarray) -> ExpectationTrace:
    return ExpectationTrace(
        taus=taus, values=expectation_reduced(ep, taus), provenance="analytic_reduced"
    )
