"""Acceptance suite: the ten headline behaviors of the package.

Each test pins one end-to-end claim at its stated tolerance; the
per-module suites cover the finer-grained contracts.  Everything here
runs from the public API only.
"""

import math

import numpy as np
import pytest

from qec_sense.closedform import (
    EffectiveParams,
    effective_params,
    expectation_full,
    expectation_full_domega,
    expectation_uncorrected,
    full_trace,
    validity_check,
)
from qec_sense.discrete import (
    CycleSpec,
    biasedness_check,
    binomial_form,
    correction_channel,
    discrete_trace,
    expectation_discrete_normal,
    iterate_cycles,
    noise_channel,
    noise_error_part,
    sensing_channel,
)
from qec_sense.inference import (
    crb_audit,
    min_detectable_signal,
    optimal_sensing_time,
    run_fit_experiment,
)
from qec_sense.lindblad import SensorParams, build_liouvillian, evolve, ramsey_state, ramsey_trace
from qec_sense.qcore import Channel, DensityMatrix
from qec_sense.spectral import effective_frequency_sweep, spectrum

FIG1 = SensorParams(omega=1.0, gamma_err=0.1, gamma_qec=5.0)
FIG3 = SensorParams(omega=1.0, gamma_err=0.2, gamma_qec=16.6)


# 1 -------------------------------------------------------------------------


def test_noiseless_sensor_oscillates_at_three_omega():
    p = SensorParams(omega=1.0, gamma_err=0.0, gamma_qec=0.0)
    taus = np.linspace(0.0, 20.0, 2001)
    trace = ramsey_trace(p, taus)
    assert np.max(np.abs(trace.values - np.cos(3.0 * taus))) < 1e-6


# 2 -------------------------------------------------------------------------


def test_closed_form_tracks_the_simulation_across_correction_rates():
    """Simulation versus closed form stays below 0.2% RMSE.

    The averaging window spans the lifetime of the slowest compared
    signal; the rate grid includes the region where the dropped-coupling
    error peaks, near the validity boundary.
    """
    taus = np.linspace(0.0, 50.0, 2000)
    rates = sorted(set(np.geomspace(1.0, 50.0, 13)) | {3.7, 4.0, 4.3})
    for gamma_qec in rates:
        p = SensorParams(omega=1.0, gamma_err=0.1, gamma_qec=float(gamma_qec))
        deviation = ramsey_trace(p, taus).values - full_trace(p, taus).values
        assert math.sqrt(float(np.mean(deviation**2))) < 0.002, gamma_qec

    bare = SensorParams(omega=1.0, gamma_err=0.1, gamma_qec=0.0)
    deviation = ramsey_trace(bare, taus).values - expectation_uncorrected(bare, taus)
    assert math.sqrt(float(np.mean(deviation**2))) < 0.002


# 3 -------------------------------------------------------------------------


def test_spectral_peak_reproduces_the_predicted_bias():
    taus = np.linspace(0.0, 300.0, 4800)
    peak = spectrum(full_trace(FIG1, taus)).peak_freq
    order3 = 3.0 * effective_params(FIG1, 3).omega_eff
    first_order = 3.0 * effective_params(FIG1, 1).omega_eff
    assert first_order == pytest.approx(2.88)
    assert abs(peak - order3) < 0.01 * order3
    assert abs(peak - first_order) < 0.01 * first_order


# 4 -------------------------------------------------------------------------


def test_bias_curve_has_an_interior_minimum_and_recovers():
    p = SensorParams(omega=1.0, gamma_err=0.1, gamma_qec=1.0)
    rates = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 8.0, 15.0, 30.0, 100.0]
    measured = np.array([w for _, w in effective_frequency_sweep(p, rates)])
    k = int(np.argmin(measured))
    assert 0 < k < len(rates) - 1
    assert measured[k] < measured[0] and measured[k] < measured[-1]
    assert abs(measured[-1] - 1.0) < 0.005


# 5 -------------------------------------------------------------------------


def test_binomial_reduction_and_normal_approximation():
    omega = SensorParams(omega=1.0, gamma_err=0.0, gamma_qec=0.0)
    rho0 = DensityMatrix(ramsey_state())
    for p_noise in (0.01, 0.1, 0.5):
        for w_dt in (0.01, 0.1, 1.0):
            for c in range(1, 21):
                spec = CycleSpec.optimal(c=c, delta_tau=w_dt, p_noise=p_noise)
                direct = iterate_cycles(spec, omega, rho0)
                ideal = DensityMatrix(sensing_channel(omega, spec.tau).apply(ramsey_state()))
                reduced = binomial_form(spec, omega, ideal, verify=True)
                assert np.max(np.abs(reduced.matrix - direct.matrix)) < 1e-10

    spec = CycleSpec.optimal(c=200, delta_tau=0.05, p_noise=0.03)
    exact = discrete_trace(spec, omega, corrected=True)
    approx = expectation_discrete_normal(spec, omega, exact.taus)
    assert np.max(np.abs(approx - exact.values)) < 0.01


# 6 -------------------------------------------------------------------------


def test_biasedness_commutator_condition():
    spec = CycleSpec.optimal(c=1, delta_tau=0.1, p_noise=0.3)
    sensing = sensing_channel(SensorParams(omega=1.0, gamma_err=0.0, gamma_qec=0.0), 0.1)
    identity = Channel(kraus=(np.eye(8, dtype=complex),))
    assert biasedness_check(sensing, identity).commutator_norm < 1e-12

    still = sensing_channel(SensorParams(omega=0.0, gamma_err=0.0, gamma_qec=0.0), 0.1)
    assert biasedness_check(still, noise_error_part(spec)).commutator_norm < 1e-12

    report = biasedness_check(sensing, noise_error_part(spec))
    assert report.commutator_norm > 1e-3
    assert report.is_biased


# 7 -------------------------------------------------------------------------


def test_conjectured_fits_violate_the_cramer_rao_bound():
    """Repeated-fit audit: the too-simple model beats its own bound.

    Ten sensing times at quadrature points of the effective tone, all
    before the decoherence knee.  The conjectured family must fall below
    its Cramer-Rao floor on at least 80% of them; the exact family must
    never do so on the same points.
    """
    n_shots, n_reps = 10_000, 200
    half_period = math.pi / (3.0 * effective_params(FIG3, 3).omega_eff)
    anchors = [(k + 0.5) * half_period for k in (1, 4, 9, 14, 19, 24, 29, 34, 39, 44)]
    outcomes = {"conjectured": [], "proposed_full": []}
    for i, tau in enumerate(anchors):
        for model in outcomes:
            reps = run_fit_experiment(
                FIG3, model, tau, n_shots=n_shots, n_reps=n_reps, seed=1000 + i
            )
            audit = crb_audit(reps, model, FIG3, tau, n_shots)
            outcomes[model].append(audit.violated)
    assert np.mean(outcomes["conjectured"]) >= 0.8
    assert not any(outcomes["proposed_full"])


# 8 -------------------------------------------------------------------------


def test_optimal_sensing_time_consistency():
    tau_opt, k_opt = optimal_sensing_time(1.0, 0.2)
    assert k_opt == 3
    assert tau_opt == pytest.approx(math.pi / 2.0, rel=1e-12)

    taus = np.linspace(0.02, 60.0, 3000)
    step = taus[1] - taus[0]
    aware = EffectiveParams(omega_eff=1.0, gamma_eff=0.2, order=1)
    proposed = min_detectable_signal("proposed_reduced", FIG3, aware, taus, 10_000)
    naive = min_detectable_signal("naive", FIG3, effective_params(FIG3, 3), taus, 10_000)
    argmin_proposed = taus[int(np.argmin(proposed))]
    argmin_naive = taus[int(np.argmin(naive))]
    assert abs(argmin_proposed - tau_opt) <= step
    assert abs(argmin_naive - tau_opt) > step


# 9 -------------------------------------------------------------------------


def test_analytic_frequency_derivative_matches_finite_differences():
    """Analytic d<sigma_x^L>/d omega versus central differences, 0.1% relative.

    Points are drawn inside the validity region; sensing times are
    redrawn when the derivative magnitude sits below 0.5 so the relative
    comparison stays well conditioned.
    """
    rng = np.random.default_rng(12345)
    checked = 0
    while checked < 50:
        p = SensorParams(
            omega=float(rng.uniform(0.5, 2.0)),
            gamma_err=float(rng.uniform(0.02, 0.3)),
            gamma_qec=float(rng.uniform(1.0, 50.0)),
        )
        if not validity_check(p)[0]:
            continue
        analytic = 0.0
        for _ in range(40):
            tau = float(rng.uniform(0.5, 8.0))
            analytic = float(expectation_full_domega(p, tau))
            if abs(analytic) > 0.5:
                break
        else:
            continue
        h = 1e-5 * p.omega
        up = expectation_full(
            SensorParams(omega=p.omega + h, gamma_err=p.gamma_err, gamma_qec=p.gamma_qec), tau
        )
        down = expectation_full(
            SensorParams(omega=p.omega - h, gamma_err=p.gamma_err, gamma_qec=p.gamma_qec), tau
        )
        fd = (up - down) / (2.0 * h)
        assert abs(analytic - fd) < 1e-3 * abs(analytic)
        checked += 1


# 10 ------------------------------------------------------------------------


def test_channels_and_integrations_conserve_trace_and_positivity():
    optimal = CycleSpec.optimal(c=5, delta_tau=0.2, p_noise=0.3)
    realistic = CycleSpec.realistic(c=5, delta_tau=0.2, p=0.05)
    sensor = SensorParams(omega=1.0, gamma_err=0.0, gamma_qec=0.0)
    channels = [
        noise_channel(optimal),
        noise_channel(realistic),
        noise_error_part(optimal),
        noise_error_part(realistic),
        correction_channel(),
        sensing_channel(sensor, 0.2),
    ]
    for channel in channels:
        total = sum(k.conj().T @ k for k in channel.kraus)
        assert np.max(np.abs(total - np.eye(channel.dim))) < 1e-12

    taus = np.linspace(0.01, 20.0, 41)
    for p in (FIG1, FIG3, SensorParams(omega=1.0, gamma_err=0.1, gamma_qec=0.0)):
        states = evolve(build_liouvillian(p), ramsey_state(), taus)
        traces = np.einsum("kii->k", states)
        assert np.max(np.abs(traces - 1.0)) < 1e-8
        for state in states:
            assert float(np.linalg.eigvalsh(state).min()) >= -1e-10
