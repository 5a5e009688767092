import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from ioncool import paper_scenario
from ioncool.atom import SteadyState, barium_model, steady_state, two_level_model
from ioncool.cooling import (
    COOLING,
    HEATING,
    NO_COOLING,
    ModeSelection,
    cooling_report,
    diffusion_rate,
    fluctuation_spectrum,
    fluctuation_spectrum_oracle,
    force_operator,
    master_equation_generator,
    phonon_trajectory,
)
from ioncool.errors import ConfigError, SingularResolventError

TWO_PI = 2 * math.pi
GAMMA = TWO_PI * 10e6  # half width of the two-level test atom, rad/s
ALPHA_PI = 1 / 5


def _two_level_rates(c, delta, eta, recoil, omega):
    """Weak-drive analytic A+- for H = delta |g><g| + c sigma_x, decay 2 GAMMA."""

    def re_s(w):
        return c**2 * eta**2 * GAMMA / (GAMMA**2 + (w + delta) ** 2)

    pe = c**2 / (GAMMA**2 + delta**2 + 2 * c**2)
    d = 0.5 * 2 * GAMMA * ALPHA_PI * recoil * pe
    return 2 * (re_s(-omega) + d), 2 * (re_s(omega) + d)


def _mode(omega, eta=0.05, recoil=0.01):
    return ModeSelection("t", omega, {"493": eta}, {"493": recoil})


@pytest.mark.parametrize("delta", [-1.0, -0.3, 0.5])
def test_two_level_spectrum_matches_weak_drive_formula(delta):
    c = 0.005 * GAMMA
    model = two_level_model(c, delta * GAMMA, 2 * GAMMA)
    ss = steady_state(model)
    mode = _mode(TWO_PI * 1e6)
    for w in (mode.omega, -mode.omega):
        num = fluctuation_spectrum(model, ss, mode, w).real
        ana = c**2 * 0.05**2 * GAMMA / (GAMMA**2 + (w + delta * GAMMA) ** 2)
        assert num == pytest.approx(ana, rel=1e-3)


@pytest.mark.parametrize("nu", [0.2e6, 1e6, 3e6])
def test_two_level_doppler_limit(nu):
    c, delta = 0.005 * GAMMA, -GAMMA
    model = two_level_model(c, delta, 2 * GAMMA)
    mode = _mode(TWO_PI * nu)
    rep = cooling_report(model, mode)
    ap, am = _two_level_rates(c, delta, 0.05, 0.01, mode.omega)
    assert rep.status == COOLING
    assert rep.a_plus == pytest.approx(ap, rel=0.01)
    assert rep.a_minus == pytest.approx(am, rel=0.01)
    assert rep.nbar == pytest.approx(ap / (am - ap), rel=0.01)


def test_doppler_limit_small_trap_frequency():
    # omega << gamma at delta = -gamma: nbar -> gamma/(2 omega) (1 + alpha recoil / eta^2)
    c, delta, eta, recoil = 0.005 * GAMMA, -GAMMA, 0.05, 0.01
    model = two_level_model(c, delta, 2 * GAMMA)
    mode = _mode(TWO_PI * 0.05e6, eta, recoil)
    rep = cooling_report(model, mode)
    doppler = GAMMA / (2 * mode.omega) * (1 + ALPHA_PI * recoil / eta**2)
    assert rep.nbar == pytest.approx(doppler, rel=0.01)


def test_zero_lamb_dicke_gives_zero_rates(fitted):
    mode = fitted.mode_selection("y~").scaled(0.0)
    rep = cooling_report(fitted.model(), mode)
    assert rep.a_plus == rep.a_minus == 0.0
    assert rep.status == NO_COOLING
    assert rep.nbar is None


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 20.0), st.sampled_from(["x~", "y~", "z~", "X"]), st.floats(-60, -1))
def test_eta_scaling_law(c, label, d650):
    scn = paper_scenario(detuning_650=d650 * 1e6)
    model = scn.model()
    ss = steady_state(model)
    mode = scn.mode_selection(label)
    a = cooling_report(model, mode, ss=ss)
    b = cooling_report(model, mode.scaled(c), ss=ss)
    assert b.a_plus == pytest.approx(c**2 * a.a_plus, rel=1e-12)
    assert b.a_minus == pytest.approx(c**2 * a.a_minus, rel=1e-12)
    assert b.cooling_rate == pytest.approx(c**2 * a.cooling_rate, rel=1e-9, abs=1e-12 * c**2 * a.a_plus)
    if a.nbar is not None:
        assert b.nbar == pytest.approx(a.nbar, rel=1e-9)


def test_spectrum_decays_at_large_frequency(fitted):
    model, mode = fitted.model(), fitted.mode_selection("y~")
    ss = steady_state(model)
    gamma = model.total_decay / 2
    near = max(abs(fluctuation_spectrum(model, ss, mode, s * mode.omega).real) for s in (1, -1))
    far = [abs(fluctuation_spectrum(model, ss, mode, s * 100 * gamma).real) for s in (1, -1)]
    farther = [abs(fluctuation_spectrum(model, ss, mode, s * 200 * gamma).real) for s in (1, -1)]
    assert max(far) < 1e-2 * near
    assert all(b < a for a, b in zip(far, farther))


@pytest.mark.parametrize("d650", [-60e6, -45e6, -20e6, 0.0])
def test_diffusion_is_a_correction(d650):
    scn = paper_scenario(detuning_650=d650)
    rep = scn.report("y~")
    assert 0 < rep.diffusion < max(rep.s_plus, rep.s_minus)


def test_diffusion_formula_by_hand(fitted):
    model, mode = fitted.model(), fitted.mode_selection("y~")
    ss = steady_state(model)
    total = 0.0
    for d in model.decays:
        alpha = 0.2 if d.character == "pi" else 0.4
        total += 0.5 * d.rate * alpha * mode.recoil[d.transition] * ss.rho[d.upper, d.upper].real
    assert diffusion_rate(model, ss, mode) == pytest.approx(total, rel=1e-14)


def test_force_operator_is_hermitian(fitted):
    f = force_operator(fitted.model(), fitted.mode_selection("x~"))
    assert np.abs(f - f.conj().T).max() < 1e-12 * np.abs(f).max()


def test_master_equation_generator_matches_assembly(rng):
    for _ in range(3):
        model = barium_model(
            rabi_493=rng.uniform(1, 60) * 1e6,
            rabi_650=rng.uniform(1, 60) * 1e6,
            detuning_493=rng.uniform(-50, 0) * 1e6,
            detuning_650=rng.uniform(-50, 20) * 1e6,
            linewidth=rng.uniform(0, 2) * 1e6,
        )
        lv = model.liouvillian
        assert np.abs(master_equation_generator(model) - lv).max() <= 1e-12 * np.abs(lv).max()


def _random_model(rng):
    return barium_model(
        rabi_493=rng.uniform(5, 40) * 1e6,
        rabi_650=rng.uniform(5, 40) * 1e6,
        detuning_493=rng.uniform(-30, -5) * 1e6,
        detuning_650=rng.uniform(-30, 10) * 1e6,
        larmor=rng.uniform(2, 8) * 1e6,
        linewidth=rng.uniform(0.5, 3) * 1e6,
    )


def _time_scales(model, omega):
    ev = np.linalg.eigvals(model.liouvillian)
    nz = ev[np.abs(ev) > 1e-6 * np.abs(ev).max()]
    return np.min(-nz.real), np.max(np.abs(ev)) + abs(omega)


def test_resolvent_matches_regression_integration(rng):
    for _ in range(3):
        model = _random_model(rng)
        ss = steady_state(model)
        mode = ModeSelection("t", TWO_PI * rng.uniform(0.2, 2) * 1e6, {"493": 0.05, "650": 0.04},
                             {"493": 0.003, "650": 0.002})
        slow, fast = _time_scales(model, mode.omega)
        for w in (mode.omega, -mode.omega):
            a = fluctuation_spectrum(model, ss, mode, w)
            b = fluctuation_spectrum_oracle(model, ss, mode, w, 30 / slow, 0.1 / fast)
            assert abs(a - b) <= 1e-6 * abs(a)


def test_resolvent_matches_sampled_correlation(rng):
    """Trapezoidal quadrature of the correlation sampled with exact propagators."""
    model = _random_model(rng)
    ss = steady_state(model)
    mode = ModeSelection("t", TWO_PI * 1e6, {"493": 0.05, "650": 0.04}, {"493": 0.003, "650": 0.002})
    slow, fast = _time_scales(model, mode.omega)
    f = force_operator(model, mode)
    n = model.dim
    b0 = f @ ss.rho - np.trace(f @ ss.rho) * ss.rho
    dt = 0.02 / fast
    steps = int(30 / slow / dt)
    prop = expm(model.liouvillian * dt)
    vec = b0.reshape(-1)
    vals = np.empty(steps + 1, complex)
    for k in range(steps + 1):
        vals[k] = np.trace(f @ vec.reshape(n, n))
        vec = prop @ vec
    t = dt * np.arange(steps + 1)
    for w in (mode.omega, -mode.omega):
        integrand = np.exp(1j * w * t) * vals
        quad = dt * (integrand.sum() - 0.5 * (integrand[0] + integrand[-1]))
        ref = fluctuation_spectrum(model, ss, mode, w)
        assert abs(quad - ref) <= 1e-3 * abs(ref)


def test_oracle_with_zero_coupling_is_zero(fitted):
    model = fitted.model()
    ss = steady_state(model)
    mode = fitted.mode_selection("y~").scaled(0.0)
    assert fluctuation_spectrum_oracle(model, ss, mode, mode.omega, 1e-6, 1e-9) == 0


def test_singular_resolvent_is_reported():
    model = two_level_model(TWO_PI * 5e6, 0.0, 1e-5)
    ss = steady_state(model, check_unique=False, tol=1e-6)
    w = np.abs(np.linalg.eigvals(model.liouvillian).imag).max()
    with pytest.raises(SingularResolventError) as info:
        fluctuation_spectrum(model, ss, _mode(w), w)
    assert abs(abs(info.value.eigenvalue.imag) - w) < 1e-6 * w


def test_undamped_coherence_is_regularized():
    # without 650 light the D Zeeman coherences never decay
    model = barium_model(rabi_650=0.0, larmor=5e6)
    rho = np.zeros((8, 8), complex)
    rho[4, 4] = 1
    mode = ModeSelection("t", TWO_PI * 5e6 * 0.8, {"493": 0.05, "650": 0.04}, {"493": 0.01, "650": 0.01})
    info = {}
    s = fluctuation_spectrum(model, SteadyState(rho, 0.0), mode, mode.omega, info)
    assert info["regularized"] == pytest.approx(1e-6 * model.min_decay)
    assert np.isfinite(s)


def test_all_lasers_off_reports_no_cooling(fitted):
    scn = fitted.with_params(rabi_493=0.0, rabi_650=0.0)
    rep = scn.report("x~")
    assert rep.status == NO_COOLING
    assert rep.nbar is None
    assert rep.phase == "undetermined"


def test_report_fields(fitted):
    rep = fitted.with_params(detuning_650=-30e6).report("y~")
    assert rep.status == COOLING
    assert rep.cooling_rate == pytest.approx(rep.a_minus - rep.a_plus)
    assert rep.a_plus_total == 2 * rep.a_plus
    assert rep.cooling_rate_total == pytest.approx(2 * rep.cooling_rate)
    assert rep.energy == pytest.approx(1.054571817e-34 * rep.omega * rep.nbar, rel=1e-8)
    assert rep.energy_with_zero_point > rep.energy
    assert rep.phase in ("localized", "ring", "sphere")
    d = rep.as_dict()
    for key in ("S_minus", "S_plus", "D", "A_plus", "A_minus", "W", "nbar", "E_ex", "phase"):
        assert key in d


def test_heating_report_omits_nbar(fitted):
    rep = fitted.with_params(detuning_650=-59e6).report("y~")
    assert rep.status == HEATING
    assert rep.nbar is None and rep.energy is None
    assert rep.phase == "unbounded_heating"


def test_mode_selection_validation():
    with pytest.raises(ConfigError):
        ModeSelection("t", 0.0, {"493": 0.1})
    with pytest.raises(ConfigError):
        ModeSelection("t", 1.0, {"493": math.nan})
    with pytest.raises(ConfigError):
        ModeSelection("t", 1.0, {"493": 0.1}, {"493": 0.0})


def test_per_ion_normalization(fitted):
    one = fitted.mode_selection("x~")
    mode = fitted.modes["x~"]
    assert one.couplings["493"] == pytest.approx(mode.lamb_dicke["493"] / math.sqrt(2))


@pytest.mark.parametrize("n0", [0.0, 5.0, 200.0])
def test_phonon_trajectory_matches_ode(fitted, n0):
    rep = fitted.with_params(detuning_650=-30e6).report("y~")
    times = np.linspace(0, 5 / rep.cooling_rate, 40)
    sol = solve_ivp(lambda t, n: -rep.cooling_rate * n + rep.a_plus, (0, times[-1]), [n0], t_eval=times,
                    rtol=1e-10, atol=1e-12)
    assert np.allclose(phonon_trajectory(rep, n0, times), sol.y[0], rtol=1e-6, atol=1e-8)


def test_phonon_trajectory_heating_grows(fitted):
    rep = fitted.with_params(detuning_650=-59e6).report("y~")
    n = phonon_trajectory(rep, 1.0, np.linspace(0, 1e-2, 5))
    assert np.all(np.diff(n) > 0)
    with pytest.raises(ValueError):
        phonon_trajectory(rep, -1.0, [0.0])
