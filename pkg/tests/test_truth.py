import numpy as np
import pytest

from interval_dsse.errors import DivergenceError, UsageError
from interval_dsse.estimator import StateIndex, build_jacobian
from interval_dsse.measurements import plan_rows, point_values
from interval_dsse.network import load_bundled, load_feeder
from interval_dsse.truth import (
    ErrorSpec,
    Placements,
    bus_voltage_truth,
    forward_voltage_check,
    solve_power_flow,
    synthesize_measurements,
)


def two_bus(p_kw=100.0, q_kvar=50.0):
    return load_feeder({
        "base_kV": 1.0, "base_MVA": 3.0, "slack": "1", "impedance_units": "pu",
        "buses": [{"id": "1", "phases": "A"}, {"id": "2", "phases": "A", "load": {"A": [p_kw, q_kvar]}}],
        "branches": [{"id": "1-2", "from": "1", "to": "2", "phases": "A", "r": [[0.01]], "x": [[0.02]]}],
    })


def test_zero_load_gives_flat_profile():
    f = load_bundled("ieee13")
    buses = [type(b)(b.id, b.phases, {}) for b in f.buses]
    g = load_feeder({**f.to_document("pu"), "buses": [
        {"id": b.id, "phases": "".join(b.phases)} for b in buses], "dg": []})
    t = solve_power_flow(g, v_slack=1.0)
    assert np.all(t.I == 0)
    for (bus, ph), v in bus_voltage_truth(t).items():
        assert v == pytest.approx(t.v_slack[ph], abs=1e-15)


def test_two_bus_matches_hand_iteration():
    # independent fixed point V2 = 1 - z * conj(S / V2), S = 0.1 + 0.05j p.u.
    z, s, v = 0.01 + 0.02j, 0.1 + 0.05j, 1.0 + 0j
    for _ in range(200):
        v = 1.0 - z * np.conj(s / v)
    t = solve_power_flow(two_bus(), v_slack=1.0)
    assert abs(t.voltage("2", "A") - v) < 1e-8
    assert t.kcl_residual() < 1e-8


def test_ieee13_profile_within_limits():
    # regulator omitted in the bundled conversion: the far end sits at 0.947 p.u.
    t = solve_power_flow(load_bundled("ieee13"), v_slack=1.05)
    mags = [abs(v) for v in bus_voltage_truth(t).values()]
    assert 0.945 <= min(mags) and max(mags) <= 1.05 + 1e-12
    assert t.kcl_residual() < 1e-8
    assert forward_voltage_check(t) < 1e-8


def test_ieee123_converges():
    t = solve_power_flow(load_bundled("ieee123"), v_slack=1.0)
    assert t.kcl_residual() < 1e-8
    assert forward_voltage_check(t) < 1e-8


def test_divergence_on_infeasible_load():
    with pytest.raises(DivergenceError):
        solve_power_flow(two_bus(p_kw=2e5, q_kvar=1e5))


def test_dg_output_outside_interval():
    f = load_bundled("ieee13")
    with pytest.raises(UsageError):
        solve_power_flow(f, {"PV675": 500.0}, v_slack=1.05)


# -- synthesis ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def truth13():
    return solve_power_flow(load_bundled("ieee13"), v_slack=1.05)


def test_zero_spec_reproduces_truth(truth13):
    ms = synthesize_measurements(truth13, spec=ErrorSpec.zero(), seed=3)
    for m in ms.of_kind("pmuV"):
        v = truth13.voltage(m.element, m.phase)
        assert m.value == (v.real, v.imag)
    for m in ms.of_kind("scadaFlow"):
        s = truth13.flow_power(m.element, m.phase)
        assert m.value == (s.real, s.imag)


def test_pmu_sigma_example():
    spec = ErrorSpec()
    assert spec.pmu_mag_sigma(1.0) == pytest.approx(0.007 / 3)
    assert spec.pmu_mag_sigma(1.0) == pytest.approx(0.002333, abs=1e-6)


def test_same_seed_is_bit_identical(truth13):
    a = synthesize_measurements(truth13, seed=11)
    b = synthesize_measurements(truth13, seed=11)
    c = synthesize_measurements(truth13, seed=12)
    assert a == b
    assert a != c


def test_channels_are_order_independent(truth13):
    pl = Placements(("650", "671"), ("632-633",))
    rev = Placements(("671", "650"), ("632-633",))
    a = {(m.kind, m.element, m.phase): m.value for m in synthesize_measurements(truth13, pl, seed=5).entries}
    b = {(m.kind, m.element, m.phase): m.value for m in synthesize_measurements(truth13, rev, seed=5).entries}
    assert a == b


def test_absent_phase_placement_fails(truth13):
    ms = synthesize_measurements(truth13, seed=0)
    bad = ms.replace_entries(ms.entries + (type(ms.entries[0])("pmuV", "652", "B", (1.0, 0.0), (0.01, 0.01)),))
    with pytest.raises(UsageError):
        bad.validate_against(truth13.feeder)


def test_noise_sigma_empirics():
    t = solve_power_flow(two_bus(), v_slack=1.0)
    spec = ErrorSpec(scada_power_maxpct=2.0)
    pl = Placements((), ("1-2",))
    s_true = t.flow_power("1-2", "A")
    draws = np.array([synthesize_measurements(t, pl, spec, seed=k).of_kind("scadaFlow")[0].value[0]
                      for k in range(10000)])
    sigma = 0.02 / 3 * abs(s_true.real)
    assert abs(draws.std() / sigma - 1.0) < 0.05
    assert abs(draws.mean() - s_true.real) < 4 * sigma / 100


def test_truncation_bounds_noise(truth13):
    for seed in range(20):
        ms = synthesize_measurements(truth13, seed=seed, truncate=True)
        for m in ms.of_kind("scadaFlow"):
            s = truth13.flow_power(m.element, m.phase)
            assert abs(m.value[0] - s.real) <= 3 * m.sigma[0] + 1e-15
            assert abs(m.value[1] - s.imag) <= 3 * m.sigma[1] + 1e-15


def test_truth_satisfies_linear_model_at_true_voltages(truth13):
    # h(x_true) reproduces zero-noise measurements when currents use the true voltages
    ms = synthesize_measurements(truth13, spec=ErrorSpec.zero(), seed=0,
                                 dg_override=truth13.dg_output_kw)
    plan = plan_rows(ms, sigma_required=False)
    js = build_jacobian(truth13.feeder, plan, StateIndex(truth13.feeder))
    x = truth13.state_vector(js.index)
    z = point_values(plan, voltages=bus_voltage_truth(truth13))
    assert np.max(np.abs(js.H_mid @ x - z)) < 1e-6
