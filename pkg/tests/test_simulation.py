import dataclasses

import numpy as np
import pytest

from fourtank.exceptions import InvalidInputError, SynthesisError
from fourtank.faults import EffectivenessEstimate, FaultEvent
from fourtank.plant import equilibrium
from fourtank.scenario import scenario_from_dict
from fourtank.simulation import control_law, reconfigure, rk4_step, run
from fourtank.synthesis import assign_poles, eigenvalues, verify_closed_loop


def integrate(params, h, v, dt, horizon):
    for _ in range(int(round(horizon / dt))):
        h, _ = rk4_step(params, h, v, dt)
    return h


class TestRk4:
    def test_equilibrium_fixed_point(self, params):
        h = equilibrium(params, [3, 3])
        for dt in (0.01, 0.1, 1.0):
            out, flags = rk4_step(params, h, [3, 3], dt)
            np.testing.assert_allclose(out, h, atol=1e-10, rtol=0)
            assert not flags.any()

    def test_drain(self, params):
        h = np.array([10.0, 8.0, 5.0, 3.0])
        out, _ = rk4_step(params, h, [0, 0], 0.5)
        assert np.all(out < h)

    def test_convergence(self, params):
        h0 = np.array([10.0, 8.0, 5.0, 3.0])
        a = integrate(params, h0, [4.0, 2.0], 0.01, 10.0)
        b = integrate(params, h0, [4.0, 2.0], 0.005, 10.0)
        assert np.max(np.abs(a - b)) < 1e-8

    def test_fourth_order(self, params):
        h0 = np.array([10.0, 8.0, 5.0, 3.0])
        ref = integrate(params, h0, [4.0, 2.0], 0.0625, 10.0)
        e1 = np.max(np.abs(integrate(params, h0, [4.0, 2.0], 1.0, 10.0) - ref))
        e2 = np.max(np.abs(integrate(params, h0, [4.0, 2.0], 0.5, 10.0) - ref))
        assert 10 < e1 / e2 < 22

    def test_overflow_clamped(self, params):
        out, flags = rk4_step(params, [19.99, 5, 5, 5], [10, 0], 5.0)
        assert out[0] == 20.0 and flags[0]

    def test_empty_clamped(self, params):
        out, _ = rk4_step(params, [0.0001, 5, 0, 0], [0, 0], 10.0)
        assert out[0] >= 0.0

    def test_bad_dt(self, params):
        with pytest.raises(InvalidInputError):
            rk4_step(params, [1, 1, 1, 1], [0, 0], 0.0)


class TestControlLaw:
    def test_zero(self):
        np.testing.assert_array_equal(control_law(np.ones((2, 6)), np.zeros(4), np.zeros(2)), [0, 0])

    def test_hand(self):
        K = np.zeros((2, 6))
        K[0, 0] = K[1, 1] = 1
        np.testing.assert_array_equal(control_law(K, [2, 3, 0, 0], [0, 0]), [-2, -3])


class TestReconfigure:
    def test_no_fault_same_spectrum(self, augmented, design_poles):
        K = reconfigure(augmented, EffectivenessEstimate((1.0, 1.0), 0.0), design_poles)
        np.testing.assert_array_equal(K, assign_poles(augmented.A_aug, augmented.B_aug, design_poles))

    def test_partial_fault(self, augmented, design_poles):
        K_f = reconfigure(augmented, (0.4, 0.4), design_poles)
        B_f = augmented.B_aug @ np.diag([0.4, 0.4])
        assert verify_closed_loop(augmented.A_aug, B_f, K_f, design_poles).max_abs_deviation < 1e-8
        K = assign_poles(augmented.A_aug, augmented.B_aug, design_poles)
        assert verify_closed_loop(augmented.A_aug, B_f, K / 0.4, design_poles).max_abs_deviation < 1e-8

    def test_asymmetric_fault(self, augmented, design_poles):
        K_f = reconfigure(augmented, (0.8, 0.3), design_poles)
        B_f = augmented.B_aug @ np.diag([0.8, 0.3])
        assert verify_closed_loop(augmented.A_aug, B_f, K_f, design_poles).max_abs_deviation < 1e-8

    def test_total_failure(self, augmented, design_poles):
        with pytest.raises(SynthesisError):
            reconfigure(augmented, (0.0, 1.0), design_poles)


def _cfg(**kw):
    return scenario_from_dict({"duration": kw.pop("duration", 500.0), **kw})


class TestRun:
    def test_row_count_and_grid(self, fault_cfg, fault_traces):
        for trace in fault_traces.values():
            assert len(trace) == 5001 == fault_cfg.n_samples
            np.testing.assert_array_equal(trace.t, np.arange(5001) * 0.1)
            assert np.all(np.diff(trace.t) > 0)

    def test_equilibrium_hold(self):
        cfg = _cfg()
        trace = run(cfg)
        h_eq = equilibrium(cfg.plant, (3, 3))
        assert np.max(np.abs(trace.h - h_eq)) < 1e-6

    def test_tracking(self):
        cfg = _cfg(duration=350.0, reference=[{"time": 100.0, "offset": [0.5, 0.5]}])
        trace = run(cfg)
        err = np.abs(trace.r - trace.y)
        assert np.max(err[-1]) < 0.01
        np.testing.assert_allclose(trace.r[-1] - trace.r[0], [0.5, 0.5])

    def test_fault_scenario_timeline(self, fault_traces):
        rc, fx = fault_traces["reconfigurable"], fault_traces["fixed"]
        first = np.argmax(rc.gain_epoch > 0)
        assert rc.t[first] == pytest.approx(201.0, abs=1e-9)
        assert rc.gain_epoch[-1] == 1
        assert np.all(fx.gain_epoch == 0)
        # fixed mode still logs the estimate
        np.testing.assert_array_equal(fx.effectiveness_estimate, rc.effectiveness_estimate)
        assert np.all(rc.effectiveness_true[rc.t >= 200.0 - 1e-9] == 0.4)
        assert np.all(rc.effectiveness_true[rc.t < 200.0 - 1e-9] == 1.0)

    def test_saturation_respected(self, fault_traces):
        for trace in fault_traces.values():
            assert trace.v_absolute.min() >= 0.0 and trace.v_absolute.max() <= 10.0
            v_cmd = 3.0 + trace.u_commanded
            np.testing.assert_array_equal(trace.saturation, (v_cmd < 0) | (v_cmd > 10))

    def test_delivered(self, fault_traces):
        tr = fault_traces["reconfigurable"]
        np.testing.assert_allclose(tr.u_delivered + 3.0, tr.v_absolute * tr.effectiveness_true, atol=1e-12)

    def test_determinism(self, fault_cfg, fault_traces):
        again = run(fault_cfg, "reconfigurable")
        np.testing.assert_array_equal(again.table(), fault_traces["reconfigurable"].table())

    def test_identity_fault_noop(self):
        base = _cfg(duration=300.0, reference=[{"time": 100.0, "offset": [0.5, 0.5]}])
        faulted = dataclasses.replace(base, faults=(FaultEvent(150.0, (1.0, 1.0)),))
        for mode in ("fixed", "reconfigurable"):
            a, b = run(base, mode), run(faulted, mode)
            np.testing.assert_array_equal(a.table(), b.table())

    def test_reconfiguration_restores_spectrum(self, fault_cfg, fault_traces, augmented, design_poles):
        rc = fault_traces["reconfigurable"]
        K_now = np.array(rc.gains[-1]["gain"])
        B_true = augmented.B_aug @ np.diag(rc.effectiveness_true[-1])
        assert verify_closed_loop(augmented.A_aug, B_true, K_now, design_poles).max_abs_deviation < 1e-8

    def test_fixed_mode_displaced_but_stable(self, augmented, design_poles):
        K = assign_poles(augmented.A_aug, augmented.B_aug, design_poles)
        B_true = augmented.B_aug * 0.4
        report = verify_closed_loop(augmented.A_aug, B_true, K, design_poles)
        assert report.max_abs_deviation > 1e-3
        assert np.all(eigenvalues(augmented.A_aug - B_true @ K).real < 0)

    def test_synthesis_failure_keeps_gain(self):
        cfg = _cfg(duration=260.0, faults=[{"time": 200.0, "effectiveness": [0.0, 1.0]}])
        tr = run(cfg, "reconfigurable")
        assert tr.gain_epoch[-1] == 0
        assert [e["kind"] for e in tr.events] == ["synthesis_error"]
        assert len(tr.gains) == 1

    def test_freeze_integrator_option(self, fault_cfg):
        cfg = dataclasses.replace(
            fault_cfg, controller=dataclasses.replace(fault_cfg.controller, freeze_integrator_on_saturation=True)
        )
        tr = run(cfg, "reconfigurable")
        assert tr.v_absolute.max() <= 10.0

    def test_bad_mode(self, fault_cfg):
        with pytest.raises(InvalidInputError):
            run(fault_cfg, "adaptive")

    def test_sample_alignment(self, fault_traces):
        tr = fault_traces["reconfigurable"]
        step_rows = np.nonzero(np.any(np.diff(tr.r, axis=0) != 0, axis=1))[0] + 1
        np.testing.assert_allclose(tr.t[step_rows], [100.0, 350.0], atol=1e-9)
