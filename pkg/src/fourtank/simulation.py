"""Sampled-data closed-loop simulation of the faulted four-tank plant.

Per control sample: measure, accumulate the output-error integral, compute
``u = -K [h - h0; z]``, saturate ``v0 + u`` to the pump range, scale by the
true actuator effectiveness, then integrate the nonlinear plant with RK4
sub-steps until the next sample. In ``reconfigurable`` mode the gain is
re-synthesized whenever the FDI estimate changes.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import IntegrationBlowupError, InvalidInputError, SynthesisError
from .faults import HEALTHY, apply_fault, fdi_estimate, true_effectiveness
from .plant import OperatingPoint, _rates, equilibrium, linearize, measure
from .synthesis import DEFAULT_POLICY, assign_poles, augment, controllability_rank

log = logging.getLogger(__name__)

TRACE_COLUMNS = (
    ["t"]
    + [f"h{i}" for i in range(1, 5)]
    + ["y1", "y2", "r1", "r2"]
    + ["u_cmd1", "u_cmd2", "u_del1", "u_del2", "v1", "v2"]
    + ["eff_true1", "eff_true2", "eff_est1", "eff_est2", "gain_epoch"]
    + ["sat1", "sat2"]
    + [f"overflow{i}" for i in range(1, 5)]
)


@dataclass
class ControllerState:
    integral_error: np.ndarray
    gain: np.ndarray
    gain_epoch: int = 0
    last_estimate: tuple = HEALTHY


@dataclass
class SimulationTrace:
    """Uniformly sampled closed-loop record; one row per control sample."""

    t: np.ndarray
    h: np.ndarray
    y: np.ndarray
    r: np.ndarray
    u_commanded: np.ndarray
    u_delivered: np.ndarray
    v_absolute: np.ndarray
    effectiveness_true: np.ndarray
    effectiveness_estimate: np.ndarray
    gain_epoch: np.ndarray
    saturation: np.ndarray
    overflow: np.ndarray
    mode: str = ""
    scenario_digest: str = ""
    gains: list = field(default_factory=list)
    events: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    def table(self):
        """All columns as one float array in ``TRACE_COLUMNS`` order."""
        return np.column_stack(
            [
                self.t, self.h, self.y, self.r, self.u_commanded, self.u_delivered,
                self.v_absolute, self.effectiveness_true, self.effectiveness_estimate,
                self.gain_epoch, self.saturation, self.overflow,
            ]
        ).astype(float)

    @classmethod
    def from_table(cls, data, mode="", scenario_digest=""):
        data = np.asarray(data, dtype=float)
        return cls(
            t=data[:, 0], h=data[:, 1:5], y=data[:, 5:7], r=data[:, 7:9],
            u_commanded=data[:, 9:11], u_delivered=data[:, 11:13], v_absolute=data[:, 13:15],
            effectiveness_true=data[:, 15:17], effectiveness_estimate=data[:, 17:19],
            gain_epoch=data[:, 19].astype(int), saturation=data[:, 20:22].astype(bool),
            overflow=data[:, 22:26].astype(bool), mode=mode, scenario_digest=scenario_digest,
        )

    def summary(self):
        return {
            "mode": self.mode,
            "scenario_digest": self.scenario_digest,
            "samples": len(self),
            "reconfigurations": int(self.gain_epoch[-1]) if len(self) else 0,
            "saturated_samples": [int(n) for n in self.saturation.sum(axis=0)],
            "overflow_samples": [int(n) for n in self.overflow.sum(axis=0)],
            "events": list(self.events),
        }


def rk4_step(params, state, v_delivered, dt):
    """One classical RK4 step; returns (levels, overflow_flags).

    Levels are clamped to [0, tank_height] after the step and a flag is raised
    for every tank that needed clamping at the top.
    """
    if not dt > 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    h = tuple(float(x) for x in np.asarray(state, dtype=float).reshape(4))
    v1, v2 = (float(x) for x in np.asarray(v_delivered, dtype=float).reshape(2))
    out, flags = _rk4(params._kernel_constants(), params.tank_height, h, v1, v2, dt)
    return np.array(out), np.array(flags)


def _rk4(c, height, h, v1, v2, dt):
    h1, h2, h3, h4 = h
    k1 = _rates(c, h1, h2, h3, h4, v1, v2)
    half = 0.5 * dt
    k2 = _rates(c, h1 + half * k1[0], h2 + half * k1[1], h3 + half * k1[2], h4 + half * k1[3], v1, v2)
    k3 = _rates(c, h1 + half * k2[0], h2 + half * k2[1], h3 + half * k2[2], h4 + half * k2[3], v1, v2)
    k4 = _rates(c, h1 + dt * k3[0], h2 + dt * k3[1], h3 + dt * k3[2], h4 + dt * k3[3], v1, v2)
    sixth = dt / 6.0
    new = [
        x + sixth * (a + 2.0 * b + 2.0 * cc + d)
        for x, a, b, cc, d in zip(h, k1, k2, k3, k4)
    ]
    flags = [False] * 4
    for i, x in enumerate(new):
        if not math.isfinite(x):
            raise IntegrationBlowupError(f"non-finite level in tank {i + 1}", state=(h, (v1, v2)))
        if x < 0.0:
            new[i] = 0.0
        elif x > height:
            new[i] = height
            flags[i] = True
    return tuple(new), tuple(flags)


def control_law(gain, x_dev, integral_error):
    return -np.asarray(gain) @ np.concatenate([np.asarray(x_dev, float), np.asarray(integral_error, float)])


def reconfigure(nominal, estimate, poles, policy=DEFAULT_POLICY):
    """Gain for the augmented model with its input matrix scaled by the estimated effectiveness."""
    eff = np.asarray(getattr(estimate, "estimate", estimate), dtype=float)
    B_f = nominal.B_aug @ np.diag(eff)
    n = nominal.A_aug.shape[0]
    rank = controllability_rank(nominal.A_aug, B_f)
    if rank < n:
        raise SynthesisError(
            f"faulted model with effectiveness {tuple(float(x) for x in eff)} is not controllable (rank {rank} < {n})"
        )
    return assign_poles(nominal.A_aug, B_f, poles, policy)


def operating_point(cfg):
    if cfg.op_source == "computed_equilibrium":
        levels = equilibrium(cfg.plant, cfg.op_voltages)
        return OperatingPoint(tuple(levels), cfg.op_voltages)
    return OperatingPoint(cfg.op_levels, cfg.op_voltages)


def initial_levels(cfg, op):
    if cfg.init_source == "explicit":
        return np.array(cfg.init_levels, dtype=float)
    if cfg.init_source == "operating_point":
        return np.array(op.levels0, dtype=float)
    return equilibrium(cfg.plant, op.voltages0)


def nominal_design(cfg):
    """(operating point, linear model, augmented model, pole set, nominal gain) for a scenario."""
    op = operating_point(cfg)
    lin = linearize(cfg.plant, op)
    aug = augment(lin)
    poles = cfg.controller.pole_set(aug.A_aug.shape[0])
    K = assign_poles(aug.A_aug, aug.B_aug, poles, cfg.controller.policy)
    return op, lin, aug, poles, K


def _reference_offset(steps, t):
    offset = (0.0, 0.0)
    for step in steps:
        if t + 1e-9 >= step.time:
            offset = step.offset
        else:
            break
    return offset


def _bumpless_integral(K, x_dev):
    # choose the integral state so that the first command equals v0
    K_x, K_z = K[:, :4], K[:, 4:]
    try:
        return np.linalg.solve(K_z, -K_x @ x_dev)
    except np.linalg.LinAlgError:
        return np.zeros(K_z.shape[1])


def run(cfg, mode=None):
    """Simulate ``cfg``; ``mode`` overrides ``cfg.controller.mode`` when given."""
    mode = mode or cfg.controller.mode
    if mode not in ("fixed", "reconfigurable"):
        raise InvalidInputError(f"unknown controller mode {mode!r}")
    params = cfg.plant
    op, _, aug, poles, K = nominal_design(cfg)
    h0 = np.array(op.levels0)
    v0 = np.array(op.voltages0)
    v_min, v_max = params.pump_voltage_range
    Ts, dt, nsub = cfg.control_period, cfg.plant_dt, cfg.substeps
    n = cfg.n_samples

    h = initial_levels(cfg, op)
    y_init = measure(params, h)
    ctl = ControllerState(_bumpless_integral(K, h - h0), K)

    t_col = np.arange(n) * Ts
    cols = {
        name: np.zeros((n, width))
        for name, width in (("h", 4), ("y", 2), ("r", 2), ("u_cmd", 2), ("u_del", 2),
                            ("v", 2), ("eff", 2), ("est", 2))
    }
    epochs = np.zeros(n, dtype=int)
    sat = np.zeros((n, 2), dtype=bool)
    overflow = np.zeros((n, 4), dtype=bool)
    gains = [{"t": 0.0, "epoch": 0, "gain": K.tolist()}]
    events = []
    kernel = params._kernel_constants()
    state = tuple(float(x) for x in h)
    pending_overflow = (False,) * 4
    saturated = np.zeros(2, dtype=bool)

    for k in range(n):
        t = t_col[k]
        h = np.array(state)
        y = measure(params, h)
        r = y_init + np.asarray(_reference_offset(cfg.reference, t))
        e = r - y

        est = fdi_estimate(cfg.faults, t, cfg.fdi).estimate
        if mode == "reconfigurable" and est != ctl.last_estimate:
            try:
                ctl.gain = reconfigure(aug, est, poles, cfg.controller.policy)
                ctl.gain_epoch += 1
                gains.append({"t": float(t), "epoch": ctl.gain_epoch, "gain": ctl.gain.tolist()})
                events.append({"t": float(t), "kind": "reconfigured", "estimate": list(est)})
            except SynthesisError as exc:
                log.warning("reconfiguration at t=%.3f s failed, keeping previous gain: %s", t, exc)
                events.append({"t": float(t), "kind": "synthesis_error", "estimate": list(est),
                               "message": str(exc)})
            ctl.last_estimate = est

        if not (cfg.controller.freeze_integrator_on_saturation and saturated.any()):
            ctl.integral_error = ctl.integral_error + e * Ts
        u = control_law(ctl.gain, h - h0, ctl.integral_error)
        v_cmd = v0 + u
        v_sat = np.clip(v_cmd, v_min, v_max)
        saturated = v_sat != v_cmd
        eff = true_effectiveness(cfg.faults, t)
        v_del = apply_fault(v_sat, eff)

        cols["h"][k] = h
        cols["y"][k] = y
        cols["r"][k] = r
        cols["u_cmd"][k] = u
        cols["u_del"][k] = v_del - v0
        cols["v"][k] = v_sat
        cols["eff"][k] = eff
        cols["est"][k] = est
        epochs[k] = ctl.gain_epoch
        sat[k] = saturated
        overflow[k] = pending_overflow

        if k == n - 1:
            break
        v1, v2 = float(v_del[0]), float(v_del[1])
        flags = [False] * 4
        for _ in range(nsub):
            state, f = _rk4(kernel, params.tank_height, state, v1, v2, dt)
            flags = [a or b for a, b in zip(flags, f)]
        pending_overflow = tuple(flags)

    return SimulationTrace(
        t=t_col, h=cols["h"], y=cols["y"], r=cols["r"], u_commanded=cols["u_cmd"],
        u_delivered=cols["u_del"], v_absolute=cols["v"], effectiveness_true=cols["eff"],
        effectiveness_estimate=cols["est"], gain_epoch=epochs, saturation=sat, overflow=overflow,
        mode=mode, scenario_digest=cfg.digest(), gains=gains, events=events,
    )
