"""Fixed-step integration of the continuous protocols, iteration of the
discrete one, switching-aware stepping, and trajectory metrics.

Integration is the classical 4th-order one-step scheme on a uniform grid.
Topology switches are handled by grid alignment, not event detection: every
switching boundary must land on a grid point, and the digraph active at a
step's start governs the whole step (right continuity).  A run aborts with a
diagnostic as soon as any state magnitude passes 1e12, which catches
inadmissible stepsizes early.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bounds as bnd
from .discrete import DiscreteState, dcdisc_step, make_stepsize, zero_system_matrix
from .graphs import WeightedDigraph, laplacian, spectral_summary
from .protocols import AgentState, AlgorithmParams, dc1_rhs, dc2_rhs, dc3_rhs
from .signals import InputSet, discrete_disagreement_gamma
from .switching import SwitchingSchedule, graph_at

__all__ = [
    "Trajectory",
    "ErrorReport",
    "DivergenceError",
    "integrate",
    "simulate_protocol",
    "simulate_discrete",
    "simulate_zero_system",
    "error_metrics",
    "fit_decay_rate",
    "pi_udot_series",
    "run_scenario",
    "write_trajectory_csv",
    "DIVERGENCE_LIMIT",
]

DIVERGENCE_LIMIT = 1e12
GRID_ALIGN_RTOL = 1e-6


class DivergenceError(RuntimeError):
    """A trajectory left the trust region (non-finite or > 1e12 in magnitude)."""

    def __init__(self, message, t=None, partial=None):
        super().__init__(message)
        self.t = t
        self.partial = partial  # (times, states) accumulated so far


@dataclass(eq=False)
class Trajectory:
    """Uniformly sampled run: states per stored time, the applied (possibly
    clamped) velocity commands, and for masked runs the transmitted payloads."""

    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    avg_u: np.ndarray
    protocol: str
    z: Optional[np.ndarray] = None
    commands: Optional[np.ndarray] = None
    messages_sample: Optional[np.ndarray] = None
    k_index: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def errors(self) -> np.ndarray:
        return self.x - self.avg_u[:, None]


@dataclass(eq=False)
class ErrorReport:
    """Tail tracking metrics of one run."""

    per_agent_sup_error_tail: np.ndarray
    fitted_rate: np.ndarray
    bound_violations: int
    gamma_used: float
    conservation_residual: float
    tail_start: float = 0.0


def _check_alignment(value: float, h: float, what: str):
    steps = value / h
    if abs(steps - round(steps)) > GRID_ALIGN_RTOL * max(1.0, abs(steps)):
        suggestion = value / max(1, math.ceil(steps))
        raise ValueError(
            f"{what} {value} is not a multiple of the step {h}; "
            f"try h = {suggestion:.9g}")


def integrate(rhs, s0, h: float, T: float, events=()):
    """Classical 4th-order fixed-step integration of ds/dt = rhs(t, s, t_step).

    ``t_step`` is the start of the current step so piecewise-constant
    structure (switching topologies) can be held fixed across a step's
    internal stages.  ``events`` lists times that must sit on the grid.
    Returns (times, states, stage1) where stage1[k] = rhs evaluated at the
    stored point k (the applied command).
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    if T < h:
        raise ValueError("horizon T must be at least one step")
    _check_alignment(T, h, "horizon")
    for e in events:
        if 0.0 < e < T:
            _check_alignment(e, h, "switching boundary")

    y = np.asarray(s0, dtype=float).copy()
    steps = int(round(T / h))
    times = np.arange(steps + 1) * h
    out = np.empty((steps + 1,) + y.shape)
    stage1 = np.empty_like(out)
    out[0] = y
    half = 0.5 * h
    sixth = h / 6.0
    for m in range(steps):
        t0 = times[m]
        k1 = rhs(t0, y, t0)
        stage1[m] = k1
        k2 = rhs(t0 + half, y + half * k1, t0)
        k3 = rhs(t0 + half, y + half * k2, t0)
        k4 = rhs(t0 + h, y + h * k3, t0)
        y = y + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        peak = np.max(np.abs(y))
        if not np.isfinite(peak) or peak > DIVERGENCE_LIMIT:
            out[m + 1] = y
            raise DivergenceError(
                f"state magnitude {peak:.3g} at t={times[m + 1]:.6g} exceeds "
                f"{DIVERGENCE_LIMIT:.0e}; the configuration is numerically unstable "
                "(check stepsize and gains)",
                t=float(times[m + 1]),
                partial=(times[: m + 2], out[: m + 2]),
            )
        out[m + 1] = y
    stage1[steps] = rhs(times[steps], y, times[steps])
    return times, out, stage1


def _protocol_rhs(protocol: str, topology, inputs: InputSet, p: AlgorithmParams):
    """Compile the flat RHS for a protocol over a fixed digraph or schedule.
    Returns (rhs(t, y, t_step), has_z, events_fn(T))."""

    def build(lap):
        if protocol == "dc1":
            return dc1_rhs(lap, inputs, p), False
        if protocol == "dc1_sat":
            return dc1_rhs(lap, inputs, p, saturate=True), False
        if protocol == "dc2":
            return dc2_rhs(lap, inputs, p), True
        if protocol == "dc2_sat":
            return dc2_rhs(lap, inputs, p, saturate=True), True
        if protocol == "dc3":
            return dc3_rhs(lap, inputs, p), True
        raise ValueError(f"unknown continuous protocol {protocol!r}")

    if isinstance(topology, WeightedDigraph):
        f, has_z = build(laplacian(topology))
        return (lambda t, y, ts: f(t, y)), has_z, (lambda T: ())
    if isinstance(topology, SwitchingSchedule):
        compiled = [build(laplacian(g)) for g in topology.graphs]
        fns = [c[0] for c in compiled]
        has_z = compiled[0][1]
        sched = topology

        def rhs(t, y, ts):
            return fns[graph_at(sched, ts)](t, y)

        return rhs, has_z, sched.boundaries
    raise TypeError("topology must be a WeightedDigraph or a SwitchingSchedule")


def simulate_protocol(protocol: str, topology, inputs: InputSet, p: AlgorithmParams,
                      state0: AgentState, h: float, T: float) -> Trajectory:
    """Run one continuous protocol and package the stored grid."""
    n = state0.n
    rhs, has_z, events_fn = _protocol_rhs(protocol, topology, inputs, p)
    if has_z and state0.z is None:
        raise ValueError(f"protocol {protocol} needs an initial z state")
    y0 = state0.pack() if has_z else np.concatenate((state0.x, state0.v))
    try:
        times, ys, stage1 = integrate(rhs, y0, h, T, events=events_fn(T))
    except DivergenceError as err:
        if err.partial is not None:
            pt, py = err.partial
            err.partial = _package(protocol, pt, py, n, has_z, inputs, p)
        raise
    return _package(protocol, times, ys, n, has_z, inputs, p, stage1)


def _package(protocol, times, ys, n, has_z, inputs, p, stage1=None) -> Trajectory:
    avg = np.array([inputs.values(float(t)).mean() for t in times])
    traj = Trajectory(
        times=times,
        x=ys[:, :n],
        v=ys[:, n:2 * n],
        avg_u=avg,
        protocol=protocol,
        z=ys[:, 2 * n:] if has_z else None,
        commands=stage1[:, :n] if stage1 is not None else None,
    )
    if protocol == "dc3":
        psi = np.array([p.psi(float(t)) if p.psi is not None else 0.0 for t in times])
        traj.messages_sample = traj.z + psi[:, None]
    return traj


def simulate_discrete(g: WeightedDigraph, inputs: InputSet, p: AlgorithmParams,
                      z0, v0, delta: float, num_steps: int,
                      warn_inadmissible: bool = True) -> Trajectory:
    """Iterate the discrete tracker for num_steps samples of stepsize delta."""
    step = make_stepsize(delta, p.alpha, p.beta, float(g.out_degrees.max()),
                         warn=warn_inadmissible)
    state = DiscreteState.initial(z0, v0, inputs)
    ks = np.arange(num_steps + 1)
    xs = np.empty((num_steps + 1, g.n))
    vs = np.empty_like(xs)
    zs = np.empty_like(xs)
    xs[0], vs[0], zs[0] = state.x_out, state.v, state.z
    for m in range(num_steps):
        state = dcdisc_step(state, g, inputs, p, step)
        peak = max(np.max(np.abs(state.z)), np.max(np.abs(state.v)))
        if not np.isfinite(peak) or peak > DIVERGENCE_LIMIT:
            raise DivergenceError(
                f"discrete state magnitude {peak:.3g} at k={state.k}; stepsize "
                f"{delta} (bound {step.bound:.6g}) is too aggressive",
                t=state.k * delta)
        xs[m + 1], vs[m + 1], zs[m + 1] = state.x_out, state.v, state.z
    times = ks * delta
    avg = np.array([inputs.values(float(t)).mean() for t in times])
    return Trajectory(times=times, x=xs, v=vs, avg_u=avg, protocol="dcdisc",
                      z=zs, k_index=ks, meta={"delta": delta, "bound": step.bound})


def simulate_zero_system(g: WeightedDigraph, alpha: float, beta: float,
                         y0, w0, h: float, T: float):
    """Integrate the homogeneous (y, w) dynamics; y0/w0 may carry a trailing
    batch axis.  Returns (times, y_traj, w_traj)."""
    a_mat = zero_system_matrix(laplacian(g), alpha, beta)
    state0 = np.concatenate((np.asarray(y0, float), np.asarray(w0, float)), axis=0)
    times, ys, _ = integrate(lambda t, y, ts: a_mat @ y, state0, h, T)
    n = g.n
    return times, ys[:, :n], ys[:, n:]


def pi_udot_series(inputs: InputSet, grid) -> tuple[np.ndarray, np.ndarray]:
    """(||Pi_N u_dot(t)|| per grid point, per-agent |u_dot| sup).  One pass
    serves the tracking-bound quadrature and the gamma/mu statistics."""
    grid = np.asarray(grid, dtype=float)
    series = np.empty(grid.size)
    mu = np.zeros(len(inputs))
    for k, t in enumerate(grid):
        du = inputs.derivatives(float(t))
        series[k] = np.linalg.norm(du - du.mean())
        np.maximum(mu, np.abs(du), out=mu)
    return series, mu


def fit_decay_rate(times: np.ndarray, err: np.ndarray,
                   floor: float = 1e-8, start_fraction: float = 0.5) -> float:
    """Log-linear decay-rate fit of |err|, restricted to the window between
    start_fraction * |err(0)| and the floor so neither the initial transient
    nor the numerical noise floor contaminates the slope."""
    e = np.abs(np.asarray(err, dtype=float))
    e0 = e[0]
    if e0 <= 10 * floor:
        return math.nan
    below = np.nonzero(e <= start_fraction * e0)[0]
    if below.size == 0:
        return math.nan
    i0 = below[0]
    dead = np.nonzero(e[i0:] < floor)[0]
    i1 = i0 + dead[0] if dead.size else e.size
    seg_t = times[i0:i1]
    seg_e = e[i0:i1]
    keep = seg_e >= floor
    if keep.sum() < 10:
        return math.nan
    slope = np.polyfit(seg_t[keep], np.log(seg_e[keep]), 1)[0]
    return float(-slope)


def error_metrics(traj: Trajectory, inputs: InputSet, tail_start: float,
                  bound_curve=None, offset: float = 0.0,
                  gamma_used: float = 0.0) -> ErrorReport:
    """Tail sup errors, per-agent decay-rate fits, conservation residual, and
    (when an envelope is supplied) the count of stored points where the
    offset-corrected error escapes it."""
    times = traj.times
    if tail_start >= times[-1]:
        raise ValueError("tail window is empty: tail_start beyond the horizon")
    errors = traj.errors
    tail = times >= tail_start
    sup_tail = np.max(np.abs(errors[tail]), axis=0)
    rates = np.array([fit_decay_rate(times, errors[:, i]) for i in range(traj.n)])
    conservation = float(np.max(np.abs(traj.v.sum(axis=1) - traj.v.sum(axis=1)[0])))
    violations = 0
    if bound_curve is not None:
        # offset is the predicted equilibrium of x - avg(u), so the bounded
        # quantity is the error measured from it.
        shifted = np.max(np.abs(errors - offset), axis=1)
        violations = int(np.sum(shifted > bound_curve.values * (1.0 + 1e-6)))
    return ErrorReport(
        per_agent_sup_error_tail=sup_tail,
        fitted_rate=rates,
        bound_violations=violations,
        gamma_used=gamma_used,
        conservation_residual=conservation,
        tail_start=tail_start,
    )


def run_scenario(cfg):
    """Execute a validated ScenarioConfig: simulate, measure, and attach the
    bound envelopes the protocol/topology combination admits.

    Returns (Trajectory, ErrorReport, curves) where curves maps
    "bound_s"/"bound_tracking" to BoundCurve objects (empty when no envelope
    applies, e.g. switching runs without user-supplied kappa).
    """
    inputs = cfg.build_inputs()
    params = cfg.build_params()
    topology = cfg.build_topology()
    fixed = isinstance(topology, WeightedDigraph)

    if cfg.protocol == "dcdisc":
        num_steps = int(round(cfg.horizon / cfg.delta))
        traj = simulate_discrete(topology, inputs, params, cfg.z0, cfg.v0,
                                 cfg.delta, num_steps)
    else:
        has_z = cfg.protocol in ("dc2", "dc2_sat", "dc3")
        state0 = AgentState(x=cfg.x0, v=cfg.v0,
                            z=(cfg.z0 if has_z else None))
        traj = simulate_protocol(cfg.protocol, topology, inputs, params,
                                 state0, cfg.step, cfg.horizon)

    curves = {}
    gamma = 0.0
    spectral = spectral_summary(topology) if fixed else None
    offset = -float(np.sum(cfg.v0)) / (params.alpha * len(inputs))

    if cfg.protocol == "dcdisc":
        gamma = discrete_disagreement_gamma(inputs, cfg.delta, len(traj.times) - 1)
        ult = (bnd.ultimate_bound(params.beta, spectral.lambda_hat_2, gamma, delta=cfg.delta)
               if spectral.lambda_hat_2 > 0 else None)
    else:
        series, _ = pi_udot_series(inputs, traj.times)
        gamma = float(series.max())
        lam_hat = spectral.lambda_hat_2 if fixed else cfg.lambda_hat_sigma
        if lam_hat is not None and lam_hat <= 0:
            lam_hat = None  # disconnected graph: no envelope applies
        kappa = None if fixed else cfg.kappa
        ult = bnd.ultimate_bound(params.beta, lam_hat, gamma) if lam_hat else None
        attach = cfg.protocol in ("dc1", "dc1_sat") and lam_hat is not None
        if attach:
            u0, du0 = inputs.eval_all(0.0)
            b = bnd.BoundInputs.from_initial(
                cfg.x0, cfg.v0, u0, du0, params.alpha, params.beta,
                lambda_hat_2=spectral.lambda_hat_2 if fixed else lam_hat,
                gamma=gamma,
                kappa=kappa,
                lambda_hat_sigma=None if fixed else lam_hat)
            s_vals = np.array([bnd.transient_bound_s(float(t), b) for t in traj.times])
            curves["bound_s"] = bnd.BoundCurve(grid=traj.times, values=s_vals)
            curves["bound_tracking"] = bnd.tracking_bound_curve(traj.times, b, series)

    if ult is not None:
        curves["bound_ultimate"] = bnd.BoundCurve(
            grid=traj.times, values=np.full(traj.times.shape, ult))

    report = error_metrics(
        traj, inputs, cfg.tail_start,
        bound_curve=curves.get("bound_tracking"), offset=offset,
        gamma_used=gamma)
    traj.meta.update({
        "scenario": cfg.name,
        "seed": cfg.seed,
        "ultimate_bound": ult,
        "lambda_hat_2": spectral.lambda_hat_2 if fixed else None,
        "offset_prediction": offset,
    })
    return traj, report, curves


def write_trajectory_csv(path, traj: Trajectory, curves=None):
    """Uniform CSV dump: t, x1..xN, v1..vN, [z1..zN,] avg, err1..errN
    [, bound_s, bound_tracking, bound_ultimate]; the discrete protocol
    prepends its iteration index k.  Twelve significant digits throughout."""
    curves = curves or {}
    n = traj.n
    cols: list[tuple[str, np.ndarray]] = []
    if traj.k_index is not None:
        cols.append(("k", traj.k_index))
    cols.append(("t", traj.times))
    cols += [(f"x{i + 1}", traj.x[:, i]) for i in range(n)]
    cols += [(f"v{i + 1}", traj.v[:, i]) for i in range(n)]
    if traj.z is not None:
        cols += [(f"z{i + 1}", traj.z[:, i]) for i in range(n)]
    cols.append(("avg", traj.avg_u))
    errs = traj.errors
    cols += [(f"err{i + 1}", errs[:, i]) for i in range(n)]
    for name in ("bound_s", "bound_tracking", "bound_ultimate"):
        if name in curves:
            cols.append((name, curves[name].values))
    header = ",".join(name for name, _ in cols)
    rows = len(traj.times)
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for r in range(rows):
            fh.write(",".join(_fmt(col[r]) for _, col in cols) + "\n")


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")
