"""Acceptance suite: one test (or a few closely-related tests) per numbered
criterion, each printing a PASS/FAIL line.  Run with

    pytest tests/test_acceptance.py -v -s

Criterion 5's Case-1 error level is a known infeasibility of the stated
tolerance/horizon pair (see the README's acceptance section for the measured
numbers).  The test asserts the stated requirement anyway and is expected red.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from dacsim.bounds import BoundInputs, transient_bound_s, ultimate_bound
from dacsim.config import load_scenario
from dacsim.discrete import max_stepsize, pdelta_spectrum_check
from dacsim.engine import (
    fit_decay_rate,
    integrate,
    run_scenario,
    simulate_discrete,
    simulate_protocol,
    simulate_zero_system,
)
from dacsim.graphs import is_strongly_connected, is_weight_balanced, topology_preset
from dacsim.protocols import AgentState, AlgorithmParams, ThetaGain
from dacsim.signals import InputSet, disagreement_gamma, make_signal, preset_scenario
from dacsim.switching import validate_admissible
from conftest import (
    case1_schedule,
    case2_schedule,
    random_balanced_strongly_connected,
    random_digraph,
)

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "dacsim" / "scenarios"
RING_LAMBDA2 = 0.5


def report(criterion: str, ok: bool, detail: str = ""):
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}"
    if detail:
        line += f" :: {detail}"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# shared heavy runs
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def ring():
    return topology_preset("fig1a")


@pytest.fixture(scope="module")
def zero_system_runs(ring):
    """20 random homogeneous starts for each regime, integrated in one batch."""
    rng = np.random.default_rng(20240810)
    out = {}
    start = time.perf_counter()
    for label, alpha, beta in (("generic", 1.0, 1.0), ("confluent", 0.5, 1.0)):
        y0 = rng.uniform(-5.0, 5.0, (6, 20))
        w0 = rng.uniform(-5.0, 5.0, (6, 20))
        times, ys, ws = simulate_zero_system(ring, alpha, beta, y0, w0, h=5e-3, T=40.0)
        out[label] = (alpha, beta, y0, w0, times, ys)
    out["runtime"] = time.perf_counter() - start
    return out


@pytest.fixture(scope="module")
def case1_run():
    cfg = load_scenario(SCENARIOS / "case1.json")
    return run_scenario(cfg)


@pytest.fixture(scope="module")
def case2_run():
    cfg = load_scenario(SCENARIOS / "case2.json")
    traj, rep, curves = run_scenario(cfg)
    inputs = preset_scenario("case2")
    gamma = disagreement_gamma(inputs, traj.times).gamma
    return traj, rep, gamma


@pytest.fixture(scope="module")
def saturation_runs(ring):
    inputs = preset_scenario("saturation")
    u0 = inputs.values(0.0)
    theta = ThetaGain.constant(np.ones(6))
    limits = np.full(6, 15.0)
    p2 = AlgorithmParams(alpha=10.0, beta=15.0, theta=theta, sat_limits=limits)
    st2 = AgentState(x=u0.copy(), v=np.zeros(6), z=u0.copy())
    dc2_traj = simulate_protocol("dc2_sat", ring, inputs, p2, st2, h=1e-3, T=40.0)
    p1 = AlgorithmParams(alpha=10.0, beta=15.0, sat_limits=limits)
    st1 = AgentState(x=u0.copy(), v=np.zeros(6))
    dc1_traj = simulate_protocol("dc1_sat", ring, inputs, p1, st1, h=1e-3, T=40.0)
    gamma = disagreement_gamma(inputs, dc2_traj.times).gamma
    return dc2_traj, dc1_traj, gamma


def window_tail_sup(traj, window_start, window_end, fraction=0.25):
    """Sup error over the trailing fraction of one steady input window,
    excluding the next window's jump instant."""
    h = traj.times[1] - traj.times[0]
    lo = int(round((window_end - fraction * (window_end - window_start)) / h))
    hi = int(round(window_end / h))
    return float(np.abs(traj.errors[lo:hi]).max())


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_criterion_01_zero_system_equilibrium(zero_system_runs):
    alpha, beta, y0, w0, times, ys = zero_system_runs["generic"]
    y_lim = -w0.sum(axis=0) / (alpha * 6.0)
    worst = float(np.abs(ys[-1] - y_lim[None, :]).max())
    runtime = zero_system_runs["runtime"]
    report("criterion 1: zero-system equilibrium (20 random starts)",
           worst <= 1e-6 and runtime < 5.0,
           f"max |y(40) - limit| = {worst:.2e}, runtime {runtime:.2f}s")


def test_criterion_02_transient_bound_both_regimes(zero_system_runs):
    worst_ratio = 0.0
    for label in ("generic", "confluent"):
        alpha, beta, y0, w0, times, ys = zero_system_runs[label]
        for b in range(20):
            bi = BoundInputs(alpha=alpha, beta=beta, lambda_hat_2=RING_LAMBDA2,
                             y0_norm=float(np.linalg.norm(y0[:, b])),
                             w0_norm=float(np.linalg.norm(w0[:, b])))
            s_vals = np.array([transient_bound_s(float(t), bi) for t in times])
            shift = w0[:, b].sum() / (alpha * 6.0)
            lhs = np.linalg.norm(ys[:, :, b] + shift, axis=1)
            worst_ratio = max(worst_ratio, float((lhs / np.maximum(s_vals, 1e-300)).max()))
    report("criterion 2: transient envelope dominates (generic + confluent)",
           worst_ratio <= 1.0 + 1e-6, f"worst ||.||/s(t) = {worst_ratio:.6f}")


def test_criterion_03_ultimate_bound_case2_inputs(ring):
    inputs = preset_scenario("case2")
    p = AlgorithmParams(alpha=3.0, beta=10.0)
    st = AgentState(x=np.zeros(6), v=np.zeros(6))
    traj = simulate_protocol("dc1", ring, inputs, p, st, h=1e-3, T=40.0)
    gamma = disagreement_gamma(inputs, traj.times).gamma
    cap = ultimate_bound(10.0, RING_LAMBDA2, gamma) * 1.05
    tail = float(np.abs(traj.errors[traj.times >= 30.0]).max())
    report("criterion 3: steady-state error within gamma/(beta lam2) (+5%)",
           tail <= cap, f"tail sup {tail:.3e} vs allowance {cap:.3e} (gamma={gamma:.3f})")


def test_criterion_04_zero_error_classes():
    static_traj, static_rep, _ = run_scenario(load_scenario(SCENARIOS / "static.json"))
    tail_static = float(static_rep.per_agent_sup_error_tail.max())
    rates_ok = bool(np.all(np.abs(static_rep.fitted_rate - 0.5) <= 0.1))
    sine_traj, sine_rep, _ = run_scenario(load_scenario(SCENARIOS / "offset_sines.json"))
    tail_sines = float(sine_rep.per_agent_sup_error_tail.max())
    report("criterion 4: zero-error input classes",
           tail_static <= 1e-8 and rates_ok and tail_sines <= 1e-6,
           f"static tail {tail_static:.2e}, rates {np.round(static_rep.fitted_rate, 3)}, "
           f"offset-sine tail {tail_sines:.2e}")


def test_criterion_05a_case1_schedule_admissible():
    rep = validate_admissible(case1_schedule(), horizon=40.0)
    report("criterion 5a: Case 1 switching schedule admissible",
           rep.admissible and rep.all_balanced and rep.dwell_ok and rep.recurrent,
           f"windows found: {len(rep.joint_connectivity_intervals)}")


def test_criterion_05b_case1_tail_error(case1_run):
    # Stated requirement: error at/inside the tail window down to 1e-3 by t=40.
    # Known infeasibility: the class-(b) input residual at t=40 (~8e-4) meets
    # an effective switching gain of ~14, leaving ~1.2e-2 regardless of step
    # or initial conditions; the threshold is reached only near t~85.
    traj, rep, _ = case1_run
    tail = float(rep.per_agent_sup_error_tail.max())
    report("criterion 5b: Case 1 tail error <= 1e-3 by t=40",
           tail <= 1e-3, f"tail sup over [38,40] = {tail:.3e}")


def test_criterion_05c_case2_bounded_then_reenters(case2_run):
    traj, rep, gamma = case2_run
    cap = ultimate_bound(10.0, RING_LAMBDA2, gamma) * 1.05
    weak_phase = float(np.abs(traj.errors[traj.times <= 10.0]).max())
    late = np.abs(traj.errors[traj.times >= 30.0]).max()
    report("criterion 5c: Case 2 bounded through weak windows, re-enters bound",
           weak_phase <= 2.0 and late <= cap,
           f"weak-phase sup {weak_phase:.3f}, sup after t=30 {late:.3e} vs {cap:.3e}")


def test_criterion_06i_semi_convergence_sweep():
    rng = np.random.default_rng(61)
    ok_admissible = 0
    ok_double = 0
    for _ in range(200):
        g = random_balanced_strongly_connected(rng, int(rng.integers(2, 9)))
        alpha, beta = rng.uniform(0.3, 3.0, 2)
        bound = max_stepsize(alpha, beta, float(g.out_degrees.max()))
        delta = float(rng.uniform(0.05, 0.9)) * bound
        ok_admissible += pdelta_spectrum_check(g, alpha, beta, delta).semi_convergent
        ok_double += not pdelta_spectrum_check(g, alpha, beta, 2.0 * bound).semi_convergent
    report("criterion 6i: one-step matrix semi-convergent iff stepsize admissible",
           ok_admissible == 200 and ok_double == 200,
           f"{ok_admissible}/200 admissible OK, {ok_double}/200 at 2x bound flagged")


def test_criterion_06ii_sampled_tracking_and_conservation(ring):
    inputs = preset_scenario("sampled_bias", seed=2014)
    p = AlgorithmParams(alpha=1.0, beta=1.0)
    traj = simulate_discrete(ring, inputs, p, np.zeros(6), np.zeros(6),
                             delta=0.5, num_steps=160)
    err = np.abs(traj.errors)
    # samples arrive every 4 iterations; check the last iterate of every
    # hold interval that starts after iteration 40
    hold_ends = [4 * m + 3 for m in range(11, 40)]
    worst_hold = max(float(err[k].max()) for k in hold_ends)
    sums = traj.v.sum(axis=1)
    conservation = float(np.abs(sums - sums[0]).max())
    report("criterion 6ii+6iii: sampled-average tracking and exact conservation",
           worst_hold <= 1e-3 and conservation <= 1e-12,
           f"worst end-of-hold error {worst_hold:.2e}, sum(v) drift {conservation:.1e}")


def test_criterion_07_individual_rates(ring):
    cfg = load_scenario(SCENARIOS / "rate.json")
    traj, rep, _ = run_scenario(cfg)
    slow_ok = abs(rep.fitted_rate[0] - 0.1) <= 0.02
    fast_ok = bool(np.all(np.abs(rep.fitted_rate[1:] - 0.5) <= 0.1))
    # same inputs and x0 through the basic tracker
    inputs = cfg.build_inputs()
    st = AgentState(x=cfg.x0, v=np.zeros(6))
    base = simulate_protocol("dc1", ring, inputs, AlgorithmParams(1.0, 1.0),
                             st, h=cfg.step, T=cfg.horizon)
    tail_mask = base.times >= cfg.tail_start
    base_tail = np.abs(base.errors[tail_mask]).max(axis=0)
    diff = float(np.abs(rep.per_agent_sup_error_tail - base_tail).max())
    report("criterion 7: per-agent motion gains set the rate, not the bound",
           slow_ok and fast_ok and diff <= 1e-6,
           f"rates {np.round(rep.fitted_rate, 3)}, tail gap vs dc1 {diff:.2e}")


def test_criterion_08_saturation_contrast(saturation_runs):
    dc2_traj, dc1_traj, gamma = saturation_runs
    cap = ultimate_bound(15.0, RING_LAMBDA2, gamma)
    windows = [(0.0, 10.0), (10.0, 20.0), (20.0, 30.0), (30.0, 40.0)]
    dc2_cmd_ok = float(np.abs(dc2_traj.commands).max()) <= 15.0
    dc2_tails = [window_tail_sup(dc2_traj, a, b) for a, b in windows]
    dc1_tails = [window_tail_sup(dc1_traj, a, b) for a, b in windows]
    dc2_ok = all(t <= cap for t in dc2_tails)
    dc1_violates = any(t > cap for t in dc1_tails)
    report("criterion 8: clamped motion phase keeps the bound, clamped basic "
           "tracker does not",
           dc2_cmd_ok and dc2_ok and dc1_violates,
           f"cap {cap:.3f}; dc2 window tails {np.round(dc2_tails, 3)}; "
           f"dc1 window tails {np.round(dc1_tails, 1)}")


def test_criterion_09_mask_invariance(ring):
    inputs = preset_scenario("case2")
    theta = ThetaGain.constant(np.ones(6))
    u0 = inputs.values(0.0)
    st = AgentState(x=u0.copy(), v=np.zeros(6), z=u0.copy())
    base = simulate_protocol("dc2", ring, inputs, AlgorithmParams(1.0, 1.0, theta=theta),
                             st, h=1e-3, T=20.0)
    worst_state = 0.0
    worst_payload = 0.0
    for psi in (lambda t: 0.0, math.sin, lambda t: 10.0 + 5.0 * t):
        p = AlgorithmParams(1.0, 1.0, theta=theta, psi=psi)
        traj = simulate_protocol("dc3", ring, inputs, p, st, h=1e-3, T=20.0)
        for a, b in ((traj.x, base.x), (traj.v, base.v), (traj.z, base.z)):
            worst_state = max(worst_state, float(np.abs(a - b).max()))
        psi_t = np.array([psi(float(t)) for t in traj.times])
        gap = np.abs(traj.messages_sample - base.z - psi_t[:, None])
        worst_payload = max(worst_payload, float(gap.max()))
    report("criterion 9: common mask invisible in dynamics, visible on the wire",
           worst_state <= 1e-9 and worst_payload <= 2e-9,
           f"state gap {worst_state:.1e}, payload-minus-mask gap {worst_payload:.1e}")


def test_criterion_10_numerics_and_graph_oracles():
    errs = []
    for h in (0.01, 0.005):
        _, ys, _ = integrate(lambda t, y, ts: -y, np.array([1.0]), h=h, T=1.0)
        errs.append(abs(ys[-1, 0] - math.exp(-1.0)))
    order_ok = errs[0] <= 1e-8 and errs[0] / errs[1] >= 12.0

    rng = np.random.default_rng(4)
    agree = True
    for _ in range(1000):
        n = int(rng.integers(1, 6))
        g = random_digraph(rng, n, p=float(rng.uniform(0.1, 0.9)))
        reach = (g.weights > 0) | np.eye(n, dtype=bool)
        for _ in range(n):
            reach = reach | (reach @ reach)
        if is_strongly_connected(g) != bool(reach.all()):
            agree = False
            break
        balanced_oracle = bool(np.allclose(g.weights.sum(axis=0),
                                           g.weights.sum(axis=1), atol=1e-10))
        if is_weight_balanced(g) != balanced_oracle:
            agree = False
            break
    report("criterion 10: 4th-order integrator and brute-force graph oracles",
           order_ok and agree,
           f"rk error {errs[0]:.2e}, halving ratio {errs[0] / errs[1]:.1f}, "
           f"oracle agreement on 1000 digraphs: {agree}")
