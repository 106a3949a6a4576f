"""Per-agent reference inputs u^i(t), their derivatives, and the input
statistics (disagreement gamma, per-agent derivative sup) that feed the
error bounds.

Signals are small kind+params records compiled to scalar closures at
construction.  Piecewise signals evaluate right-continuously at breakpoints
and report the right-hand derivative there, matching the switching-signal
convention used elsewhere in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "InputSignal",
    "InputSet",
    "SignalStats",
    "make_signal",
    "signal_from_json",
    "signal_to_json",
    "eval_input",
    "network_average",
    "disagreement_gamma",
    "discrete_disagreement_gamma",
    "preset_scenario",
    "SCENARIO_PRESETS",
]

SIGNAL_KINDS = (
    "constant",
    "linear",
    "sine",
    "cosine",
    "atan",
    "tanh",
    "reciprocal-power",
    "exponential-decay",
    "step-modulated-composite",
    "sampled-piecewise-constant",
    "sum-of-terms",
)

# Bias terms of the six monitoring agents in the sampled-process preset.
SAMPLED_BIASES = (-0.55, 1.0, 0.6, -0.9, -0.6, 0.4)


@dataclass
class InputSignal:
    """One reference input: a signal kind, its parameters, and how the
    derivative is produced (closed form, or central differences with step h_d).
    """

    kind: str
    params: dict
    derivative_mode: str = "analytic"
    h_d: float = 1e-6
    _vfn: object = field(default=None, repr=False, compare=False)
    _dfn: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if self.derivative_mode not in ("analytic", "central_difference"):
            raise ValueError(f"unknown derivative mode {self.derivative_mode!r}")
        if self.h_d <= 0:
            raise ValueError("central-difference step h_d must be positive")
        self._vfn, self._dfn = _compile(self.kind, self.params)

    def value(self, t: float) -> float:
        return self._vfn(t)

    def derivative(self, t: float) -> float:
        if self.derivative_mode == "analytic":
            return self._dfn(t)
        h = self.h_d
        lo = max(t - h, 0.0)
        return (self._vfn(t + h) - self._vfn(lo)) / (t + h - lo)


def make_signal(kind: str, derivative_mode: str = "analytic", h_d: float = 1e-6, **params) -> InputSignal:
    return InputSignal(kind=kind, params=params, derivative_mode=derivative_mode, h_d=h_d)


def _compile(kind, params):
    """Build (value, derivative) closures for a signal record."""
    p = dict(params)

    def need(*names):
        missing = [n for n in names if n not in p]
        if missing:
            raise ValueError(f"signal kind {kind!r} is missing parameter(s) {missing}")
        return [float(p[n]) for n in names]

    if kind == "constant":
        (c,) = need("value")
        return (lambda t: c), (lambda t: 0.0)

    if kind == "linear":
        a = float(p.get("slope", 0.0))
        b = float(p.get("intercept", 0.0))
        return (lambda t: a * t + b), (lambda t: a)

    if kind in ("sine", "cosine"):
        amp = float(p.get("amplitude", 1.0))
        freq = float(p.get("frequency", 1.0))
        phase = float(p.get("phase", 0.0))
        if kind == "sine":
            return (
                lambda t: amp * math.sin(freq * t + phase),
                lambda t: amp * freq * math.cos(freq * t + phase),
            )
        return (
            lambda t: amp * math.cos(freq * t + phase),
            lambda t: -amp * freq * math.sin(freq * t + phase),
        )

    if kind == "atan":
        amp = float(p.get("amplitude", 1.0))
        rate = float(p.get("rate", 1.0))
        shift = float(p.get("shift", 0.0))
        return (
            lambda t: amp * math.atan(rate * t + shift),
            lambda t: amp * rate / (1.0 + (rate * t + shift) ** 2),
        )

    if kind == "tanh":
        amp = float(p.get("amplitude", 1.0))
        rate = float(p.get("rate", 1.0))
        shift = float(p.get("shift", 0.0))

        def tanh_d(t):
            th = math.tanh(rate * t + shift)
            return amp * rate * (1.0 - th * th)

        return (lambda t: amp * math.tanh(rate * t + shift)), tanh_d

    if kind == "reciprocal-power":
        coeff, shift = need("coefficient", "shift")
        power = float(p.get("power", 1.0))
        return (
            lambda t: coeff * (t + shift) ** -power,
            lambda t: -coeff * power * (t + shift) ** -(power + 1.0),
        )

    if kind == "exponential-decay":
        (coeff,) = need("coefficient")
        rate = float(p.get("rate", 1.0))
        return (
            lambda t: coeff * math.exp(-rate * t),
            lambda t: -coeff * rate * math.exp(-rate * t),
        )

    if kind == "sum-of-terms":
        terms = [_as_signal(term) for term in p.get("terms", [])]
        if not terms:
            raise ValueError("sum-of-terms needs at least one term")
        vfns = [s._vfn for s in terms]
        dfns = [s.derivative for s in terms]  # honor each term's derivative mode
        return (
            lambda t: sum(f(t) for f in vfns),
            lambda t: sum(f(t) for f in dfns),
        )

    if kind == "step-modulated-composite":
        carrier = _as_signal(p["carrier"]) if "carrier" in p else None
        if carrier is None:
            raise ValueError("step-modulated-composite needs a carrier signal")
        half_period = float(p.get("half_period", 10.0))
        if half_period <= 0:
            raise ValueError("half_period must be positive")
        cv, cd = carrier._vfn, carrier.derivative

        # Square gate from alternating unit steps: 1 on [0, hp), 0 on [hp, 2hp), ...
        # H(0) = 1, so the gate is right-continuous and its right-derivative is 0.
        def gate(t):
            return 1.0 if int(math.floor(t / half_period)) % 2 == 0 else 0.0

        return (lambda t: gate(t) * cv(t)), (lambda t: gate(t) * cd(t))

    if kind == "sampled-piecewise-constant":
        values = [float(v) for v in p.get("values", [])]
        if not values:
            raise ValueError("sampled-piecewise-constant needs a nonempty value list")
        hold = float(p.get("hold", 1.0))
        if hold <= 0:
            raise ValueError("hold duration must be positive")
        last = len(values) - 1

        def held(t):
            return values[min(int(math.floor(t / hold)), last)]

        return held, (lambda t: 0.0)

    raise ValueError(f"unknown signal kind {kind!r}")


def _as_signal(spec) -> InputSignal:
    if isinstance(spec, InputSignal):
        return spec
    if isinstance(spec, dict):
        return signal_from_json(spec)
    raise ValueError(f"cannot interpret {spec!r} as a signal")


def signal_from_json(fragment: dict) -> InputSignal:
    """Build a signal from {"kind": ..., "params": {...}}; nested signals
    (sum terms, carriers) use the same schema."""
    if "kind" not in fragment:
        raise ValueError('signal JSON needs a "kind" key')
    extra = set(fragment) - {"kind", "params", "derivative_mode", "h_d"}
    if extra:
        raise ValueError(f"unknown signal key(s) {sorted(extra)}")
    return InputSignal(
        kind=fragment["kind"],
        params=dict(fragment.get("params", {})),
        derivative_mode=fragment.get("derivative_mode", "analytic"),
        h_d=float(fragment.get("h_d", 1e-6)),
    )


def signal_to_json(sig: InputSignal) -> dict:
    def encode(value):
        if isinstance(value, InputSignal):
            return signal_to_json(value)
        if isinstance(value, (list, tuple)):
            return [encode(v) for v in value]
        return value

    out = {"kind": sig.kind, "params": {k: encode(v) for k, v in sig.params.items()}}
    if sig.derivative_mode != "analytic":
        out["derivative_mode"] = sig.derivative_mode
        out["h_d"] = sig.h_d
    return out


def eval_input(sig: InputSignal, t: float) -> tuple[float, float]:
    """Value and derivative of one input at time t >= 0."""
    if t < 0:
        raise ValueError("input signals are defined for t >= 0 only")
    return sig.value(t), sig.derivative(t)


@dataclass
class InputSet:
    """Ordered inputs of the whole network, one signal per agent."""

    signals: tuple
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.signals = tuple(self.signals)
        if not self.signals:
            raise ValueError("input set must contain at least one signal")

    def __len__(self):
        return len(self.signals)

    def values(self, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError("input signals are defined for t >= 0 only")
        return np.array([s._vfn(t) for s in self.signals])

    def derivatives(self, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError("input signals are defined for t >= 0 only")
        return np.array([s.derivative(t) for s in self.signals])

    def eval_all(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        return self.values(t), self.derivatives(t)


@dataclass(frozen=True, eq=False)
class SignalStats:
    """Grid estimates of the input-derivative statistics: gamma is the sup of
    the disagreement norm ||u_dot - mean(u_dot) 1||, mu the per-agent sup of
    |u_dot^i|."""

    gamma: float
    mu: np.ndarray
    grid: np.ndarray


def network_average(inputs: InputSet, t: float) -> tuple[float, float]:
    """Mean input value and mean input derivative across the network."""
    u, du = inputs.eval_all(t)
    return float(u.mean()), float(du.mean())


def disagreement_gamma(inputs: InputSet, grid) -> SignalStats:
    """Sup over the grid of the projected derivative norm, plus per-agent sups.

    This is a grid estimate of an essential supremum; resolution is the
    caller's responsibility (the simulation grid is the intended choice).
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be nonempty")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    gamma = 0.0
    mu = np.zeros(len(inputs))
    for t in grid:
        du = inputs.derivatives(float(t))
        gamma = max(gamma, float(np.linalg.norm(du - du.mean())))
        np.maximum(mu, np.abs(du), out=mu)
    return SignalStats(gamma=gamma, mu=mu, grid=grid)


def discrete_disagreement_gamma(inputs: InputSet, delta: float, num_steps: int) -> float:
    """Sup over k of ||Pi_N (u(k+1) - u(k))|| with samples at t = k*delta."""
    if delta <= 0 or num_steps < 1:
        raise ValueError("need delta > 0 and at least one step")
    gamma = 0.0
    prev = inputs.values(0.0)
    for k in range(1, num_steps + 1):
        cur = inputs.values(k * delta)
        d = cur - prev
        gamma = max(gamma, float(np.linalg.norm(d - d.mean())))
        prev = cur
    return gamma


# ---------------------------------------------------------------------------
# Scenario presets
# ---------------------------------------------------------------------------

SCENARIO_PRESETS = ("case1", "case2", "sampled_bias", "saturation")


def _sum(*terms):
    return make_signal("sum-of-terms", terms=list(terms))


def _case1_signals():
    common = make_signal("sine", amplitude=5.0, frequency=1.0)
    return (
        _sum(common, make_signal("reciprocal-power", coefficient=1.0, shift=2.0, power=1.0),
             make_signal("constant", value=3.0)),
        _sum(common, make_signal("reciprocal-power", coefficient=1.0, shift=2.0, power=2.0),
             make_signal("constant", value=4.0)),
        _sum(common, make_signal("reciprocal-power", coefficient=1.0, shift=2.0, power=3.0),
             make_signal("constant", value=5.0)),
        _sum(common, make_signal("exponential-decay", coefficient=10.0, rate=1.0),
             make_signal("constant", value=4.0)),
        _sum(common, make_signal("atan"), make_signal("constant", value=-1.5)),
        _sum(common, make_signal("tanh", amplitude=-1.0), make_signal("constant", value=1.0)),
    )


def _case2_signals():
    return (
        make_signal("sine", amplitude=0.55, frequency=0.8),
        _sum(make_signal("sine", amplitude=0.5, frequency=0.7),
             make_signal("cosine", amplitude=0.5, frequency=0.6)),
        make_signal("linear", slope=0.1),
        make_signal("atan", rate=0.5),
        make_signal("cosine", amplitude=0.1, frequency=2.0),
        make_signal("sine", amplitude=0.5, frequency=0.5),
    )


def _saturation_signals():
    half = 10.0

    def gated(carrier):
        return make_signal("step-modulated-composite", carrier=carrier, half_period=half)

    return (
        gated(_sum(make_signal("cosine", amplitude=4.0, frequency=0.5), make_signal("constant", value=10.0))),
        gated(_sum(make_signal("tanh", amplitude=4.0, shift=-5.0), make_signal("tanh", amplitude=4.0, shift=-25.0),
                   make_signal("constant", value=5.0))),
        gated(_sum(make_signal("sine", amplitude=4.0, frequency=0.5, phase=1.0), make_signal("constant", value=8.0))),
        gated(_sum(make_signal("atan", amplitude=4.0, rate=0.5, shift=-5.0), make_signal("constant", value=-6.0))),
        gated(_sum(make_signal("sine", amplitude=1.0, frequency=2.0), make_signal("constant", value=-5.0))),
        gated(_sum(make_signal("cosine", amplitude=4.0, frequency=0.5), make_signal("constant", value=7.0))),
    )


def _box_muller(rng) -> float:
    u1, u2 = rng.random(), rng.random()
    while u1 <= 0.0:  # guard the log
        u1 = rng.random()
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def _sampled_bias_signals(seed: int, n_samples: int = 64, hold: float = 2.0):
    """Synchronously sampled process 2 + sin(w_m t_m + phi_m) plus per-agent
    static biases, held constant between the 0.5 Hz sampling instants.

    Draw order per sample m: frequency w_m first, then phase phi_m, each via
    Box-Muller from two uniform draws of a PCG64 generator seeded with `seed`.
    """
    rng = np.random.default_rng(seed)
    common = []
    for m in range(n_samples):
        w = 0.5 * _box_muller(rng)            # N(0, 0.25)
        phi = (math.pi / 2.0) * _box_muller(rng)  # N(0, (pi/2)^2)
        common.append(2.0 + math.sin(w * (m * hold) + phi))
    return tuple(
        make_signal("sampled-piecewise-constant", values=[c + b for c in common], hold=hold)
        for b in SAMPLED_BIASES
    )


def preset_scenario(name: str, seed: int = 0) -> InputSet:
    """Bundled six-agent input sets; only "sampled_bias" consumes the seed."""
    if name == "case1":
        signals = _case1_signals()
    elif name == "case2":
        signals = _case2_signals()
    elif name == "sampled_bias":
        signals = _sampled_bias_signals(seed)
    elif name == "saturation":
        signals = _saturation_signals()
    else:
        raise ValueError(f"unknown scenario preset {name!r}; choose from {', '.join(SCENARIO_PRESETS)}")
    return InputSet(signals=signals, meta={"preset": name, "seed": seed})
