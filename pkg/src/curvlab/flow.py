"""Integration of the Hamilton ODE dR/dt = Q(R) and its variants.

Variants add a constant forcing ``eps * I`` or the extra reaction term
``D_ab(R)``. Steps act on raw arrays; after each accepted step the symmetry
drift from floating point arithmetic is projected away (and the step is
rejected if the drift exceeds ``DRIFT_TOL``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import stiefel
from .algebra import (
    CurvatureOperator,
    TransformParams,
    _d_ab_array,
    _frozen,
    cyclic_sum,
    d_ab_coefficients,
    q_array,
    ricci_traceless,
    scalar,
    sphere,
    symmetrize_pairs,
    symmetry_residuals,
)
from .cones import (
    DEFAULT_STARTS,
    FourFrame,
    FrameParams,
    SET_E,
    _contract3,
    evaluate_condition,
    frame_components,
    membership,
)
from .errors import CurvlabError, NonConvergence, PreconditionViolation, StepRejected, Undefined

DRIFT_TOL = 1e-9


class Variant(str, enum.Enum):
    PLAIN = "PLAIN"
    EPSILON = "EPSILON"
    BOHM_WILKING = "BOHM_WILKING"


@dataclass(frozen=True)
class FlowVariant:
    kind: Variant = Variant.PLAIN
    eps: float = 0.0
    params: Optional[TransformParams] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Variant(self.kind))
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if self.kind is Variant.BOHM_WILKING and self.params is None:
            raise ValueError("BOHM_WILKING needs TransformParams")

    @classmethod
    def plain(cls) -> "FlowVariant":
        return cls(Variant.PLAIN)

    @classmethod
    def epsilon(cls, eps: float) -> "FlowVariant":
        return cls(Variant.EPSILON, eps=eps)

    @classmethod
    def bohm_wilking(cls, params: TransformParams) -> "FlowVariant":
        return cls(Variant.BOHM_WILKING, params=params)

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value}
        if self.kind is Variant.EPSILON:
            d["eps"] = self.eps
        if self.params is not None:
            d["a"], d["b"] = self.params.a, self.params.b
        return d


class Scheme(str, enum.Enum):
    RK4_FIXED = "RK4_FIXED"
    RK45_ADAPTIVE = "RK45_ADAPTIVE"


@dataclass(frozen=True)
class FlowConfig:
    variant: FlowVariant = field(default_factory=FlowVariant.plain)
    scheme: Scheme = Scheme.RK45_ADAPTIVE
    h: float = 1e-3
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    step_cap: float = 0.01
    max_time: float = math.inf
    max_trace: Optional[float] = None
    trace_growth: float = 1e3
    max_steps: int = 100_000
    monitors: tuple = ()
    sample_growth: float = 1.25
    sample_every: int = 0
    seed: int = 0
    starts: int = 16
    pinching: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "monitors", tuple(self.monitors))
        if self.h <= 0:
            raise ValueError("h must be positive")
        if self.max_trace is not None and self.max_trace <= 0:
            raise ValueError("max_trace must be positive")

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.to_dict(),
            "scheme": self.scheme.value,
            "h": self.h,
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "step_cap": self.step_cap,
            "max_time": None if math.isinf(self.max_time) else self.max_time,
            "max_trace": self.max_trace,
            "trace_growth": self.trace_growth,
            "max_steps": self.max_steps,
            "monitors": [m.label for m in self.monitors],
            "sample_growth": self.sample_growth,
            "sample_every": self.sample_every,
            "seed": self.seed,
            "starts": self.starts,
            "pinching": self.pinching,
        }


@dataclass
class Sample:
    t: float
    R: CurvatureOperator
    scal: float
    ric0_norm: float
    step_size: float
    margins: dict = field(default_factory=dict)
    pinching: float = math.nan
    validated: bool = True
    errors: dict = field(default_factory=dict)


@dataclass
class FlowTrajectory:
    samples: list
    terminated_by: str
    steps: int = 0
    config: Optional[FlowConfig] = None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def min_margin(self, label: str) -> float:
        vals = [s.margins[label] for s in self.samples if label in s.margins]
        return min(vals) if vals else math.nan

    def normalized(self) -> list:
        """Samples divided by scal / (n(n-1)), for plotting only."""
        out = []
        for s in self.samples:
            n = s.R.n
            c = s.scal / (n * (n - 1))
            out.append(s.R / c if c > 0 else s.R)
        return out


# ---------------------------------------------------------------------------
# vector field and steps
# ---------------------------------------------------------------------------


class _Field:
    def __init__(self, n: int, variant: FlowVariant):
        self.variant = variant
        self.forcing = variant.eps * sphere(n).entries if variant.kind is Variant.EPSILON else None
        self.dcoef = d_ab_coefficients(n, variant.params) if variant.kind is Variant.BOHM_WILKING else None

    def __call__(self, T: np.ndarray) -> np.ndarray:
        F = q_array(T)
        if self.forcing is not None:
            F = F + self.forcing
        if self.dcoef is not None:
            F = F + _d_ab_array(T, self.dcoef)
        return F


def vector_field(R: CurvatureOperator, variant: FlowVariant = FlowVariant()) -> np.ndarray:
    return _Field(R.n, variant)(R.entries)


def _rk4(f, T, h):
    k1 = f(T)
    k2 = f(T + 0.5 * h * k1)
    k3 = f(T + 0.5 * h * k2)
    k4 = f(T + h * k3)
    return T + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


# Dormand-Prince 5(4)
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)


def _dopri(f, T, h):
    ks = []
    for i in range(7):
        Y = T
        for a, k in zip(_DP_A[i], ks):
            if a:
                Y = Y + h * a * k
        ks.append(f(Y))
    y5 = T + h * sum(b * k for b, k in zip(_DP_B5, ks) if b)
    y4 = T + h * sum(b * k for b, k in zip(_DP_B4, ks) if b)
    return y5, y5 - y4


def _revalidate(T: np.ndarray) -> np.ndarray:
    res = symmetry_residuals(T)
    drift = max(res.values())
    if drift > DRIFT_TOL * max(1.0, float(np.max(np.abs(T)))):
        raise StepRejected(f"symmetry drift {drift:.3e} after step; decrease h")
    T = symmetrize_pairs(T)
    return T - cyclic_sum(T) / 3.0


def step(R: CurvatureOperator, h: float, variant: FlowVariant = FlowVariant(),
         scheme: Scheme = Scheme.RK4_FIXED) -> CurvatureOperator:
    """One explicit step of size h (RK4, or the 5th order Dormand-Prince update)."""
    if h <= 0:
        raise ValueError("h must be positive")
    f = _Field(R.n, variant)
    if Scheme(scheme) is Scheme.RK4_FIXED:
        T = _rk4(f, R.entries, h)
    else:
        T, _ = _dopri(f, R.entries, h)
    return CurvatureOperator(_frozen(_revalidate(T)))


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


def _trace(T: np.ndarray) -> float:
    return float(np.einsum("ijij->", T))


def integrate(R0: CurvatureOperator, cfg: FlowConfig = FlowConfig()) -> FlowTrajectory:
    """Integrate from t = 0 until a stop condition.

    A sample is stored at t = 0, whenever the trace has grown by
    ``sample_growth`` since the last sample (or every ``sample_every`` steps
    when that is positive), and at the final step.
    """
    f = _Field(R0.n, cfg.variant)
    max_trace = cfg.max_trace
    tr0 = _trace(R0.entries)
    if max_trace is None and tr0 > 0:
        max_trace = cfg.trace_growth * tr0
    if max_trace is None and math.isinf(cfg.max_time):
        raise ValueError("trace(R0) <= 0 gives no default max_trace; set max_time or max_trace")
    T = np.array(R0.entries)
    t = 0.0
    h = cfg.h
    samples: list[Sample] = []
    monitor = _Monitor(cfg)
    samples.append(monitor.sample(t, T, 0.0))
    last_trace = max(tr0, 1e-300)
    steps = 0
    reason = "max_steps"
    since = 0
    while steps < cfg.max_steps:
        norm = float(np.linalg.norm(T))
        if cfg.scheme is Scheme.RK4_FIXED:
            hs = min(h, cfg.max_time - t)
            Tn = _rk4(f, T, hs)
        else:
            cap = cfg.step_cap / norm if norm > 0 else math.inf
            hs = min(h, cap, cfg.max_time - t)
            if hs <= 0 or not math.isfinite(hs):
                hs = min(cfg.h, cfg.max_time - t) if math.isfinite(cfg.max_time) else cfg.h
            while True:
                Tn, err = _dopri(f, T, hs)
                scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(T), np.abs(Tn))
                e = float(np.sqrt(np.mean((err / scale) ** 2)))
                if e <= 1.0:
                    break
                hs *= max(0.2, 0.9 * e ** -0.2)
                if hs < 1e-14 * max(1.0, t):
                    raise StepRejected(f"adaptive step underflow at t={t:.6g}")
            h = hs * min(5.0, 0.9 * e ** -0.2) if e > 0 else 5.0 * hs
        T = _revalidate(Tn)
        t += hs
        steps += 1
        since += 1
        tr = _trace(T)
        stop = None
        if max_trace is not None and tr >= max_trace:
            stop = "max_trace"
        elif t >= cfg.max_time * (1 - 1e-14):
            stop = "max_time"
        elif steps >= cfg.max_steps:
            stop = "max_steps"
        if not np.all(np.isfinite(T)):
            raise StepRejected(f"non-finite state at t={t:.6g}")
        due = since >= cfg.sample_every if cfg.sample_every > 0 else (tr > 0 and tr >= cfg.sample_growth * last_trace)
        if due or stop:
            samples.append(monitor.sample(t, T, hs))
            last_trace = max(tr, 1e-300)
            since = 0
        if stop:
            reason = stop
            break
    return FlowTrajectory(samples=samples, terminated_by=reason, steps=steps, config=cfg)


class _Monitor:
    def __init__(self, cfg: FlowConfig):
        self.cfg = cfg
        self.warm: dict = {}

    def sample(self, t: float, T: np.ndarray, hs: float) -> Sample:
        R = CurvatureOperator(_frozen(T))
        res = max(symmetry_residuals(T).values())
        s = Sample(
            t=t,
            R=R,
            scal=scalar(R),
            ric0_norm=ricci_traceless(R).norm(),
            step_size=hs,
            validated=res <= DRIFT_TOL * max(1.0, float(np.max(np.abs(T)))),
        )
        for spec in self.cfg.monitors:
            try:
                rep = membership(R, spec, self.cfg.starts, self.cfg.seed, warm=self.warm.get(spec.label))
                s.margins[spec.label] = rep.margin
                if rep.ambient == R.n:
                    self.warm[spec.label] = rep.witness.vectors
            except CurvlabError as exc:
                s.margins[spec.label] = math.nan
                s.errors[spec.label] = str(exc)
        if self.cfg.pinching:
            try:
                s.pinching = pinching_ratio(R, starts=self.cfg.starts, seed=self.cfg.seed)
            except CurvlabError as exc:
                s.errors["pinching"] = str(exc)
        return s


def closed_form_sphere(n: int, t) -> np.ndarray:
    """Scale factor u(t) = 1/(1 - 2(n-1)t) of the trajectory starting at I."""
    return 1.0 / (1.0 - 2.0 * (n - 1) * np.asarray(t, dtype=float))


# ---------------------------------------------------------------------------
# boundary derivative and pinching
# ---------------------------------------------------------------------------


def boundary_derivative(R: CurvatureOperator, f: FourFrame, p: FrameParams,
                        variant: FlowVariant = FlowVariant()) -> float:
    """d/dt of the E-condition along the flow, without the constant term."""
    V = vector_field(R, variant)
    A, B, C, D, P = frame_components(V, f)
    l2, m2 = p.lam ** 2, p.mu ** 2
    return float(A + l2 * B + m2 * C + l2 * m2 * D - 2.0 * p.lam * p.mu * P)


def boundary_derivative_check(R: CurvatureOperator, f: FourFrame, p: FrameParams, *,
                              variant: FlowVariant = FlowVariant(), boundary_tol: float = 1e-6,
                              member_tol: float = 1e-7, margin: Optional[float] = None,
                              starts: int = DEFAULT_STARTS, seed: int = 0) -> float:
    """Derivative of the E-condition at a zero of the condition for R in E.

    ``margin`` may pass a precomputed SET_E margin of R to skip the membership run.
    """
    val = evaluate_condition(R, f, p, SET_E)
    if val > boundary_tol:
        raise PreconditionViolation(f"E-condition at the witness is {val:.3e} > {boundary_tol:.1e}")
    if margin is None:
        margin = membership(R, SET_E, starts, seed, warm=f.vectors).margin
    if margin < -member_tol:
        raise PreconditionViolation(f"operator is outside E (margin {margin:.3e})")
    return boundary_derivative(R, f, p, variant)


class _SectionalProblem:
    def __init__(self, T, sign):
        self.T = T
        self.sign = sign

    def __call__(self, X, idx, grad=True):
        Y = _contract3(self.T, X)
        K = np.einsum("bi,bi->b", X[:, 0], Y[:, :, 1, 0, 1])
        if not grad:
            return self.sign * K, None
        G = np.empty_like(X)
        G[:, 0] = 2.0 * Y[:, :, 1, 0, 1]
        G[:, 1] = 2.0 * Y[:, :, 0, 1, 0]
        return self.sign * K, self.sign * G


def sectional_extremes(R: CurvatureOperator, starts: int = DEFAULT_STARTS, seed: int = 0,
                       strict: bool = False) -> tuple[float, float]:
    """(min, max) sectional curvature over 2-planes by multistart on orthonormal 2-frames."""
    X0 = stiefel.random_frames(2, R.n, seed, starts)
    lo = stiefel.minimize(_SectionalProblem(R.entries, 1.0), X0)
    hi = stiefel.minimize(_SectionalProblem(R.entries, -1.0), X0)
    if strict and not (lo.converged.any() and hi.converged.any()):
        raise NonConvergence("sectional curvature extremization did not converge")
    return float(lo.values.min()), float(-hi.values.min())


def pinching_ratio(R: CurvatureOperator, starts: int = DEFAULT_STARTS, seed: int = 0) -> float:
    kmin, kmax = sectional_extremes(R, starts, seed)
    if kmax <= 0:
        raise Undefined(f"maximal sectional curvature {kmax:.3e} is not positive")
    return kmin / kmax
