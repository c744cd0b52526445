"""Membership oracles for the isotropic-curvature cones and the set E.

Every condition here is a minimum over orthonormal four-frames of a
functional built from five frame components of R:

    A = R(e1,e3,e1,e3)   B = R(e1,e4,e1,e4)
    C = R(e2,e3,e2,e3)   D = R(e2,e4,e2,e4)   P = R(e1,e2,e3,e4)

    F = A + lam^2 B + mu^2 C + lam^2 mu^2 D - 2 lam mu P + kappa (1-lam^2)(1-mu^2)

with (lam, mu) = (1, 1) for PIC, mu = 1 for TILDE_C, kappa = 0 for HAT_C and
kappa = 1 for SET_E. Two independent routes compute the same minimum for
TILDE_C and SET_E: the *extension* oracle minimizes plain isotropic curvature
of the product operator on R^{n+1} or R^{n+2}, and the *parametric* oracle
minimizes F jointly over frames in R^n and the (lam, mu) box.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from . import stiefel
from .algebra import (
    CurvatureOperator,
    TransformParams,
    extend_flat,
    extend_sphere2,
    inverse_l_ab,
    ricci,
    sharp,
)
from .errors import DimensionMismatch, NonConvergence, OracleMismatch, PreconditionViolation

MEMBER_TOL = 1e-7
AGREEMENT_TOL = 5e-6
DEFAULT_STARTS = 64
ESCALATION = 4

MEMBER = "MEMBER"
NON_MEMBER = "NON_MEMBER"
UNDECIDED = "UNDECIDED"


class ConeKind(str, enum.Enum):
    PIC = "PIC"
    TILDE_C = "TILDE_C"
    HAT_C = "HAT_C"
    SET_E = "SET_E"
    LAB_E = "LAB_E"


@dataclass(frozen=True)
class ConeSpec:
    kind: ConeKind
    params: Optional[TransformParams] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ConeKind(self.kind))
        if (self.kind is ConeKind.LAB_E) != (self.params is not None):
            raise ValueError("TransformParams are required for LAB_E and only for LAB_E")

    @classmethod
    def parse(cls, text: str, n: int | None = None) -> "ConeSpec":
        """Parse ``PIC``, ``SET_E``, ``LAB_E`` (admissible b_max) or ``LAB_E:a,b``."""
        name, _, rest = text.partition(":")
        kind = ConeKind(name.strip().upper())
        if kind is not ConeKind.LAB_E:
            return cls(kind)
        if rest:
            a, b = (float(x) for x in rest.split(","))
            return cls(kind, TransformParams(a, b))
        if n is None:
            raise ValueError("LAB_E without explicit a,b needs the dimension")
        return cls(kind, TransformParams.admissible(n))

    @property
    def label(self) -> str:
        if self.params is None:
            return self.kind.value
        return f"{self.kind.value}:{self.params.a:.17g},{self.params.b:.17g}"


PIC = ConeSpec(ConeKind.PIC)
TILDE_C = ConeSpec(ConeKind.TILDE_C)
HAT_C = ConeSpec(ConeKind.HAT_C)
SET_E = ConeSpec(ConeKind.SET_E)


@dataclass(frozen=True, eq=False)
class FourFrame:
    """Four orthonormal vectors in R^m, stored as the rows of a 4 x m array."""

    vectors: np.ndarray

    def __post_init__(self):
        V = np.array(self.vectors, dtype=float)
        if V.ndim != 2 or V.shape[0] != 4:
            raise DimensionMismatch(f"a four-frame needs shape (4, m), got {V.shape}")
        if V.shape[1] < 4:
            raise DimensionMismatch(f"four-frames need m >= 4, got m={V.shape[1]}")
        res = float(np.max(np.abs(V @ V.T - np.eye(4))))
        if res > 1e-10:
            raise PreconditionViolation(f"frame is not orthonormal (residual {res:.3e})")
        V.setflags(write=False)
        object.__setattr__(self, "vectors", V)

    @property
    def m(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def standard(cls, m: int, indices: Sequence[int] = (0, 1, 2, 3)) -> "FourFrame":
        return cls(np.eye(m)[list(indices)])


@dataclass(frozen=True)
class FrameParams:
    lam: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "lam", float(np.clip(self.lam, -1.0, 1.0)))
        object.__setattr__(self, "mu", float(np.clip(self.mu, -1.0, 1.0)))


@dataclass
class MembershipReport:
    margin: float
    kind: str
    witness: FourFrame
    params: FrameParams
    method: str
    starts: int
    converged: bool
    ambient: int
    member: Optional[bool] = None
    decision: str = MEMBER
    other_margin: Optional[float] = None
    agreement: Optional[float] = None
    escalated: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "margin": self.margin,
            "kind": self.kind,
            "witness": {
                "vectors": self.witness.vectors.tolist(),
                "lambda": self.params.lam,
                "mu": self.params.mu,
            },
            "method": self.method,
            "starts": self.starts,
            "converged": self.converged,
            "ambient": self.ambient,
            "decision": self.decision,
            "other_margin": self.other_margin,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


# ---------------------------------------------------------------------------
# frame contractions
# ---------------------------------------------------------------------------


def _contract3(T: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Y[b, i, x, y, z] = R(., e_x, e_y, e_z)_i for frames X[b] (k x m)."""
    m = T.shape[0]
    B, k, _ = X.shape
    Xs = X[:, None]
    Z = np.matmul(T.reshape(m ** 3, m), X.transpose(0, 2, 1))  # last slot: (B, m^3, k)
    Z = np.matmul(Xs, Z.reshape(B, m * m, m, k))  # third slot: (B, m^2, k, k)
    Z = np.matmul(Xs, Z.reshape(B, m, m, k * k))  # second slot: (B, m, k, k^2)
    return Z.reshape(B, m, k, k, k)


# (a, c) index pairs of the four sectional terms A, B, C, D
_PLANES = ((0, 2), (0, 3), (1, 2), (1, 3))


def _components(T: np.ndarray, X: np.ndarray, grad: bool = True):
    """Values of (A, B, C, D, P) and, optionally, their frame gradients."""
    Y = _contract3(T, X)
    B = X.shape[0]
    vals = np.empty((B, 5))
    for s, (a, c) in enumerate(_PLANES):
        vals[:, s] = np.einsum("bi,bi->b", X[:, a], Y[:, :, c, a, c])
    vals[:, 4] = np.einsum("bi,bi->b", X[:, 0], Y[:, :, 1, 2, 3])
    if not grad:
        return vals, None
    grads = np.zeros((5,) + X.shape)
    for s, (a, c) in enumerate(_PLANES):
        grads[s, :, a] = 2.0 * Y[:, :, c, a, c]
        grads[s, :, c] = 2.0 * Y[:, :, a, c, a]
    grads[4, :, 0] = Y[:, :, 1, 2, 3]
    grads[4, :, 1] = -Y[:, :, 0, 2, 3]
    grads[4, :, 2] = Y[:, :, 3, 0, 1]
    grads[4, :, 3] = -Y[:, :, 2, 0, 1]
    return vals, grads


def _weights(lam, mu, kappa):
    """Coefficients of (A, B, C, D, P) and the constant term."""
    l2, m2 = lam * lam, mu * mu
    w = np.empty(np.shape(lam) + (5,))
    w[..., 0] = 1.0
    w[..., 1] = l2
    w[..., 2] = m2
    w[..., 3] = l2 * m2
    w[..., 4] = -2.0 * lam * mu
    return w, kappa * (1.0 - l2) * (1.0 - m2)


def _functional(vals, lam, mu, kappa):
    w, c = _weights(lam, mu, kappa)
    return np.sum(w * vals, axis=-1) + c


def _tensor(R) -> np.ndarray:
    return R.entries if isinstance(R, CurvatureOperator) else np.asarray(R, dtype=float)


def frame_components(R, f: FourFrame) -> np.ndarray:
    T = _tensor(R)
    if f.m != T.shape[0]:
        raise DimensionMismatch(f"frame in R^{f.m} for an operator on R^{T.shape[0]}")
    vals, _ = _components(T, f.vectors[None], grad=False)
    return vals[0]


def isotropic_value(R, f: FourFrame) -> float:
    A, B, C, D, P = frame_components(R, f)
    return float(A + B + C + D - 2.0 * P)


_KAPPA = {ConeKind.PIC: 0.0, ConeKind.TILDE_C: 0.0, ConeKind.HAT_C: 0.0, ConeKind.SET_E: 1.0, ConeKind.LAB_E: 1.0}


def _fixed_params(kind: ConeKind, p: FrameParams) -> FrameParams:
    if kind is ConeKind.PIC:
        return FrameParams(1.0, 1.0)
    if kind is ConeKind.TILDE_C:
        return FrameParams(p.lam, 1.0)
    return p


def pulled_back(R: CurvatureOperator, spec: ConeSpec) -> CurvatureOperator:
    """The operator whose SET_E membership decides membership for ``spec``."""
    if spec.kind is ConeKind.LAB_E:
        return inverse_l_ab(R, spec.params)
    return R


def evaluate_condition(R: CurvatureOperator, f: FourFrame, p: FrameParams, spec: ConeSpec) -> float:
    if f.m != R.n:
        raise DimensionMismatch(f"frame in R^{f.m} for an operator on R^{R.n}")
    R = pulled_back(R, spec)
    p = _fixed_params(spec.kind, p)
    vals = frame_components(R, f)
    return float(_functional(vals, np.float64(p.lam), np.float64(p.mu), _KAPPA[spec.kind]))


# ---------------------------------------------------------------------------
# exact box minimization in lam and mu
# ---------------------------------------------------------------------------


def _argmin_quadratic(alpha, beta, gamma):
    """argmin over [-1, 1] of alpha x^2 + beta x + gamma (vectorized)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        vertex = np.clip(np.where(alpha > 0, -beta / (2.0 * alpha), 0.0), -1.0, 1.0)
    end = np.where(beta > 0, -1.0, 1.0)  # the better endpoint: alpha + |beta| sign
    f_vertex = (alpha * vertex + beta) * vertex
    f_end = alpha - np.abs(beta)
    return np.where(f_vertex < f_end, vertex, end)


def best_lam(vals, mu, kappa):
    A, B, C, D, P = (vals[..., i] for i in range(5))
    m2 = mu * mu
    alpha = B + m2 * D - kappa * (1 - m2)
    beta = -2.0 * mu * P
    gamma = A + m2 * C + kappa * (1 - m2)
    return _argmin_quadratic(alpha, beta, gamma)


def best_mu(vals, lam, kappa):
    A, B, C, D, P = (vals[..., i] for i in range(5))
    l2 = lam * lam
    alpha = C + l2 * D - kappa * (1 - l2)
    beta = -2.0 * lam * P
    gamma = A + l2 * B + kappa * (1 - l2)
    return _argmin_quadratic(alpha, beta, gamma)


def coordinate_descent(vals, lam, mu, kappa, free_mu: bool, sweeps: int = 6):
    for _ in range(sweeps):
        lam = best_lam(vals, mu, kappa)
        if not free_mu:
            break
        mu = best_mu(vals, lam, kappa)
    return lam, mu


# ---------------------------------------------------------------------------
# frame minimization
# ---------------------------------------------------------------------------


class _FrameProblem:
    """Objective for stiefel.minimize with (lam, mu) held as block variables.

    ``inner`` re-minimizes (lam, mu) exactly before each gradient step; line
    searches then run at fixed (lam, mu).
    """

    def __init__(self, T, lam, mu, kappa, free_lam, free_mu):
        self.T = T
        self.lam = lam
        self.mu = mu
        self.kappa = kappa
        self.free_lam = free_lam
        self.free_mu = free_mu

    def __call__(self, X, idx, grad=True):
        vals, grads = _components(self.T, X, grad)
        w, c = _weights(self.lam[idx], self.mu[idx], self.kappa)
        f = np.einsum("bs,bs->b", w, vals) + c
        if not grad:
            return f, None
        return f, np.einsum("bs,sbkm->bkm", w, grads)

    def inner(self, X, idx):
        if not self.free_lam:
            return
        vals, _ = _components(self.T, X, grad=False)
        self.lam[idx], self.mu[idx] = coordinate_descent(vals, self.lam[idx], self.mu[idx], self.kappa, self.free_mu)


@dataclass
class _RawResult:
    value: float
    frame: np.ndarray
    lam: float
    mu: float
    converged: bool
    starts: int


def _minimize_frames(T, kind: str, starts: int, seed: int, warm: Optional[np.ndarray] = None,
                     max_iter: int = 3000, gtol: float = 1e-7) -> _RawResult:
    """kind in {"iso", "tilde", "hat", "set_e"}."""
    m = T.shape[0]
    if m < 4:
        raise DimensionMismatch(f"four-frame conditions are void for dimension {m} < 4")
    X0 = stiefel.random_frames(4, m, seed, starts)
    if warm is not None:
        warm = np.asarray(warm, dtype=float).reshape(-1, 4, m)
        X0 = np.concatenate([warm, X0], axis=0)[: max(starts, len(warm))]
    B = X0.shape[0]
    rng = stiefel.start_rng(seed, 1 << 40)
    lam0 = rng.uniform(-1.0, 1.0, B)
    mu0 = rng.uniform(-1.0, 1.0, B)
    if kind == "iso":
        prob = _FrameProblem(T, np.ones(B), np.ones(B), 0.0, False, False)
    elif kind == "tilde":
        prob = _FrameProblem(T, lam0, np.ones(B), 0.0, True, False)
    elif kind == "hat":
        prob = _FrameProblem(T, lam0, mu0, 0.0, True, True)
    elif kind == "set_e":
        prob = _FrameProblem(T, lam0, mu0, 1.0, True, True)
    else:
        raise ValueError(kind)
    res = stiefel.minimize(prob, X0, inner=prob.inner, max_iter=max_iter, gtol=gtol, scale=max(1.0, float(np.abs(T).max())))
    b = int(np.argmin(res.values))
    return _RawResult(
        value=float(res.values[b]),
        frame=res.X[b].copy(),
        lam=float(prob.lam[b]),
        mu=float(prob.mu[b]),
        converged=bool(res.converged[b]),
        starts=B,
    )


def _report(raw: _RawResult, kind: str, method: str, T) -> MembershipReport:
    frame = FourFrame(raw.frame)
    return MembershipReport(
        margin=raw.value,
        kind=kind,
        witness=frame,
        params=FrameParams(raw.lam, raw.mu),
        method=method,
        starts=raw.starts,
        converged=raw.converged,
        ambient=frame.m,
    )


def min_isotropic(R, budget: int = DEFAULT_STARTS, seed: int = 0, warm=None, strict: bool = False) -> MembershipReport:
    """Approximate global minimum of isotropic curvature over four-frames in R^m."""
    T = _tensor(R)
    raw = _minimize_frames(T, "iso", budget, seed, warm)
    if strict and not raw.converged:
        raise NonConvergence(f"no start converged ({raw.starts} starts)")
    return _report(raw, ConeKind.PIC.value, "frame", T)


def parametric_oracle(R: CurvatureOperator, spec: ConeSpec, budget: int = DEFAULT_STARTS, seed: int = 0,
                      warm=None) -> MembershipReport:
    target = pulled_back(R, spec)
    kind = {
        ConeKind.PIC: "iso",
        ConeKind.TILDE_C: "tilde",
        ConeKind.HAT_C: "hat",
        ConeKind.SET_E: "set_e",
        ConeKind.LAB_E: "set_e",
    }[spec.kind]
    raw = _minimize_frames(target.entries, kind, budget, seed, warm)
    return _report(raw, spec.label, "parametric", target.entries)


def extension_oracle(R: CurvatureOperator, spec: ConeSpec, budget: int = DEFAULT_STARTS, seed: int = 0,
                     warm=None) -> MembershipReport:
    target = pulled_back(R, spec)
    if spec.kind is ConeKind.TILDE_C:
        ext = extend_flat(target)
    elif spec.kind is ConeKind.HAT_C:
        ext = extend_flat(extend_flat(target))
    elif spec.kind in (ConeKind.SET_E, ConeKind.LAB_E):
        ext = extend_sphere2(target)
    else:
        raise ValueError(f"no extension oracle for {spec.kind.value}")
    rep = min_isotropic(ext, budget, seed, warm)
    rep.kind = spec.label
    rep.method = "extension"
    return rep


def _lift_warm(warm, m_from, m_to):
    if warm is None:
        return None
    W = np.asarray(warm, dtype=float).reshape(-1, 4, m_from)
    out = np.zeros((W.shape[0], 4, m_to))
    out[:, :, :m_from] = W
    return out


def comparable_margin(parametric_margin: float, spec: ConeSpec) -> float:
    """What the extension oracle should report, given the parametric margin.

    On R^n x S^2 (and on R^n x R^2) every frame with two vectors in each
    factor spans only mixed planes, so isotropic curvature of the product
    vanishes there and the extension minimum saturates at zero: it equals
    min(parametric, 0) for HAT_C, SET_E and LAB_E. The flat line factor of
    TILDE_C cannot host two frame vectors, so there the minima coincide.
    """
    if spec.kind in (ConeKind.HAT_C, ConeKind.SET_E, ConeKind.LAB_E):
        return min(parametric_margin, 0.0)
    return parametric_margin


def membership(
    R: CurvatureOperator,
    spec: ConeSpec,
    budget: int = DEFAULT_STARTS,
    seed: int = 0,
    *,
    member_tol: float = MEMBER_TOL,
    agreement_tol: float = AGREEMENT_TOL,
    escalate: bool = True,
    raise_on_mismatch: bool = False,
    warm=None,
    cross_check: bool = True,
) -> MembershipReport:
    """Decide membership of R in the set named by ``spec``.

    TILDE_C, SET_E and LAB_E run both oracles; HAT_C does too unless
    ``cross_check`` is off, using the flat R^2 extension. The reported margin is the
    smaller of the two, except that a saturated (zero) extension minimum for
    the sets E and l_ab(E) defers to the parametric margin. A disagreement
    beyond ``agreement_tol`` reruns both with ESCALATION times the budget and,
    if it persists, marks the decision undecided.
    """
    if R.n < 4:
        raise DimensionMismatch(f"frame-based conditions are void for n = {R.n} < 4; see low_dimensional_diagnostics")
    spec = ConeSpec(spec.kind, spec.params)
    two_routes = spec.kind is not ConeKind.PIC and (cross_check or spec.kind is not ConeKind.HAT_C)
    if not two_routes:
        rep = parametric_oracle(R, spec, budget, seed, warm)
        return _decide(rep, member_tol)

    extra = 1 if spec.kind is ConeKind.TILDE_C else 2
    b = budget
    escalated = False
    while True:
        par = parametric_oracle(R, spec, b, seed, warm)
        ext = extension_oracle(R, spec, b, seed, _lift_warm(warm, R.n, R.n + extra))
        gap = abs(comparable_margin(par.margin, spec) - ext.margin)
        if gap <= agreement_tol or not escalate or escalated:
            break
        b *= ESCALATION
        escalated = True
    if ext.margin < par.margin and (extra == 1 or ext.margin < -member_tol):
        best, other = ext, par
    else:
        best, other = par, ext
    best.other_margin = other.margin
    best.agreement = gap
    best.escalated = escalated
    best.converged = par.converged and ext.converged
    rep = _decide(best, member_tol)
    if gap > agreement_tol:
        rep.decision = UNDECIDED
        if raise_on_mismatch:
            raise OracleMismatch(
                f"{spec.label}: parametric margin {par.margin:.9g} vs extension margin {ext.margin:.9g}",
                extension=ext,
                parametric=par,
            )
    return rep


def _decide(rep: MembershipReport, member_tol: float) -> MembershipReport:
    rep.member = rep.margin >= -member_tol
    rep.decision = MEMBER if rep.member else NON_MEMBER
    return rep


def is_member(R, spec, **kw) -> bool:
    return bool(membership(R, spec, **kw).member)


# ---------------------------------------------------------------------------
# other diagnostics
# ---------------------------------------------------------------------------


def two_positive_margin(R: CurvatureOperator) -> float:
    """Sum of the two smallest eigenvalues of the Lambda^2 operator matrix."""
    ev = np.linalg.eigvalsh(R.lambda2())
    if ev.size == 1:
        return float(ev[0])
    return float(ev[0] + ev[1])


def sharp_boundary_value(R: CurvatureOperator, f: FourFrame) -> float:
    S = sharp(R)
    e1, e2, e3, e4 = f.vectors
    ev = lambda a, b, c, d: float(np.einsum("ijkl,i,j,k,l->", S, a, b, c, d))  # noqa: E731
    return (
        ev(e1, e3, e1, e3) + ev(e1, e4, e1, e4) + ev(e2, e3, e2, e3) + ev(e2, e4, e2, e4)
        + 2.0 * ev(e1, e3, e4, e2) + 2.0 * ev(e1, e4, e2, e3)
    )


def sharp_boundary_check(
    R: CurvatureOperator,
    f: FourFrame,
    *,
    boundary_tol: float = 1e-6,
    budget: int = DEFAULT_STARTS,
    seed: int = 0,
    min_isotropic_value: Optional[float] = None,
) -> float:
    """R# combination that is nonnegative at a zero of isotropic curvature of a PIC-boundary operator.

    Raises PreconditionViolation unless f is a near-zero of isotropic curvature
    and R itself has nonnegative isotropic curvature within MEMBER_TOL.
    """
    if f.m != R.n:
        raise DimensionMismatch(f"frame in R^{f.m} for an operator on R^{R.n}")
    val = isotropic_value(R, f)
    if val > boundary_tol:
        raise PreconditionViolation(f"isotropic curvature at the frame is {val:.3e} > {boundary_tol:.1e}")
    if min_isotropic_value is None:
        min_isotropic_value = min_isotropic(R, budget, seed, warm=f.vectors).margin
    if min_isotropic_value < -MEMBER_TOL:
        raise PreconditionViolation(f"operator has negative isotropic curvature {min_isotropic_value:.3e}")
    return sharp_boundary_value(R, f)


def low_dimensional_diagnostics(R: CurvatureOperator) -> dict[str, float]:
    """Proxies for n = 3: minimum Ricci eigenvalue and minimum sectional curvature.

    In dimension three M x R has nonnegative isotropic curvature iff Ric >= 0,
    and M x R^2 does iff all sectional curvatures are nonnegative.
    """
    if R.n != 3:
        raise DimensionMismatch("low-dimensional diagnostics are defined for n = 3 only")
    ric_min = float(np.linalg.eigvalsh(ricci(R).entries)[0])
    # for n = 3 every 2-form is simple, so sectional extremes are Lambda^2 eigenvalues
    sec_min = 0.5 * float(np.linalg.eigvalsh(R.lambda2())[0])
    return {"ricci_min": ric_min, "sectional_min": sec_min}
