"""Dense tensor algebra for algebraic curvature operators.

Operators are stored as rank-4 arrays ``R[i, j, k, l]`` with the symmetries of
a Riemann tensor and the convention ``R(u, v, u, v) = sectional curvature``,
so the unit sphere is ``I_ijkl = d_ik d_jl - d_il d_jk``.

The Lambda^2 view uses lexicographic pairs ``i < j`` and stores the matrix of
the curvature *operator*, ``M[(ij), (kl)] = 2 R_ijkl``. With this choice the
operator square of ``M`` is the Lambda^2 matrix of ``R^2``, the sphere maps to
``2 * identity``, and the quadratic form on a basis bivector is
``R(e_i^e_j, e_i^e_j) = (1/2) M[(ij), (ij)] = R_ijij``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Any

import numpy as np

from .errors import (
    BianchiViolation,
    DimensionMismatch,
    SingularTransform,
    SymmetryViolation,
)

SYMMETRY_TOL = 1e-10
BIANCHI_TOL = 1e-10
SINGULAR_TOL = 1e-12


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CurvatureOperator:
    """An element of S^2_B(so(n)), held as a read-only dense array."""

    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def R(self) -> np.ndarray:
        return self.entries

    def lambda2(self) -> np.ndarray:
        return to_lambda2(self.entries)

    def norm(self) -> float:
        """Frobenius norm of the Lambda^2 matrix (equal to the dense Frobenius norm)."""
        return float(np.linalg.norm(self.entries))

    def inner(self, other: "CurvatureOperator") -> float:
        return float(np.sum(self.entries * other.entries))

    def __add__(self, other: "CurvatureOperator") -> "CurvatureOperator":
        _same_dim(self.n, other.n)
        return CurvatureOperator(_frozen(self.entries + other.entries))

    def __sub__(self, other: "CurvatureOperator") -> "CurvatureOperator":
        _same_dim(self.n, other.n)
        return CurvatureOperator(_frozen(self.entries - other.entries))

    def __neg__(self) -> "CurvatureOperator":
        return CurvatureOperator(_frozen(-self.entries))

    def __mul__(self, c: float) -> "CurvatureOperator":
        return CurvatureOperator(_frozen(float(c) * self.entries))

    __rmul__ = __mul__

    def __truediv__(self, c: float) -> "CurvatureOperator":
        return CurvatureOperator(_frozen(self.entries / float(c)))

    def allclose(self, other: "CurvatureOperator", atol: float = 1e-10) -> bool:
        return self.n == other.n and bool(np.max(np.abs(self.entries - other.entries), initial=0.0) <= atol)

    def rotate(self, g: np.ndarray) -> "CurvatureOperator":
        """Pull back by an orthogonal matrix: (g.R)_ijkl = g_ia g_jb g_kc g_ld R_abcd."""
        return CurvatureOperator(_frozen(rotate_tensor(self.entries, g)))

    def __repr__(self) -> str:
        return f"CurvatureOperator(n={self.n}, norm={self.norm():.6g})"


@dataclass(frozen=True, eq=False)
class SymmetricBilinear:
    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
        res = float(np.max(np.abs(a - a.T), initial=0.0))
        if res > 1e-12 * max(1.0, float(np.max(np.abs(a), initial=0.0))):
            raise SymmetryViolation("bilinear", res)
        object.__setattr__(self, "entries", _frozen(0.5 * (a + a.T)))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __add__(self, other):
        return SymmetricBilinear(self.entries + _mat(other))

    def __sub__(self, other):
        return SymmetricBilinear(self.entries - _mat(other))

    def __mul__(self, c: float):
        return SymmetricBilinear(float(c) * self.entries)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))

    def trace(self) -> float:
        return float(np.trace(self.entries))


@dataclass(frozen=True, eq=False)
class TwoForm:
    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
        res = float(np.max(np.abs(a + a.T), initial=0.0))
        if res > 1e-12 * max(1.0, float(np.max(np.abs(a), initial=0.0))):
            raise SymmetryViolation("two-form antisymmetry", res)
        object.__setattr__(self, "entries", _frozen(0.5 * (a - a.T)))

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def wedge(cls, u, v) -> "TwoForm":
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return cls(np.outer(u, v) - np.outer(v, u))

    def __add__(self, other: "TwoForm") -> "TwoForm":
        return TwoForm(self.entries + other.entries)

    def __mul__(self, c: float) -> "TwoForm":
        return TwoForm(float(c) * self.entries)

    __rmul__ = __mul__


@dataclass(frozen=True)
class TransformParams:
    """Parameters (a, b) of the linear map l_ab."""

    a: float
    b: float

    @classmethod
    def admissible(cls, n: int, b: float | None = None) -> "TransformParams":
        """The pair with 2a = 2b + (n-2) b^2; ``b`` defaults to the largest admissible value."""
        if b is None:
            b = max_admissible_b(n)
        return cls(a=b + 0.5 * (n - 2) * b * b, b=float(b))

    def is_admissible(self, n: int, tol: float = 1e-12) -> bool:
        bmax = max_admissible_b(n)
        on_curve = abs(2 * self.a - 2 * self.b - (n - 2) * self.b ** 2) <= tol
        return 0.0 < self.b <= bmax + tol and on_curve

    def check_admissible(self, n: int) -> None:
        if not self.is_admissible(n):
            raise SingularTransform(
                f"(a={self.a}, b={self.b}) outside the admissible range for n={n} "
                f"(need 0 < b <= {max_admissible_b(n):.6g} and 2a = 2b + (n-2) b^2)"
            )


def max_admissible_b(n: int) -> float:
    if n <= 2:
        raise DimensionMismatch("admissible (a, b) needs n >= 3")
    return (np.sqrt(2 * n * (n - 2) + 4) - 2) / (n * (n - 2))


def _mat(x) -> np.ndarray:
    return x.entries if isinstance(x, SymmetricBilinear) else np.asarray(x, dtype=float)


def _same_dim(n1: int, n2: int) -> None:
    if n1 != n2:
        raise DimensionMismatch(f"dimension mismatch: {n1} vs {n2}")


# ---------------------------------------------------------------------------
# symmetry checks and construction
# ---------------------------------------------------------------------------


def cyclic_sum(T: np.ndarray) -> np.ndarray:
    """T_ijkl + T_iklj + T_iljk."""
    return T + T.transpose(0, 2, 3, 1) + T.transpose(0, 3, 1, 2)


def symmetry_residuals(T: np.ndarray) -> dict[str, float]:
    T = np.asarray(T, dtype=float)
    mx = lambda a: float(np.max(np.abs(a), initial=0.0))  # noqa: E731
    return {
        "antisymmetry_first": mx(T + T.transpose(1, 0, 2, 3)),
        "antisymmetry_second": mx(T + T.transpose(0, 1, 3, 2)),
        "pair": mx(T - T.transpose(2, 3, 0, 1)),
        "bianchi": mx(cyclic_sum(T)),
    }


def symmetrize_pairs(T: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto tensors antisymmetric in each pair and symmetric under pair swap."""
    A = 0.5 * (T - T.transpose(1, 0, 2, 3))
    A = 0.5 * (A - A.transpose(0, 1, 3, 2))
    return 0.5 * (A + A.transpose(2, 3, 0, 1))


def _scale(T: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(T), initial=0.0)))


def _check_shape(raw) -> np.ndarray:
    T = np.asarray(raw, dtype=float)
    if T.ndim != 4 or len(set(T.shape)) != 1:
        raise DimensionMismatch(f"expected an n^4 array, got shape {T.shape}")
    return T


def make_operator(n: int, raw, sym_tol: float = SYMMETRY_TOL, bianchi_tol: float = BIANCHI_TOL) -> CurvatureOperator:
    """Validate ``raw`` and wrap it.

    Tolerances are absolute for entries of size <= 1 and relative above that.
    The stored array is the exact symmetrization of ``raw``.
    """
    T = _check_shape(raw)
    if T.shape[0] != n:
        raise DimensionMismatch(f"array has dimension {T.shape[0]}, expected {n}")
    res = symmetry_residuals(T)
    s = _scale(T)
    for which in ("antisymmetry_first", "antisymmetry_second", "pair"):
        if res[which] > sym_tol * s:
            raise SymmetryViolation(which, res[which])
    if res["bianchi"] > bianchi_tol * s:
        raise BianchiViolation(res["bianchi"])
    return CurvatureOperator(_frozen(symmetrize_pairs(T)))


def _operator(T: np.ndarray) -> CurvatureOperator:
    # internal constructor for results that satisfy the identities by construction
    return CurvatureOperator(_frozen(symmetrize_pairs(T)))


def project_bianchi(raw, sym_tol: float = SYMMETRY_TOL) -> CurvatureOperator:
    """Orthogonal projection ``T - b(T)`` onto the kernel of the cyclic-sum map."""
    T = _check_shape(raw)
    res = symmetry_residuals(T)
    s = _scale(T)
    for which in ("antisymmetry_first", "antisymmetry_second", "pair"):
        if res[which] > sym_tol * s:
            raise SymmetryViolation(which, res[which])
    T = symmetrize_pairs(T)
    return _operator(T - cyclic_sum(T) / 3.0)


def sphere(n: int) -> CurvatureOperator:
    d = np.eye(n)
    return _operator(np.einsum("ik,jl->ijkl", d, d) - np.einsum("il,jk->ijkl", d, d))


def zero(n: int) -> CurvatureOperator:
    return CurvatureOperator(_frozen(np.zeros((n,) * 4)))


def identity_form(n: int) -> SymmetricBilinear:
    return SymmetricBilinear(np.eye(n))


def levi_civita(n: int) -> np.ndarray:
    """Totally antisymmetric symbol (rank n)."""
    eps = np.zeros((n,) * n)
    from itertools import permutations

    for perm in permutations(range(n)):
        inv = sum(1 for a in range(n) for b in range(a + 1, n) if perm[a] > perm[b])
        eps[perm] = -1.0 if inv % 2 else 1.0
    return eps


def rotate_tensor(T: np.ndarray, g: np.ndarray) -> np.ndarray:
    return np.einsum("ia,jb,kc,ld,abcd->ijkl", g, g, g, g, T, optimize=True)


def random_rotation(n: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


# ---------------------------------------------------------------------------
# Lambda^2 view
# ---------------------------------------------------------------------------


def pair_index(n: int) -> list[tuple[int, int]]:
    return list(combinations(range(n), 2))


def to_lambda2(R) -> np.ndarray:
    T = R.entries if isinstance(R, CurvatureOperator) else np.asarray(R, dtype=float)
    pairs = pair_index(T.shape[0])
    I = np.array([p[0] for p in pairs])
    J = np.array([p[1] for p in pairs])
    return 2.0 * T[I[:, None], J[:, None], I[None, :], J[None, :]]


def from_lambda2(M, n: int | None = None) -> np.ndarray:
    """Dense array from a Lambda^2 operator matrix; no validation."""
    M = np.asarray(M, dtype=float)
    N = M.shape[0]
    if n is None:
        n = int(round((1 + np.sqrt(1 + 8 * N)) / 2))
    if M.shape != (n * (n - 1) // 2,) * 2:
        raise DimensionMismatch(f"lambda2 matrix of shape {M.shape} does not fit n={n}")
    T = np.zeros((n,) * 4)
    pairs = pair_index(n)
    for a, (i, j) in enumerate(pairs):
        for b, (k, l) in enumerate(pairs):
            v = 0.5 * M[a, b]
            T[i, j, k, l] = v
            T[j, i, k, l] = -v
            T[i, j, l, k] = -v
            T[j, i, l, k] = v
    return T


# ---------------------------------------------------------------------------
# contractions
# ---------------------------------------------------------------------------


def ricci(R: CurvatureOperator) -> SymmetricBilinear:
    return SymmetricBilinear(np.einsum("ijkj->ik", R.entries))


def scalar(R: CurvatureOperator) -> float:
    return float(np.einsum("ijij->", R.entries))


def ricci_traceless(R: CurvatureOperator) -> SymmetricBilinear:
    ric = ricci(R)
    return SymmetricBilinear(ric.entries - (ric.trace() / R.n) * np.eye(R.n))


def kulkarni_nomizu_array(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return (
        np.einsum("ik,jl->ijkl", A, B)
        - np.einsum("il,jk->ijkl", A, B)
        - np.einsum("jk,il->ijkl", A, B)
        + np.einsum("jl,ik->ijkl", A, B)
    )


def kulkarni_nomizu(A, B) -> CurvatureOperator:
    A, B = _mat(A), _mat(B)
    if A.shape != B.shape:
        raise DimensionMismatch(f"Kulkarni-Nomizu factors of shapes {A.shape} and {B.shape}")
    return _operator(kulkarni_nomizu_array(A, B))


def square(R: CurvatureOperator) -> np.ndarray:
    """(R^2)_ijkl = sum_pq R_ijpq R_klpq, returned raw."""
    T = R.entries
    n = R.n
    M = T.reshape(n * n, n * n)
    return (M @ M.T).reshape((n,) * 4)


def sharp(R: CurvatureOperator) -> np.ndarray:
    """(R#)_ijkl = 2 sum_pq (R_ipkq R_jplq - R_iplq R_jpkq), returned raw."""
    T = R.entries
    n = R.n
    # B[(i,k),(j,l)] = sum_pq R_ipkq R_jplq
    X = T.transpose(0, 2, 1, 3).reshape(n * n, n * n)
    B = (X @ X.T).reshape(n, n, n, n).transpose(0, 2, 1, 3)  # B[i,j,k,l]
    return 2.0 * (B - B.transpose(0, 1, 3, 2))


def q_array(T: np.ndarray) -> np.ndarray:
    """Q on a raw (symmetric) array; used by the integrator's inner stages."""
    n = T.shape[0]
    M = T.reshape(n * n, n * n)
    sq = (M @ M.T).reshape((n,) * 4)
    X = T.transpose(0, 2, 1, 3).reshape(n * n, n * n)
    B = (X @ X.T).reshape(n, n, n, n).transpose(0, 2, 1, 3)
    return sq + 2.0 * (B - B.transpose(0, 1, 3, 2))


def q(R: CurvatureOperator) -> CurvatureOperator:
    """Hamilton's reaction term Q(R) = R^2 + R#."""
    return _operator(q_array(R.entries))


# ---------------------------------------------------------------------------
# l_ab and D_ab
# ---------------------------------------------------------------------------


def _id_kn(n: int) -> np.ndarray:
    d = np.eye(n)
    return kulkarni_nomizu_array(d, d)


def weyl(R: CurvatureOperator) -> CurvatureOperator:
    """Weyl part, W = R - Ric0 (kn) id / (n-2) - scal id (kn) id / (2n(n-1))."""
    n = R.n
    if n < 3:
        return zero(n)
    ric0 = ricci_traceless(R).entries
    T = R.entries - kulkarni_nomizu_array(ric0, np.eye(n)) / (n - 2) - scalar(R) * _id_kn(n) / (2 * n * (n - 1))
    return _operator(T)


def l_ab(R: CurvatureOperator, p: TransformParams) -> CurvatureOperator:
    n = R.n
    ric0 = ricci_traceless(R).entries
    T = R.entries + p.b * kulkarni_nomizu_array(ric0, np.eye(n)) + (p.a / n) * scalar(R) * _id_kn(n)
    return _operator(T)


def inverse_l_ab(R: CurvatureOperator, p: TransformParams) -> CurvatureOperator:
    n = R.n
    c_ric = 1.0 + (n - 2) * p.b
    c_scal = 1.0 + 2 * (n - 1) * p.a
    if abs(c_ric) <= SINGULAR_TOL or abs(c_scal) <= SINGULAR_TOL:
        raise SingularTransform(f"l_ab not invertible: 1+(n-2)b={c_ric:.3e}, 1+2(n-1)a={c_scal:.3e}")
    ric0 = ricci_traceless(R).entries / c_ric
    scal = scalar(R) / c_scal
    T = R.entries - p.b * kulkarni_nomizu_array(ric0, np.eye(n)) - (p.a / n) * scal * _id_kn(n)
    return _operator(T)


def d_ab_coefficients(n: int, p: TransformParams) -> dict[str, float]:
    a, b = p.a, p.b
    denom = n + 2 * n * (n - 1) * a
    if abs(denom) <= SINGULAR_TOL:
        raise SingularTransform(f"D_ab undefined: n + 2n(n-1)a = {denom:.3e}")
    c_ric0 = (n - 2) * b * b - 2 * (a - b)
    if abs(c_ric0) <= 1e-12 * max(1.0, abs(a)):
        c_ric0 = 0.0  # admissible pairs: the term vanishes identically, not just to rounding
    return {
        "ric0_ric0": c_ric0,
        "ric_ric": 2 * a,
        "ric0sq_id": 2 * b * b,
        "id_id": (n * b * b * (1 - 2 * b) - 2 * (a - b) * (1 - 2 * b + n * b * b)) / denom,
    }


def d_ab(R: CurvatureOperator, p: TransformParams) -> CurvatureOperator:
    """Extra reaction term of the l_ab-conjugated ODE."""
    n = R.n
    c = d_ab_coefficients(n, p)
    return _operator(_d_ab_array(R.entries, c))


def _d_ab_array(T: np.ndarray, c: dict[str, float]) -> np.ndarray:
    n = T.shape[0]
    d = np.eye(n)
    ric = np.einsum("ijkj->ik", T)
    ric0 = ric - (np.trace(ric) / n) * d
    kn = kulkarni_nomizu_array
    return (
        c["ric0_ric0"] * kn(ric0, ric0)
        + c["ric_ric"] * kn(ric, ric)
        + c["ric0sq_id"] * kn(ric0 @ ric0, d)
        + c["id_id"] * float(np.sum(ric0 * ric0)) * kn(d, d)
    )


# ---------------------------------------------------------------------------
# product extensions
# ---------------------------------------------------------------------------


def extend_flat(R: CurvatureOperator) -> CurvatureOperator:
    """Curvature of R x (flat line) on R^{n+1}."""
    n = R.n
    T = np.zeros((n + 1,) * 4)
    T[:n, :n, :n, :n] = R.entries
    return CurvatureOperator(_frozen(T))


def extend_sphere2(R: CurvatureOperator) -> CurvatureOperator:
    """Curvature of R x S^2(1) on R^{n+2}."""
    n = R.n
    T = np.zeros((n + 2,) * 4)
    T[:n, :n, :n, :n] = R.entries
    T[n:, n:, n:, n:] = sphere(2).entries
    return CurvatureOperator(_frozen(T))


# ---------------------------------------------------------------------------
# evaluation on 2-forms
# ---------------------------------------------------------------------------


def evaluate_on_2forms(R: CurvatureOperator, phi: TwoForm, psi: TwoForm | None = None) -> float:
    """R(phi, psi) = (1/4) sum R_ijkl phi_ij psi_kl, so R(e_i^e_j, e_i^e_j) = R_ijij."""
    if psi is None:
        psi = phi
    if phi.m != R.n or psi.m != R.n:
        raise DimensionMismatch(f"two-form dimension {phi.m} vs operator dimension {R.n}")
    return 0.25 * float(np.einsum("ijkl,ij,kl->", R.entries, phi.entries, psi.entries))


def evaluate(R: CurvatureOperator | np.ndarray, u, v, w, x) -> float:
    """Multilinear evaluation R(u, v, w, x)."""
    T = R.entries if isinstance(R, CurvatureOperator) else R
    return float(np.einsum("ijkl,i,j,k,l->", T, u, v, w, x))


# ---------------------------------------------------------------------------
# JSON file format
# ---------------------------------------------------------------------------


def to_json_dict(R: CurvatureOperator, layout: str = "dense", meta: dict[str, Any] | None = None) -> dict[str, Any]:
    if layout == "dense":
        data = R.entries.ravel().tolist()
    elif layout == "lambda2":
        data = R.lambda2().ravel().tolist()
    else:
        raise ValueError(f"unknown layout {layout!r}")
    return {"n": R.n, "layout": layout, "data": data, "meta": meta or {}}


def from_json_dict(d: dict[str, Any]) -> CurvatureOperator:
    n = int(d["n"])
    data = np.asarray(d["data"], dtype=float)
    layout = d.get("layout", "dense")
    if layout == "dense":
        if data.size != n ** 4:
            raise DimensionMismatch(f"dense layout needs {n ** 4} entries, got {data.size}")
        raw = data.reshape((n,) * 4)
    elif layout == "lambda2":
        N = n * (n - 1) // 2
        if data.size != N * N:
            raise DimensionMismatch(f"lambda2 layout needs {N * N} entries, got {data.size}")
        M = data.reshape(N, N)
        res = float(np.max(np.abs(M - M.T), initial=0.0))
        if res > SYMMETRY_TOL * _scale(M):
            raise SymmetryViolation("pair", res)
        raw = from_lambda2(M, n)
    else:
        raise ValueError(f"unknown layout {layout!r}")
    return make_operator(n, raw)


def save_operator(path, R: CurvatureOperator, layout: str = "dense", meta=None) -> None:
    Path(path).write_text(json.dumps(to_json_dict(R, layout, meta)))


def load_operator(path) -> CurvatureOperator:
    return from_json_dict(json.loads(Path(path).read_text()))
