"""Seeded operator generators.

Every generator derives the stream for item ``i`` from ``(seed, i)`` so a
list is reproducible item by item, whatever order it is consumed in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .algebra import (
    CurvatureOperator,
    from_lambda2,
    kulkarni_nomizu,
    project_bianchi,
    sphere,
)
from .cones import SET_E, ConeSpec, evaluate_condition, membership, parametric_oracle, two_positive_margin

KINDS = ("gaussian_bianchi", "two_positive", "sphere_perturbed", "product_sphere", "boundary_adjacent")


def item_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index), int(stream)])


def gaussian_bianchi(n: int, rng: np.random.Generator, scale: float = 1.0) -> CurvatureOperator:
    """Bianchi projection of a tensor whose Lambda^2 matrix is (G + G^T)/2, G iid N(0, 1)."""
    N = n * (n - 1) // 2
    G = rng.standard_normal((N, N))
    return project_bianchi(from_lambda2(scale * 0.5 * (G + G.T), n))


def unit_gaussian(n: int, rng: np.random.Generator) -> CurvatureOperator:
    R = gaussian_bianchi(n, rng)
    return R / R.norm()


def two_positive(n: int, rng: np.random.Generator, step: float = 0.05) -> CurvatureOperator:
    """Shift a Gaussian operator by c I, c a multiple of ``step``, until lambda1 + lambda2 > 0."""
    R = gaussian_bianchi(n, rng)
    I = sphere(n)
    c = 0.0
    while two_positive_margin(R + c * I) <= 0:
        c += step
    return R + c * I


def sphere_perturbed(n: int, rng: np.random.Generator, sigma: float) -> CurvatureOperator:
    if sigma == 0:
        return sphere(n)
    return sphere(n) + sigma * gaussian_bianchi(n, rng)


def product_sphere(n: int, k: int) -> CurvatureOperator:
    """Curvature of S^k x R^{n-k}: (1/2) P_k (kn) P_k."""
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    P = np.diag([1.0] * k + [0.0] * (n - k))
    return 0.5 * kulkarni_nomizu(P, P)


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    n: int
    count: int = 1
    seed: int = 0
    sigma: float = 0.1
    k: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.kind == "boundary_adjacent" and self.n < 4:
            raise ValueError("boundary_adjacent needs n >= 4")


def generate_one(spec: GeneratorSpec, index: int) -> CurvatureOperator:
    """Item ``index`` of ``generate(spec)``, computed on its own."""
    rng = item_rng(spec.seed, index)
    if spec.kind == "gaussian_bianchi":
        return gaussian_bianchi(spec.n, rng)
    if spec.kind == "two_positive":
        return two_positive(spec.n, rng)
    if spec.kind == "sphere_perturbed":
        return sphere_perturbed(spec.n, rng, spec.sigma)
    if spec.kind == "boundary_adjacent":
        return boundary_adjacent(spec.n, rng, seed=spec.seed)[0]
    return product_sphere(spec.n, spec.n if spec.k is None else spec.k)


def generate(spec: GeneratorSpec) -> list[CurvatureOperator]:
    return [generate_one(spec, i) for i in range(spec.count)]


# ---------------------------------------------------------------------------
# samples for the invariance and inclusion experiments
# ---------------------------------------------------------------------------


def mixed_sample(n: int, rng: np.random.Generator) -> CurvatureOperator:
    """A unit Gaussian direction, rescaled and shifted along I so that about half land in E."""
    G = unit_gaussian(n, rng)
    return rng.uniform(0.2, 3.0) * G + rng.uniform(-0.1, 0.6) * sphere(n)


def interior_member(n: int, rng: np.random.Generator, spec: ConeSpec = SET_E, *, min_margin: float = 1e-3,
                    starts: int = 32, seed: int = 0) -> CurvatureOperator:
    """A member with margin >= min_margin: a shifted Gaussian, scaled down toward 0 when needed.

    Scaling down matters for E, which is not a cone: small multiples of
    operators in the interior of TILDE_C lie in E even when they miss HAT_C.
    """
    I = sphere(n)
    while True:
        R = rng.uniform(0.3, 2.0) * unit_gaussian(n, rng) + rng.uniform(0.2, 1.0) * I
        for c in (1.0, 0.5, 0.25, 0.1):
            m = membership(c * R, spec, starts, seed).margin
            if m >= min_margin:
                return c * R


def bisect_to_boundary(inside: CurvatureOperator, outside: CurvatureOperator, spec: ConeSpec = SET_E, *,
                       lo: float = 1e-4, hi: float = 1e-3, starts: int = 32, seed: int = 0,
                       max_iter: int = 80):
    """Point on [inside, outside] whose margin lies in [lo, hi]; returns (operator, report).

    The margin m(s) along the segment is a minimum of functions affine in s,
    hence concave, and the witness at s gives an affine majorant. Newton on
    that majorant from an outside point therefore stays outside and
    converges monotonically; steps that leave the bracket fall back to
    bisection.
    """
    target = 0.5 * (lo + hi)
    a, b = 0.0, 1.0
    s = 1.0
    warm = None
    for _ in range(max_iter):
        R = (1.0 - s) * inside + s * outside
        rep = parametric_oracle(R, spec, starts, seed, warm=warm)
        warm = rep.witness.vectors
        if s == 1.0 and rep.margin > hi:
            raise ValueError(f"outside point has margin {rep.margin:.3e} above the window [{lo:g}, {hi:g}]")
        if lo <= rep.margin <= hi:
            final = membership(R, spec, starts, seed, warm=warm)
            if lo <= final.margin <= hi:
                return R, final
            rep = final
        if rep.margin > hi:
            a = s
        else:
            b = s
        slope = (evaluate_condition(outside, rep.witness, rep.params, spec)
                 - evaluate_condition(inside, rep.witness, rep.params, spec))
        step = s + (target - rep.margin) / slope if slope < 0 else math.nan
        s = step if a < step < b else 0.5 * (a + b)
    raise RuntimeError("bisection did not reach the target margin window")


def boundary_adjacent(n: int, rng: np.random.Generator, spec: ConeSpec = SET_E, *, lo: float = 1e-4,
                      hi: float = 1e-3, starts: int = 32, seed: int = 0):
    """Random member, random non-member direction, bisected to a margin in [lo, hi]."""
    inside = interior_member(n, rng, spec, min_margin=max(2 * hi, 1e-2), starts=starts, seed=seed)
    direction = unit_gaussian(n, rng)
    L = 2.0
    while parametric_oracle(inside + L * direction, spec, starts, seed).margin >= 0:
        L *= 2.0
    return bisect_to_boundary(inside, inside + L * direction, spec, lo=lo, hi=hi, starts=starts, seed=seed)
