"""Named property suites behind ``curvlab verify``.

Each suite returns a list of :class:`Check` records carrying the measured
quantity next to its threshold, so callers can print, gate, or assert on
them. Sample sizes are keyword arguments; the defaults are the full-size
runs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .algebra import (
    TransformParams,
    cyclic_sum,
    d_ab,
    d_ab_coefficients,
    extend_sphere2,
    max_admissible_b,
    q,
    random_rotation,
    ricci,
    sharp,
    sphere,
    square,
)
from .cones import (
    HAT_C,
    SET_E,
    TILDE_C,
    UNDECIDED,
    ConeSpec,
    membership,
)
from .flow import (
    FlowConfig,
    FlowVariant,
    Scheme,
    boundary_derivative_check,
    closed_form_sphere,
    integrate,
)
from .generators import (
    boundary_adjacent,
    bisect_to_boundary,
    gaussian_bianchi,
    interior_member,
    item_rng,
    mixed_sample,
    two_positive,
    unit_gaussian,
)

MEMBER_TOL = 1e-7


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name} measured={self.measured:.6g} threshold={self.threshold:.6g}"
        return f"{text} {self.detail}" if self.detail else text

    def to_dict(self) -> dict:
        return asdict(self)


def _le(name, measured, threshold, detail=""):
    return Check(name, bool(measured <= threshold), float(measured), float(threshold), detail)


def _ge(name, measured, threshold, detail=""):
    return Check(name, bool(measured >= threshold), float(measured), float(threshold), detail)


# ---------------------------------------------------------------------------
# algebra
# ---------------------------------------------------------------------------


def brute_force_q(T: np.ndarray) -> np.ndarray:
    """R^2 + R# by explicit loops over all indices; independent of the vectorized code."""
    n = T.shape[0]
    out = np.zeros_like(T)
    for i, j, k, l in itertools.product(range(n), repeat=4):
        sq = 0.0
        sh = 0.0
        for p in range(n):
            for r in range(n):
                sq += T[i, j, p, r] * T[k, l, p, r]
                sh += T[i, p, k, r] * T[j, p, l, r] - T[i, p, l, r] * T[j, p, k, r]
        out[i, j, k, l] = sq + 2.0 * sh
    return out


def algebra_suite(seed: int = 0, samples: int = 100, brute: int = 5) -> list[Check]:
    checks = []
    err = max(float(np.abs(q(sphere(n)).entries - 2 * (n - 1) * sphere(n).entries).max()) for n in range(3, 9))
    checks.append(_le("q_sphere_closed_form", err, 1e-12, "n=3..8"))

    bianchi, nonzero = 0.0, 0
    for i in range(samples):
        n = 4 + i % 3
        R = gaussian_bianchi(n, item_rng(seed, i, 1))
        r2 = R.norm() ** 2
        bianchi = max(bianchi, float(np.abs(cyclic_sum(q(R).entries)).max()) / r2)
        c_sq = float(np.abs(cyclic_sum(square(R))).max())
        c_sh = float(np.abs(cyclic_sum(sharp(R))).max())
        nonzero += c_sq >= 1e-3 * r2 and c_sh >= 1e-3 * r2
    checks.append(_le("q_bianchi_residual", bianchi, 1e-9, f"{samples} operators, relative to |R|^2"))
    checks.append(_ge("square_sharp_cyclic_nonzero", nonzero, math.ceil(0.95 * samples), f"of {samples}"))

    worst = 0.0
    for i in range(brute):
        R = gaussian_bianchi(4, item_rng(seed, i, 2))
        worst = max(worst, float(np.abs(brute_force_q(R.entries) - q(R).entries).max()) / R.norm() ** 2)
    checks.append(_le("q_matches_brute_force", worst, 1e-12, f"{brute} operators, n=4"))

    worst = 0.0
    for i in range(samples):
        n = 4 + i % 2
        R = gaussian_bianchi(n, item_rng(seed, i, 3))
        S = sharp(extend_sphere2(R))[:n, :n, :n, :n]
        worst = max(worst, float(np.abs(S - sharp(R)).max()) / R.norm() ** 2)
    checks.append(_le("sharp_of_sphere_extension", worst, 1e-9, f"{samples} operators, n=4,5"))

    worst = 0.0
    for i in range(20):
        rng = item_rng(seed, i, 4)
        R = gaussian_bianchi(5, rng)
        g = random_rotation(5, rng)
        worst = max(worst, float(np.abs(q(R.rotate(g)).entries - q(R).rotate(g).entries).max()) / R.norm() ** 2)
    checks.append(_le("q_equivariance", worst, 1e-9, "20 rotations, n=5"))

    worst = 0.0
    for n in range(4, 9):
        b = 0.5 * max_admissible_b(n)
        c = d_ab_coefficients(n, TransformParams.admissible(n, b))
        worst = max(worst, abs(c["ric0_ric0"]))
    checks.append(_le("d_ab_ric0_ric0_coefficient", worst, 0.0, "admissible (a, b), n=4..8"))
    return checks


# ---------------------------------------------------------------------------
# oracle equivalence
# ---------------------------------------------------------------------------


def equivalence_suite(seed: int = 0, samples: int = 200, starts: int = 64, agreement_tol: float = 5e-6,
                      band: float = 1e-6) -> list[Check]:
    """Extension and parametric oracles on seeded n = 4 operators.

    For SET_E the extension minimum is capped at zero (frames split between
    the two factors see only mixed planes), so the raw agreement check fails
    on every interior member; the capped comparison and the sign test are
    what the two oracles can share.
    """
    raw = {TILDE_C.label: [], SET_E.label: []}
    capped = {TILDE_C.label: [], SET_E.label: []}
    signs = {TILDE_C.label: 0, SET_E.label: 0}
    members = {TILDE_C.label: 0, SET_E.label: 0}
    undecided = 0
    for i in range(samples):
        R = mixed_sample(4, item_rng(seed, i, 10))
        for spec in (TILDE_C, SET_E):
            rep = membership(R, spec, starts, seed)
            par, ext = (rep.margin, rep.other_margin) if rep.method == "parametric" else (rep.other_margin, rep.margin)
            raw[spec.label].append(abs(par - ext))
            capped[spec.label].append(rep.agreement)
            signs[spec.label] += (par > band and ext < -band) or (par < -band and ext > band)
            members[spec.label] += bool(rep.member)
            undecided += rep.decision == UNDECIDED
    out = []
    for label in (TILDE_C.label, SET_E.label):
        mix = f"{members[label]} members of {samples}"
        out.append(_le(f"agreement_{label}", max(raw[label]), agreement_tol, mix))
        if label == SET_E.label:
            out.append(_le(f"agreement_{label}_capped", max(capped[label]), agreement_tol, "extension vs min(parametric, 0)"))
        out.append(_le(f"sign_disagreements_{label}", signs[label], 0, f"outside +-{band:g}"))
    out.append(_le("undecided", undecided, 0))
    return out


# ---------------------------------------------------------------------------
# inclusions
# ---------------------------------------------------------------------------


def _hat_member_sample(n, rng):
    return rng.uniform(0.2, 3.0) * unit_gaussian(n, rng) + rng.uniform(0.3, 1.5) * sphere(n)


def inclusions_suite(seed: int = 0, samples: int = 500, pairs: int = 100, starts: int = 64,
                     tol: float = MEMBER_TOL) -> list[Check]:
    chain = 0
    in_e = []
    for i in range(samples):
        R = mixed_sample(4, item_rng(seed, i, 20))
        hat = membership(R, HAT_C, starts, seed)
        e = membership(R, SET_E, starts, seed)
        tilde = membership(R, TILDE_C, starts, seed)
        chain += (hat.margin >= -tol and e.margin < -tol) + (e.margin >= -tol and tilde.margin < -tol)
        if e.margin >= -tol:
            in_e.append(R)
    out = [_le("hat_in_e_in_tilde", chain, 0, f"{samples} samples, {len(in_e)} in E")]

    shifted = 0
    for R in in_e[:pairs]:
        shifted += membership(R + sphere(4), HAT_C, starts, seed).margin < -tol
    out.append(_le("e_plus_identity_in_hat", shifted, 0, f"{min(pairs, len(in_e))} members of E"))

    hats = []
    j = 0
    while len(hats) < pairs:
        P = _hat_member_sample(4, item_rng(seed, j, 21))
        j += 1
        if membership(P, HAT_C, starts, seed).margin >= -tol:
            hats.append(P)
    added = 0
    for R, P in zip(in_e[:pairs], hats):
        added += membership(R + P, SET_E, starts, seed).margin < -tol
    out.append(_le("e_plus_hat_in_e", added, 0, f"{min(pairs, len(in_e))} pairs"))

    missed = 0
    for i in range(pairs):
        R = two_positive(4, item_rng(seed, i, 22))
        missed += (membership(R, SET_E, starts, seed).margin < -tol) + (membership(R, TILDE_C, starts, seed).margin < -tol)
    out.append(_le("two_positive_in_e_and_tilde", missed, 0, f"{pairs} samples"))

    worst = math.inf
    for i, R in enumerate(in_e[:pairs]):
        rng = item_rng(seed, i, 23)
        b = rng.uniform(0.05, 1.0) * max_admissible_b(4)
        worst = min(worst, float(np.linalg.eigvalsh(d_ab(R, TransformParams.admissible(4, b)).lambda2())[0]))
    out.append(_ge("d_ab_psd_on_e", worst, -1e-7, f"min Lambda^2 eigenvalue over {min(pairs, len(in_e))} members"))

    worst = math.inf
    count = 0
    i = 0
    while count < pairs:
        R = mixed_sample(4, item_rng(seed, i, 24))
        i += 1
        if membership(R, TILDE_C, starts, seed).margin >= -tol:
            worst = min(worst, float(np.linalg.eigvalsh(ricci(R).entries)[0]))
            count += 1
    out.append(_ge("ricci_nonnegative_on_tilde", worst, -1e-7, f"{pairs} members"))
    return out


# ---------------------------------------------------------------------------
# integrator
# ---------------------------------------------------------------------------


def rk4_sphere_error(n: int, h: float, t_end: float) -> float:
    """Max relative error of fixed-step RK4 from I against the closed form over [0, t_end]."""
    steps = int(round(t_end / h))
    cfg = FlowConfig(scheme=Scheme.RK4_FIXED, h=h, max_time=steps * h, max_steps=steps + 1,
                     sample_every=1, max_trace=math.inf)
    tr = integrate(sphere(n), cfg)
    I = sphere(n).entries
    return max(
        float(np.abs(s.R.entries - closed_form_sphere(n, s.t) * I).max()) / float(closed_form_sphere(n, s.t))
        for s in tr.samples
    )


def rk4_end_error(n: int, h: float, t_end: float) -> float:
    steps = int(round(t_end / h))
    cfg = FlowConfig(scheme=Scheme.RK4_FIXED, h=h, max_time=steps * h, max_steps=steps + 1, max_trace=math.inf)
    tr = integrate(sphere(n), cfg)
    return float(np.abs(tr.samples[-1].R.entries - closed_form_sphere(n, tr.samples[-1].t) * sphere(n).entries).max())


def integrator_suite(dims=(4, 5, 6), h: float = 1e-4) -> list[Check]:
    out = []
    for n in dims:
        t_end = 0.9 / (2 * (n - 1))
        out.append(_le(f"rk4_closed_form_n{n}", rk4_sphere_error(n, h, t_end), 1e-6, f"h={h:g}, t<={t_end:.6g}"))
    errs = [rk4_end_error(4, hh, 0.1) for hh in (0.01, 0.005, 0.0025)]
    order = min(math.log2(errs[0] / errs[1]), math.log2(errs[1] / errs[2]))
    out.append(_ge("rk4_order", order, 3.9, "h=0.01,0.005,0.0025 on [0,0.1]"))
    n = 4
    tr = integrate(sphere(n), FlowConfig(sample_growth=1.25))
    rel = max(
        float(np.abs(s.R.entries / closed_form_sphere(n, s.t) - sphere(n).entries).max()) for s in tr.samples
    )
    out.append(_le("adaptive_closed_form", rel, 1e-6, f"{tr.terminated_by} at t={tr.samples[-1].t:.6g}"))
    return out


# ---------------------------------------------------------------------------
# invariance along the flow
# ---------------------------------------------------------------------------


def _flow_margin(R, spec: ConeSpec, variant: FlowVariant, seed: int, starts: int, sample_growth: float):
    cfg = FlowConfig(variant=variant, monitors=(spec,), seed=seed, starts=starts, sample_growth=sample_growth)
    return integrate(R, cfg).min_margin(spec.label)


def invariance_suite(seed: int = 0, plain: int = 20, bohm_wilking: int = 10, witnesses: int = 50,
                     tilde: int = 0, starts: int = 16, sample_growth: float = 1.5,
                     tol: float = 1e-5, derivative_tol: float = 1e-4,
                     progress: Callable[[str], None] | None = None) -> list[Check]:
    """Boundary-adjacent starts flowed until the trace grows 1000-fold, plus boundary derivatives.

    ``tilde`` adds PLAIN runs monitored for TILDE_C.
    """
    say = progress or (lambda _msg: None)
    out = []
    worst = math.inf
    for i in range(plain):
        R, _ = boundary_adjacent(4, item_rng(seed, i, 30), SET_E, starts=32, seed=seed)
        worst = min(worst, _flow_margin(R, SET_E, FlowVariant.plain(), seed + i, starts, sample_growth))
        say(f"plain {i}: min margin so far {worst:.3g}")
    if plain:
        out.append(_ge("plain_flow_preserves_e", worst, -tol, f"{plain} starts"))

    worst = math.inf
    b_max = max_admissible_b(4)
    for i in range(bohm_wilking):
        rng = item_rng(seed, i, 31)
        R, _ = boundary_adjacent(4, rng, SET_E, starts=32, seed=seed)
        params = TransformParams.admissible(4, rng.uniform(0.1, 1.0) * b_max)
        worst = min(worst, _flow_margin(R, SET_E, FlowVariant.bohm_wilking(params), seed + i, starts, sample_growth))
        say(f"bohm-wilking {i}: min margin so far {worst:.3g}")
    if bohm_wilking:
        out.append(_ge("bohm_wilking_flow_preserves_e", worst, -tol, f"{bohm_wilking} starts"))

    worst = math.inf
    for i in range(tilde):
        R, _ = boundary_adjacent(4, item_rng(seed, i, 32), TILDE_C, starts=32, seed=seed)
        worst = min(worst, _flow_margin(R, TILDE_C, FlowVariant.plain(), seed + i, starts, sample_growth))
        say(f"tilde {i}: min margin so far {worst:.3g}")
    if tilde:
        out.append(_ge("plain_flow_preserves_tilde", worst, -tol, f"{tilde} starts"))

    worst = math.inf
    for i in range(witnesses):
        rng = item_rng(seed, i, 33)
        inside = interior_member(4, rng, SET_E, min_margin=1e-2, starts=32, seed=seed)
        direction = unit_gaussian(4, rng)
        L = 2.0
        while membership(inside + L * direction, SET_E, 32, seed).margin >= 0:
            L *= 2.0
        W, rep = bisect_to_boundary(inside, inside + L * direction, SET_E, lo=0.0, hi=1e-7, starts=32, seed=seed)
        val = boundary_derivative_check(W, rep.witness, rep.params, margin=rep.margin)
        worst = min(worst, val)
        say(f"witness {i}: derivative {val:.3g}")
    if witnesses:
        out.append(_ge("boundary_derivative", worst, -derivative_tol, f"{witnesses} bisected witnesses"))
    return out


SUITES = {
    "algebra": algebra_suite,
    "equivalence": equivalence_suite,
    "inclusions": inclusions_suite,
    "invariance": invariance_suite,
    "integrator": integrator_suite,
}
