import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvlab.algebra import (
    SymmetricBilinear,
    TransformParams,
    TwoForm,
    cyclic_sum,
    d_ab,
    d_ab_coefficients,
    evaluate,
    evaluate_on_2forms,
    extend_flat,
    extend_sphere2,
    from_json_dict,
    from_lambda2,
    inverse_l_ab,
    kulkarni_nomizu,
    l_ab,
    levi_civita,
    load_operator,
    make_operator,
    max_admissible_b,
    project_bianchi,
    q,
    random_rotation,
    ricci,
    ricci_traceless,
    save_operator,
    scalar,
    sharp,
    sphere,
    square,
    symmetry_residuals,
    to_json_dict,
    to_lambda2,
    weyl,
    zero,
)
from curvlab.errors import BianchiViolation, DimensionMismatch, SingularTransform, SymmetryViolation
from curvlab.suites import brute_force_q

from conftest import random_operator


def sphere_raw(n):
    d = np.eye(n)
    return np.einsum("ik,jl->ijkl", d, d) - np.einsum("il,jk->ijkl", d, d)


def random_pair_symmetric(n, rng):
    """Antisymmetric in each pair and symmetric under pair swap, no Bianchi."""
    N = n * (n - 1) // 2
    G = rng.standard_normal((N, N))
    return from_lambda2(G + G.T, n)


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


class TestMakeOperator:
    def test_sphere_is_valid(self):
        R = make_operator(4, sphere_raw(4))
        assert R.n == 4
        assert max(symmetry_residuals(R.entries).values()) == 0.0

    def test_zero_is_valid(self):
        R = make_operator(4, np.zeros((4,) * 4))
        assert np.all(R.entries == 0)

    def test_lone_entries_violate_antisymmetry(self):
        raw = np.zeros((4,) * 4)
        raw[0, 1, 0, 1] = 1.0
        raw[1, 0, 0, 1] = 1.0
        with pytest.raises(SymmetryViolation) as exc:
            make_operator(4, raw)
        assert exc.value.residual > 0

    def test_bianchi_violation(self):
        with pytest.raises(BianchiViolation):
            make_operator(4, levi_civita(4))

    @pytest.mark.parametrize("shape", [(4, 4, 4), (4, 4, 4, 3)])
    def test_bad_shape(self, shape):
        with pytest.raises(DimensionMismatch):
            make_operator(4, np.zeros(shape))

    def test_wrong_n(self):
        with pytest.raises(DimensionMismatch):
            make_operator(5, np.zeros((4,) * 4))

    def test_entries_are_read_only(self):
        R = sphere(4)
        with pytest.raises(ValueError):
            R.entries[0, 1, 0, 1] = 2.0

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_span_dimension(self, n):
        rng = np.random.default_rng(n)
        vecs = [project_bianchi(random_pair_symmetric(n, rng)).entries.ravel() for _ in range(n ** 4 // 4 + 30)]
        assert np.linalg.matrix_rank(np.array(vecs), tol=1e-8) == n * n * (n * n - 1) // 12


class TestProjectBianchi:
    def test_fixes_sphere(self):
        assert project_bianchi(sphere_raw(4)).allclose(sphere(4), atol=0)

    def test_kills_volume_form(self):
        assert np.abs(project_bianchi(levi_civita(4)).entries).max() < 1e-15

    @pytest.mark.parametrize("n", [4, 5, 6])
    def test_idempotent(self, n):
        P = project_bianchi(random_pair_symmetric(n, np.random.default_rng(n)))
        assert np.abs(project_bianchi(P.entries).entries - P.entries).max() <= 1e-12
        assert np.abs(cyclic_sum(P.entries)).max() <= 1e-12

    def test_rejects_malformed(self):
        raw = np.zeros((4,) * 4)
        raw[0, 1, 2, 3] = 1.0
        with pytest.raises(SymmetryViolation):
            project_bianchi(raw)

    def test_is_orthogonal(self):
        rng = np.random.default_rng(7)
        T = random_pair_symmetric(4, rng)
        P = project_bianchi(T).entries
        V = random_operator(4, 7).entries
        assert abs(np.sum((T - P) * V)) < 1e-12


# ---------------------------------------------------------------------------
# contractions
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n", [3, 4, 5, 7])
def test_sphere_contractions(n):
    I = sphere(n)
    assert np.allclose(ricci(I).entries, (n - 1) * np.eye(n), atol=0)
    assert scalar(I) == n * (n - 1)
    assert np.abs(ricci_traceless(I).entries).max() == 0.0


def test_ricci_matches_loop_oracle():
    R = random_operator(5, 1)
    T = R.entries
    ric = np.zeros((5, 5))
    for i, j, k in itertools.product(range(5), repeat=3):
        ric[i, k] += T[i, j, k, j]
    assert np.allclose(ricci(R).entries, ric, atol=1e-13)
    assert scalar(R) == pytest.approx(np.trace(ric), abs=1e-12)


class TestKulkarniNomizu:
    def test_identity_squared(self):
        assert kulkarni_nomizu(np.eye(4), np.eye(4)).allclose(2 * sphere(4), atol=0)

    def test_zero_factor(self):
        A = SymmetricBilinear(np.diag([1.0, 2.0, 3.0, 4.0]))
        assert np.all(kulkarni_nomizu(A, np.zeros((4, 4))).entries == 0)

    def test_symmetric_in_factors(self, rng):
        A = rng.standard_normal((5, 5))
        B = rng.standard_normal((5, 5))
        A, B = A + A.T, B + B.T
        assert kulkarni_nomizu(A, B).allclose(kulkarni_nomizu(B, A), atol=1e-14)
        assert max(symmetry_residuals(kulkarni_nomizu(A, B).entries).values()) < 1e-13

    @pytest.mark.parametrize("n", [4, 5, 6])
    def test_ricci_of_traceless_times_identity(self, n):
        rng = np.random.default_rng(n)
        A = rng.standard_normal((n, n))
        A = A + A.T
        A -= np.trace(A) / n * np.eye(n)
        T = kulkarni_nomizu(A, np.eye(n)).entries
        # contraction by explicit loops
        ric = np.zeros((n, n))
        for i, j, k in itertools.product(range(n), repeat=3):
            ric[i, k] += T[i, j, k, j]
        assert np.allclose(ric, (n - 2) * A, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            kulkarni_nomizu(np.eye(3), np.eye(4))


# ---------------------------------------------------------------------------
# Q = R^2 + R#
# ---------------------------------------------------------------------------


class TestQ:
    def test_zero(self):
        assert np.all(q(zero(5)).entries == 0)

    @pytest.mark.parametrize("n", range(3, 9))
    def test_sphere_closed_form(self, n):
        I = sphere(n).entries
        assert np.abs(square(sphere(n)) - 2 * I).max() <= 1e-12
        assert np.abs(sharp(sphere(n)) - 2 * (n - 2) * I).max() <= 1e-12
        assert np.abs(q(sphere(n)).entries - 2 * (n - 1) * I).max() <= 1e-12

    @pytest.mark.parametrize("n", [4, 5])
    def test_sphere_brute_force(self, n):
        I = sphere(n).entries
        assert np.abs(brute_force_q(I) - 2 * (n - 1) * I).max() <= 1e-12

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_brute_force(self, seed):
        R = random_operator(4, seed)
        assert np.abs(brute_force_q(R.entries) - q(R).entries).max() <= 1e-12 * R.norm() ** 2

    @pytest.mark.parametrize("seed", range(5))
    def test_cyclic_sums(self, seed):
        R = random_operator(4, seed)
        r2 = R.norm() ** 2
        assert np.abs(cyclic_sum(q(R).entries)).max() <= 1e-10 * r2
        assert np.abs(cyclic_sum(square(R))).max() >= 1e-3 * r2
        assert np.abs(cyclic_sum(sharp(R))).max() >= 1e-3 * r2

    @pytest.mark.parametrize("n", [4, 5, 6])
    def test_equivariance(self, n):
        rng = np.random.default_rng(100 + n)
        R = random_operator(n, n)
        g = random_rotation(n, rng)
        assert np.abs(q(R.rotate(g)).entries - q(R).rotate(g).entries).max() <= 1e-9 * R.norm() ** 2

    def test_homogeneous_of_degree_two(self):
        R = random_operator(4, 3)
        assert q(2.5 * R).allclose(6.25 * q(R), atol=1e-12)


# ---------------------------------------------------------------------------
# l_ab and D_ab
# ---------------------------------------------------------------------------


class TestLab:
    def test_trivial_params(self):
        R = random_operator(4, 0)
        assert l_ab(R, TransformParams(0.0, 0.0)).allclose(R, atol=0)

    @pytest.mark.parametrize("n", [4, 5, 6])
    @pytest.mark.parametrize("ab", [(0.1, 0.2), (-0.05, 0.3), (0.4, -0.1)])
    def test_component_action(self, n, ab):
        a, b = ab
        R = random_operator(n, n)
        p = TransformParams(a, b)
        L = l_ab(R, p)
        assert scalar(L) == pytest.approx((1 + 2 * (n - 1) * a) * scalar(R), rel=1e-12, abs=1e-12)
        assert np.allclose(ricci_traceless(L).entries, (1 + (n - 2) * b) * ricci_traceless(R).entries, atol=1e-12)
        assert np.abs(weyl(L).entries - weyl(R).entries).max() <= 1e-10

    @pytest.mark.parametrize("n", [4, 5])
    def test_round_trip(self, n):
        p = TransformParams.admissible(n)
        worst = 0.0
        for i in range(50):
            R = random_operator(n, i, stream=n)
            worst = max(worst, float(np.abs(inverse_l_ab(l_ab(R, p), p).entries - R.entries).max()))
        assert worst <= 1e-10

    @pytest.mark.parametrize("ab", [(0.1, -0.5), (-1 / 6, 0.1)])
    def test_singular_inverse(self, ab):
        with pytest.raises(SingularTransform):
            inverse_l_ab(sphere(4), TransformParams(*ab))

    def test_weyl_of_sphere_vanishes(self):
        assert np.abs(weyl(sphere(5)).entries).max() < 1e-14

    @pytest.mark.parametrize("n", [4, 5, 6, 8])
    def test_admissible_range(self, n):
        b = max_admissible_b(n)
        assert b == pytest.approx((np.sqrt(2 * n * (n - 2) + 4) - 2) / (n * (n - 2)))
        p = TransformParams.admissible(n)
        assert p.is_admissible(n)
        assert 2 * p.a == pytest.approx(2 * p.b + (n - 2) * p.b ** 2)
        assert not TransformParams(p.a, 1.01 * b).is_admissible(n)
        assert not TransformParams(0.0, 0.0).is_admissible(n)
        with pytest.raises(SingularTransform):
            TransformParams(0.3, 0.1).check_admissible(n)


class TestDab:
    @pytest.mark.parametrize("n", [4, 5, 6, 7, 8])
    @pytest.mark.parametrize("frac", [0.1, 0.5, 1.0])
    def test_ric0_ric0_coefficient_vanishes(self, n, frac):
        p = TransformParams.admissible(n, frac * max_admissible_b(n))
        assert d_ab_coefficients(n, p)["ric0_ric0"] == 0.0

    def test_zero(self):
        assert np.all(d_ab(zero(4), TransformParams.admissible(4)).entries == 0)

    @pytest.mark.parametrize("n", [4, 5])
    def test_einstein(self, n):
        p = TransformParams(0.3, 0.2)
        R = weyl(random_operator(n, 5)) + 0.7 * sphere(n)
        assert np.abs(ricci_traceless(R).entries).max() < 1e-12
        expected = 4 * p.a * (scalar(R) / n) ** 2 * sphere(n).entries
        assert np.abs(d_ab(R, p).entries - expected).max() <= 1e-10

    def test_singular(self):
        n = 4
        with pytest.raises(SingularTransform):
            d_ab(sphere(n), TransformParams(-1 / (2 * (n - 1)), 0.1))

    def test_term_by_term(self):
        # independent assembly from the public pieces
        n = 4
        p = TransformParams(0.23, 0.31)
        R = random_operator(n, 11)
        ric = ricci(R).entries
        ric0 = ricci_traceless(R).entries
        a, b = p.a, p.b
        kn = lambda A, B: kulkarni_nomizu(A, B).entries  # noqa: E731
        last = (n * b * b * (1 - 2 * b) - 2 * (a - b) * (1 - 2 * b + n * b * b)) / (n + 2 * n * (n - 1) * a)
        expected = (
            ((n - 2) * b * b - 2 * (a - b)) * kn(ric0, ric0)
            + 2 * a * kn(ric, ric)
            + 2 * b * b * kn(ric0 @ ric0, np.eye(n))
            + last * np.sum(ric0 ** 2) * kn(np.eye(n), np.eye(n))
        )
        assert np.abs(d_ab(R, p).entries - expected).max() <= 1e-12 * max(1.0, np.abs(expected).max())


# ---------------------------------------------------------------------------
# extensions
# ---------------------------------------------------------------------------


class TestExtensions:
    def test_flat_zero(self):
        assert extend_flat(zero(4)).n == 5
        assert np.all(extend_flat(zero(4)).entries == 0)

    def test_flat_restriction(self):
        R = random_operator(4, 2)
        E = extend_flat(R)
        assert np.array_equal(E.entries[:4, :4, :4, :4], R.entries)
        assert scalar(E) == pytest.approx(scalar(R), abs=1e-14)
        for axis in range(4):
            assert np.all(np.take(E.entries, 4, axis=axis) == 0)

    def test_sphere2_extra_plane(self):
        S = extend_sphere2(zero(4))
        assert S.entries[4, 5, 4, 5] == 1.0
        assert np.abs(S.entries).sum() == 4.0

    @pytest.mark.parametrize("n", [4, 5])
    def test_sphere2_scalar(self, n):
        R = random_operator(n, n + 20)
        assert scalar(extend_sphere2(R)) == pytest.approx(scalar(R) + 2, abs=1e-12)

    @pytest.mark.parametrize("seed", range(6))
    @pytest.mark.parametrize("n", [4, 5])
    def test_sharp_of_sphere2_extension(self, n, seed):
        R = random_operator(n, seed, stream=3)
        S = sharp(extend_sphere2(R))[:n, :n, :n, :n]
        assert np.abs(S - sharp(R)).max() <= 1e-9 * R.norm() ** 2

    def test_sphere2_multilinear_formula(self, rng):
        n = 4
        R = random_operator(n, 8)
        S = extend_sphere2(R)
        vs = rng.standard_normal((4, n + 2))
        x = vs[:, n:]
        expected = evaluate(R, *vs[:, :n]) + x[0] @ x[2] * (x[1] @ x[3]) - x[0] @ x[3] * (x[1] @ x[2])
        assert evaluate(S, *vs) == pytest.approx(expected, abs=1e-12)


# ---------------------------------------------------------------------------
# 2-forms and the Lambda^2 view
# ---------------------------------------------------------------------------


class TestTwoForms:
    def test_unit_plane(self):
        e = np.eye(4)
        assert evaluate_on_2forms(sphere(4), TwoForm.wedge(e[0], e[1])) == pytest.approx(1.0)

    def test_zero_form(self):
        assert evaluate_on_2forms(random_operator(4, 0), TwoForm(np.zeros((4, 4)))) == 0.0

    def test_sectional_normalization(self):
        R = random_operator(5, 4)
        e = np.eye(5)
        for i, j in [(0, 1), (1, 3), (2, 4)]:
            assert evaluate_on_2forms(R, TwoForm.wedge(e[i], e[j])) == pytest.approx(R.entries[i, j, i, j], abs=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            evaluate_on_2forms(sphere(4), TwoForm(np.zeros((5, 5))))

    def test_rejects_symmetric_matrix(self):
        with pytest.raises(SymmetryViolation):
            TwoForm(np.eye(3))

    @pytest.mark.parametrize("n", [4, 5])
    def test_lambda2_round_trip(self, n):
        R = random_operator(n, 30)
        M = to_lambda2(R)
        assert np.allclose(M, M.T, atol=0)
        assert np.array_equal(from_lambda2(M, n), R.entries)

    def test_lambda2_of_sphere(self):
        assert np.allclose(sphere(4).lambda2(), 2 * np.eye(6), atol=0)

    def test_lambda2_matches_two_form_pairing(self, rng):
        # phi^T M psi / 4 in Lambda^2 coordinates phi_ij, i < j
        R = random_operator(4, 31)
        A, B = rng.standard_normal((2, 4, 4))
        phi, psi = TwoForm(A - A.T), TwoForm(B - B.T)
        iu = np.triu_indices(4, 1)
        x, y = phi.entries[iu], psi.entries[iu]
        assert 0.5 * x @ to_lambda2(R) @ y == pytest.approx(evaluate_on_2forms(R, phi, psi), abs=1e-12)


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------


class TestJson:
    @pytest.mark.parametrize("layout", ["dense", "lambda2"])
    def test_round_trip(self, tmp_path, layout):
        R = random_operator(5, 9)
        path = tmp_path / f"op_{layout}.json"
        save_operator(path, R, layout, meta={"source": "test"})
        d = json.loads(path.read_text())
        assert set(d) == {"n", "layout", "data", "meta"}
        assert d["layout"] == layout
        assert load_operator(path).allclose(R, atol=1e-15)

    def test_rejects_invalid_data(self):
        raw = np.zeros((4,) * 4)
        raw[0, 1, 0, 1] = 1.0
        with pytest.raises(SymmetryViolation):
            from_json_dict({"n": 4, "layout": "dense", "data": raw.ravel().tolist()})

    def test_rejects_wrong_size(self):
        with pytest.raises(DimensionMismatch):
            from_json_dict({"n": 4, "layout": "lambda2", "data": [0.0] * 35})

    def test_rejects_unknown_layout(self):
        with pytest.raises(ValueError):
            to_json_dict(sphere(4), layout="sparse")


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)
dims = st.integers(min_value=4, max_value=6)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, n=dims)
def test_q_is_a_curvature_operator(seed, n):
    R = random_operator(n, seed)
    q_raw = square(R) + sharp(R)
    res = symmetry_residuals(q_raw)
    scale = R.norm() ** 2
    assert res["bianchi"] <= 1e-9 * scale
    assert max(res.values()) <= 1e-9 * scale
    assert np.abs(q(R).entries - q_raw).max() <= 1e-12 * scale


@settings(max_examples=40, deadline=None)
@given(seed=seeds, n=dims, c=st.floats(min_value=-3, max_value=3))
def test_q_of_shifted_sphere_is_polynomial(seed, n, c):
    # q is quadratic, so q(R + cI) - q(R) - c^2 q(I) is linear in c
    R = random_operator(n, seed)
    I = sphere(n)
    lhs = q(R + c * I).entries - q(R).entries - c * c * q(I).entries
    cross = q(R + I).entries - q(R).entries - q(I).entries
    assert np.abs(lhs - c * cross).max() <= 1e-10 * max(1.0, R.norm() ** 2)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, n=dims, b=st.floats(min_value=0.01, max_value=1.0))
def test_l_ab_inverse_property(seed, n, b):
    p = TransformParams.admissible(n, b * max_admissible_b(n))
    R = random_operator(n, seed)
    assert np.abs(inverse_l_ab(l_ab(R, p), p).entries - R.entries).max() <= 1e-10
    assert np.abs(l_ab(inverse_l_ab(R, p), p).entries - R.entries).max() <= 1e-10


@settings(max_examples=30, deadline=None)
@given(seed=seeds, n=dims)
def test_rotation_preserves_contractions(seed, n):
    R = random_operator(n, seed)
    g = random_rotation(n, np.random.default_rng(seed))
    Rg = R.rotate(g)
    assert scalar(Rg) == pytest.approx(scalar(R), abs=1e-10)
    assert np.allclose(ricci(Rg).entries, g @ ricci(R).entries @ g.T, atol=1e-10)
    assert np.allclose(np.linalg.eigvalsh(Rg.lambda2()), np.linalg.eigvalsh(R.lambda2()), atol=1e-10)
