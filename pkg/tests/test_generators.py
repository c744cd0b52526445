import numpy as np
import pytest

from curvlab.algebra import extend_flat, make_operator, sphere
from curvlab.cones import SET_E, membership, min_isotropic, two_positive_margin
from curvlab.generators import (
    KINDS,
    GeneratorSpec,
    boundary_adjacent,
    generate,
    generate_one,
    item_rng,
    mixed_sample,
    product_sphere,
)


@pytest.mark.parametrize("kind", ["gaussian_bianchi", "two_positive", "sphere_perturbed", "product_sphere"])
@pytest.mark.parametrize("n", [4, 5])
def test_outputs_are_valid_and_deterministic(kind, n):
    spec = GeneratorSpec(kind, n, count=3, seed=11)
    first = generate(spec)
    assert len(first) == 3
    for i, R in enumerate(first):
        assert R.n == n
        make_operator(n, R.entries)  # raises if invalid
        assert np.array_equal(R.entries, generate(spec)[i].entries)
        assert np.array_equal(R.entries, generate_one(spec, i).entries)


def test_seed_changes_output():
    a = generate(GeneratorSpec("gaussian_bianchi", 4, seed=1))[0]
    b = generate(GeneratorSpec("gaussian_bianchi", 4, seed=2))[0]
    assert not a.allclose(b, atol=1e-3)


def test_items_differ():
    a, b = generate(GeneratorSpec("gaussian_bianchi", 4, count=2))
    assert not a.allclose(b, atol=1e-3)


def test_unperturbed_sphere():
    for R in generate(GeneratorSpec("sphere_perturbed", 5, count=4, sigma=0.0)):
        assert R.allclose(sphere(5), atol=0)


@pytest.mark.parametrize("n", [3, 4, 6])
def test_full_product_sphere_is_sphere(n):
    assert product_sphere(n, n).allclose(sphere(n), atol=1e-15)
    assert generate(GeneratorSpec("product_sphere", n))[0].allclose(sphere(n), atol=1e-15)


def test_s3_times_line_flat_extension_is_boundary():
    R = generate(GeneratorSpec("product_sphere", 4, k=3))[0]
    assert abs(min_isotropic(extend_flat(R), 32, 0).margin) <= 1e-6


def test_product_sphere_range():
    with pytest.raises(ValueError):
        product_sphere(4, 5)


def test_two_positive():
    for R in generate(GeneratorSpec("two_positive", 4, count=5)):
        assert two_positive_margin(R) > 0


@pytest.mark.parametrize("kw", [
    {"kind": "bogus", "n": 4},
    {"kind": "gaussian_bianchi", "n": 1},
    {"kind": "gaussian_bianchi", "n": 4, "count": 0},
    {"kind": "boundary_adjacent", "n": 3},
])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        GeneratorSpec(**kw)


def test_kinds():
    assert set(KINDS) >= {"gaussian_bianchi", "two_positive", "sphere_perturbed", "product_sphere"}


def test_item_streams_are_independent_of_order():
    a = item_rng(5, 3).standard_normal(4)
    item_rng(5, 2).standard_normal(100)
    assert np.array_equal(a, item_rng(5, 3).standard_normal(4))


def test_mixed_sample_spans_both_sides():
    margins = [membership(mixed_sample(4, item_rng(0, i, 10)), SET_E, 16, 0).margin for i in range(12)]
    assert min(margins) < 0 < max(margins)


def test_boundary_adjacent():
    R, rep = boundary_adjacent(4, item_rng(0, 0, 30), SET_E, starts=16)
    assert 1e-4 <= rep.margin <= 1e-3
    assert 1e-4 - 1e-6 <= membership(R, SET_E, 32, 1).margin <= 1e-3
