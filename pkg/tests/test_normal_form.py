import itertools
import math

import numpy as np
import pytest

from irrtorus.lattice import Box, ModeField, TorusSpec, random_field, sobolev_norm
from irrtorus.normal_form import (Direction, LieTransformError, NormalFormError, SupportError, build_chi,
                                  chi_gradient, chi_value, chi_vector_field, lie_transform,
                                  poisson_bracket_with_h0, termwise_identity_residual,
                                  verify_poisson_cancellation)
from irrtorus.resonance import classify, small_divisor_constant
from oracles import chi_from_terms


@pytest.fixture(scope="module")
def small(irrational):
    return build_chi(irrational, 1, 2)


def _momentum_tuples(L):
    r = range(-L, L + 1)
    box = [(a, b) for a in r for b in r]
    for k1, k2, k3 in itertools.product(box, repeat=3):
        k4 = (k1[0] + k2[0] - k3[0], k1[1] + k2[1] - k3[1])
        if max(abs(k4[0]), abs(k4[1])) <= L:
            yield (k1, k2, k3, k4)


def test_documented_coefficient(irrational):
    chi, _ = build_chi(irrational, 1, 2)
    g = chi.coefficient(((1, 0), (-1, 0), (0, 1), (0, -1)))
    assert g == pytest.approx(1j / (2 - 2 * math.sqrt(2)), rel=1e-14)
    assert abs(g) == pytest.approx(1.2071, abs=1e-4)


def test_origin_box(irrational):
    chi, dec = build_chi(irrational, 0, 1)
    assert len(dec.resonant_modes) == 1
    assert not np.any(chi.terms().part == 0)


def test_partition_is_exhaustive_and_disjoint(small):
    chi, dec = small
    t = chi.terms()
    key = lambda m: tuple(map(tuple, m))
    chi_set = {key(m) for m in t.modes.tolist()}
    res = {key(m) for m in dec.resonant_modes.tolist()}
    weak = {key(m) for m in dec.weak_modes.tolist()}
    assert len(chi_set) == len(t)
    assert not (chi_set & res) and not (chi_set & weak) and not (res & weak)
    assert chi_set | res | weak == set(_momentum_tuples(2))
    assert all(max(abs(x) for k in m for x in k) <= 1 for m in res)


def test_part_tags_and_coefficient_bound(small, irrational):
    chi, _ = small
    t = chi.terms()
    inside = np.abs(t.modes).max(axis=(1, 2)) <= 1
    assert np.array_equal(t.part == 0, inside)
    C = small_divisor_constant(irrational, 1)
    assert np.abs(t.g[inside]).max() == pytest.approx(C, rel=1e-14)
    assert np.all(np.abs(t.defect[~inside]) >= 1.0)


def test_reality_symmetry(small):
    chi, _ = small
    t = chi.terms()
    table = {tuple(map(tuple, m)): g for m, g in zip(t.modes.tolist(), t.g)}
    for m, g in table.items():
        assert table[(m[2], m[3], m[0], m[1])] == pytest.approx(np.conj(g))


def test_termwise_identity(small):
    assert termwise_identity_residual(small[0]) < 1e-14


def test_value_and_field_match_term_table(small):
    chi, _ = small
    t = chi.terms()
    z = random_field(2, 2, 1.0, 0.0, np.random.default_rng(1))
    value, X = chi_from_terms(z.flat, t.modes, t.g, 2)
    assert abs(value.imag) < 1e-12
    assert chi_value(chi, z) == pytest.approx(value.real, rel=1e-12)
    assert np.allclose(chi_vector_field(chi, z).flat, X, atol=1e-12)


def test_vector_field_homogeneous_and_zero(small):
    chi, _ = small
    z = random_field(2, 2, 1.0, 0.0, np.random.default_rng(2))
    assert not np.any(chi_vector_field(chi, ModeField.zeros(2)).values)
    assert np.allclose(chi_vector_field(chi, z.scale(0.3)).values, 0.3 ** 3 * chi_vector_field(chi, z).values)


def test_directional_derivative_finite_difference(small):
    chi, _ = small
    rng = np.random.default_rng(3)
    z = random_field(2, 2, 1.0, 0.0, rng)
    h = random_field(2, 2, 1.0, 0.0, rng)
    step = 1e-5
    fd = (chi_value(chi, z + h.scale(step)) - chi_value(chi, z - h.scale(step))) / (2 * step)
    grad = chi_gradient(chi, z)
    assert fd == pytest.approx(2 * np.real(np.vdot(grad.flat, h.flat)), rel=1e-8)


def test_support_violation(small):
    chi, _ = small
    with pytest.raises(SupportError):
        chi_vector_field(chi, ModeField.from_modes(3, {(3, 0): 1.0}))


def test_rational_spec_refused_with_offending_tuple(square):
    with pytest.raises(NormalFormError) as err:
        build_chi(square, 1, 2)
    t = err.value.offending
    assert t is not None and classify(t).value == "Nonparallel"


def test_requires_N_below_L(irrational):
    with pytest.raises(ValueError):
        build_chi(irrational, 2, 2)


def test_lie_transform_zero_and_round_trip(small):
    chi, _ = small
    assert not np.any(lie_transform(chi, ModeField.zeros(2)).values)
    z0 = random_field(2, 1, 0.05, 1.0, np.random.default_rng(4))
    z1 = lie_transform(chi, z0)
    back = lie_transform(chi, z1, Direction.INVERSE)
    assert sobolev_norm(back - z0, 1.0) < 10 * 1e-10 * sobolev_norm(z0, 1.0)
    assert sobolev_norm(z1 - z0, 1.0) > 0


def test_chi_conserved_along_its_flow(small):
    chi, _ = small
    z0 = random_field(2, 2, 0.1, 1.0, np.random.default_rng(5))
    c0 = chi_value(chi, z0)
    c1 = chi_value(chi, lie_transform(chi, z0))
    assert abs(c1 - c0) < 10 * 1e-10 * max(abs(c0), 1e-300) + 1e-18


def test_guard_refuses_large_data(small):
    chi, _ = small
    with pytest.raises(LieTransformError):
        lie_transform(chi, random_field(2, 1, 1.0, 1.0, np.random.default_rng(0)))


def test_cubic_shift_ratio_bounded(small):
    chi, _ = small
    direction = random_field(2, 1, 1.0, 1.0, np.random.default_rng(6))
    ratios = []
    for eps in 10.0 ** np.linspace(-3, -2, 5):
        z0 = direction.scale(eps)
        ratios.append(sobolev_norm(lie_transform(chi, z0) - z0, 1.0) / eps ** 3)
    assert max(ratios) / min(ratios) < 1.01


def test_poisson_cancellation(small, irrational):
    chi, dec = small
    rng = np.random.default_rng(7)
    fields = [random_field(2, 2, rng.uniform(0.1, 1.0), 0.0, rng) for _ in range(20)]
    fields += [ModeField.zeros(2), ModeField.from_modes(2, {(1, -2): 0.7})]
    rep = verify_poisson_cancellation(chi, dec, irrational, fields)
    assert rep["pass"]
    assert rep["max_residual"] < 1e-12
    assert rep["residuals"][-2] == 0.0
    assert rep["residuals"][-1] < 1e-15


def test_poisson_cancellation_is_not_trivial(small, irrational):
    chi, dec = small
    z = random_field(2, 2, 1.0, 0.0, np.random.default_rng(8))
    bracket = poisson_bracket_with_h0(chi, z.flat)
    assert abs(bracket) > 1e-3
    rep = verify_poisson_cancellation(chi, dec, irrational, [z])
    assert rep["max_residual"] < 1e-10 * abs(bracket)
