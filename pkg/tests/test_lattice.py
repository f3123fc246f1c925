import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irrtorus.lattice import (Box, ModeField, TorusSpec, TorusSpecError, dispersion, dispersion_grid,
                              integer_relation, random_field, residual, restrict, sobolev_norm,
                              sobolev_norm_array)


def test_square_and_rational_specs():
    sq = TorusSpec.square()
    assert sq.rational == (1, 1) and sq.is_rational
    r = TorusSpec.make_rational(2, 4)
    assert r.rational == (1, 2)
    assert dispersion(r, (3, -2)) == 9 + 2 * 4


def test_irrational_spec_rejects_integer_relations():
    with pytest.raises(TorusSpecError):
        TorusSpec.make_irrational(1.0, 2.0)
    with pytest.raises(TorusSpecError):
        TorusSpec.make_irrational(1.0, 1.5)
    assert integer_relation((1.0, math.sqrt(2))) is None
    assert integer_relation((2.0, 3.0)) in {(3, -2), (-3, 2)}


def test_spec_rejects_nonpositive_weights():
    with pytest.raises(TorusSpecError):
        TorusSpec((0.0, 1.0))
    with pytest.raises(TorusSpecError):
        TorusSpec.make_rational(0, 0)


def test_box_indexing_round_trip():
    b = Box(3)
    coords = b.coords()
    assert b.size == 49 and len(coords) == 49
    for i, k in enumerate(map(tuple, coords)):
        assert b.flat_index(k) == i
    assert (3, -3) in b and (4, 0) not in b


def test_dispersion_grid_matches_pointwise(irrational):
    g = dispersion_grid(irrational, 2)
    for k in Box(2).modes():
        assert g[k[0] + 2, k[1] + 2] == pytest.approx(dispersion(irrational, k), abs=0)


def test_sobolev_norm_single_mode():
    f = ModeField.from_modes(2, {(1, 1): 2.0})
    assert sobolev_norm(f, 1.0) == pytest.approx(2.0 * math.sqrt(3.0))
    assert sobolev_norm(f, 0.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        sobolev_norm(f, -1)
    arr = np.stack([f.flat, 2 * f.flat])
    assert np.allclose(sobolev_norm_array(arr, 2, 1.0), [2 * math.sqrt(3), 4 * math.sqrt(3)])


def test_embed_refuses_to_drop_modes():
    f = ModeField.from_modes(3, {(3, 0): 1.0})
    with pytest.raises(ValueError):
        f.embed(2)
    g = ModeField.from_modes(1, {(1, 0): 1.0}).embed(3)
    assert g[(1, 0)] == 1.0 and g.box.M == 3


def test_restrict_and_residual_split_field():
    rng = np.random.default_rng(0)
    f = random_field(3, 3, 1.0, 1.0, rng)
    assert np.allclose((restrict(f, 1) + residual(f, 1)).values, f.values)
    assert all(max(abs(k[0]), abs(k[1])) <= 1 for k in restrict(f, 1).support())


def test_random_field_norm_and_support():
    f = random_field(4, 1, 0.05, 1.5, np.random.default_rng(3))
    assert sobolev_norm(f, 1.5) == pytest.approx(0.05)
    assert all(k in Box(1) for k in f.support())


def test_values_are_read_only():
    f = ModeField.zeros(1)
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


entries = st.dictionaries(
    st.tuples(st.integers(-3, 3), st.integers(-3, 3)),
    st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False),
    max_size=12,
)


@settings(max_examples=50, deadline=None)
@given(entries)
def test_text_and_json_round_trip_exactly(d):
    f = ModeField.from_modes(3, d)
    assert np.array_equal(ModeField.from_text(f.to_text(), 3).values, f.values)
    assert np.array_equal(ModeField.from_document(f.to_document()).embed(3).values, f.values)
