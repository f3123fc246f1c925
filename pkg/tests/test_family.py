import numpy as np
import pytest

from irrtorus.family import (CONDITIONS, FamilyError, FamilyStructure, Relation, check_ratio_bound,
                             generation_sums, nuclear_families, passes, permutation_structure,
                             random_family_search, rectangles_within, spreading_counts, validate_family)
from irrtorus.resonance import classify

TWO_GEN = (((0, 1), (1, 0)), ((0, 0), (1, 1)))
SQUARE_RECT = (((1, 1), (-1, 1)), ((0, 0), (0, 2)))


def fam(gens=TWO_GEN, relation=Relation.IRRATIONAL_R, s=1.0):
    return FamilyStructure(gens, relation, s)


def test_two_generation_example():
    f = fam()
    rep = validate_family(f)
    assert set(rep) == set(CONDITIONS)
    assert all(rep[c]["pass"] for c in CONDITIONS[:4])
    [nf] = nuclear_families(f)
    assert set(nf.parents) == {(0, 1), (1, 0)} and set(nf.children) == {(0, 0), (1, 1)}
    assert generation_sums(f) == [2.0, 2.0]
    out = check_ratio_bound(f)
    assert out["max_ratio"] == 1.0 and out["bound"] == 2.0 and out["pass"]


def test_empty_family_convention():
    rep = validate_family(fam(()))
    assert not rep["spouse_children"]["pass"]
    for c in ("closure", "sibling_parents", "nondegeneracy", "faithfulness", "no_spreading"):
        assert rep[c]["pass"]


def test_single_generation_ratio():
    f = fam((((2, 3),),), s=1.5)
    assert passes(validate_family(f))
    out = check_ratio_bound(f)
    assert out["max_ratio"] == 1.0 and out["permutations"] == [[0]]


def test_constant_generations_sum():
    f = FamilyStructure((((1, 0),),), Relation.IRRATIONAL_R, 1.0)
    assert generation_sums(f) == [1.0]


def test_sums_permutation_invariant():
    f = fam(s=1.7)
    g = fam(tuple(tuple(reversed(x)) for x in TWO_GEN), s=1.7)
    assert generation_sums(f) == generation_sums(g)


def test_disjointness_enforced():
    with pytest.raises(FamilyError, match="more than one generation"):
        fam((((0, 1),), ((0, 1),)))
    with pytest.raises(FamilyError, match="repeats"):
        fam((((0, 1), (0, 1)),))


def test_nonparallel_rectangle_under_square_relation():
    f = fam(SQUARE_RECT, Relation.SQUARE_TORUS_A)
    rep = validate_family(f)
    assert all(rep[c]["pass"] for c in CONDITIONS[:5])
    [nf] = nuclear_families(f)
    assert set(nf.children) == {(0, 0), (0, 2)}
    # the same four points carry no rectangle under the irrational relation
    irr = validate_family(fam(SQUARE_RECT))
    assert not irr["spouse_children"]["pass"]


def test_nonparallel_rectangle_spreading_witness():
    rep = validate_family(fam(SQUARE_RECT, Relation.SQUARE_TORUS_A))
    assert not rep["no_spreading"]["pass"]
    assert rep["no_spreading"]["witness"]["rectangles"] > 2


def test_closure_witness():
    f = fam((((0, 1), (1, 0)), ((0, 0),)))
    rep = validate_family(f)
    assert not rep["closure"]["pass"]
    assert rep["closure"]["witness"][3] == [1, 1]


def test_spreading_counts_exclude_family():
    f = fam()
    counts = spreading_counts(f)
    assert not set(counts) & set(f.modes)


def test_ratio_bound_preconditions():
    with pytest.raises(FamilyError, match="IrrationalR"):
        check_ratio_bound(fam(SQUARE_RECT, Relation.SQUARE_TORUS_A))
    with pytest.raises(FamilyError, match="fails"):
        check_ratio_bound(fam((((0, 1), (1, 0)), ((0, 0),))))


def test_permutation_extraction():
    assert permutation_structure(fam()) == [[0, 1], [1, 0]]
    assert permutation_structure(fam((((0, 1),), ((2, 2),)))) is None


def test_document_round_trip():
    f = fam(s=1.5)
    assert FamilyStructure.from_document(f.to_document()) == f


@pytest.mark.parametrize("doc,field", [
    ({"relation": "IrrationalR", "generations": []}, "s"),
    ({"s": 1, "relation": "Bogus", "generations": []}, "relation"),
    ({"s": 1, "relation": "IrrationalR", "generations": [[[0]]]}, "generations"),
])
def test_document_errors_name_field(doc, field):
    with pytest.raises(FamilyError, match=field):
        FamilyStructure.from_document(doc)


@pytest.mark.parametrize("s", [1.5, 2.0])
def test_random_search_instances(s):
    found = random_family_search(20, seed=1, s=s)
    assert len(found) == 20
    for f in found:
        assert all(abs(k[0]) <= 6 and abs(k[1]) <= 6 for k in f.modes)
        assert len(f.generations) <= 4
        out = check_ratio_bound(f)
        assert out["pass"] and out["permutation_ok"]
        for r in rectangles_within(f):
            t = (r[0][0], r[0][1], r[1][0], r[1][1])
            assert classify(t).value != "Nonparallel"
