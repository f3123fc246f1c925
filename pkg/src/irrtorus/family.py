"""Generation-structured frequency sets and their combinatorial conditions.

A family is a disjoint union of generations ``Lambda_1, ..., Lambda_G``.  A
rectangle is a non-degenerate tuple ``(n1, n2, n3, n4)`` (``n1 != n3``,
``n1 != n4``) in the chosen relation; a nuclear family is a rectangle with
parents ``n1, n2`` in some generation ``j`` and children ``n3, n4`` in
generation ``j + 1``.

Conventions: the last generation carries no children requirement, and a
family with no generations, or with an empty generation, fails the
spouse-and-children condition.
"""

from __future__ import annotations

import enum
import itertools
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

Mode = Tuple[int, int]

CONDITIONS = ("closure", "spouse_children", "sibling_parents", "nondegeneracy", "faithfulness", "no_spreading")


class FamilyError(ValueError):
    pass


class Relation(str, enum.Enum):
    SQUARE_TORUS_A = "SquareTorusA"
    IRRATIONAL_R = "IrrationalR"


@dataclass(frozen=True)
class FamilyStructure:
    generations: Tuple[Tuple[Mode, ...], ...]
    relation: Relation = Relation.IRRATIONAL_R
    s: float = 1.0

    def __post_init__(self):
        gens = tuple(tuple((int(k[0]), int(k[1])) for k in g) for g in self.generations)
        object.__setattr__(self, "generations", gens)
        object.__setattr__(self, "relation", Relation(self.relation))
        seen = set()
        for j, g in enumerate(gens, 1):
            if len(set(g)) != len(g):
                raise FamilyError(f"generation {j} repeats a mode")
            clash = seen.intersection(g)
            if clash:
                raise FamilyError(f"mode {sorted(clash)[0]} appears in more than one generation")
            seen.update(g)

    @property
    def modes(self) -> List[Mode]:
        return [k for g in self.generations for k in g]

    def generation_of(self) -> Dict[Mode, int]:
        return {k: j for j, g in enumerate(self.generations) for k in g}

    def to_document(self) -> dict:
        return {"s": self.s, "relation": self.relation.value,
                "generations": [[list(k) for k in g] for g in self.generations]}

    @classmethod
    def from_document(cls, doc: dict) -> "FamilyStructure":
        for key in ("s", "relation", "generations"):
            if key not in doc:
                raise FamilyError(f"missing field '{key}'")
        try:
            relation = Relation(doc["relation"])
        except ValueError:
            raise FamilyError(f"field 'relation' must be one of {[r.value for r in Relation]}") from None
        gens = doc["generations"]
        if not isinstance(gens, list) or not all(isinstance(g, list) for g in gens):
            raise FamilyError("field 'generations' must be a list of lists of [k1, k2] pairs")
        try:
            parsed = tuple(tuple((int(k[0]), int(k[1])) for k in g) for g in gens)
        except (TypeError, ValueError, IndexError):
            raise FamilyError("field 'generations' must be a list of lists of [k1, k2] pairs") from None
        return cls(parsed, relation, float(doc["s"]))


# ---------------------------------------------------------------------------
# relations


def in_relation(relation: Relation, t) -> bool:
    """Non-degenerate membership of an ordered tuple in the relation."""
    n1, n2, n3, n4 = (np.asarray(k) for k in t)
    if not np.array_equal(n1 + n2, n3 + n4):
        return False
    if np.array_equal(n1, n3) or np.array_equal(n1, n4):
        return False
    sq = [k * k for k in (n1, n2, n3, n4)]
    per_axis = sq[0] + sq[1] - sq[2] - sq[3]
    if Relation(relation) is Relation.IRRATIONAL_R:
        return bool(np.all(per_axis == 0))
    return bool(per_axis.sum() == 0)


def _relation_mask(relation: Relation, n1, n2, n3, n4) -> np.ndarray:
    """Vectorized non-degenerate relation test over broadcastable ``(..., 2)`` arrays."""
    mom = np.all(n1 + n2 == n3 + n4, axis=-1)
    nondeg = np.any(n1 != n3, axis=-1) & np.any(n1 != n4, axis=-1)
    per_axis = n1 ** 2 + n2 ** 2 - n3 ** 2 - n4 ** 2
    if relation is Relation.IRRATIONAL_R:
        energy = np.all(per_axis == 0, axis=-1)
    else:
        energy = per_axis.sum(axis=-1) == 0
    return mom & nondeg & energy


def rectangle_key(t) -> tuple:
    """Unordered representative ``{{n1, n2}, {n3, n4}}``."""
    a = tuple(sorted([tuple(t[0]), tuple(t[1])]))
    b = tuple(sorted([tuple(t[2]), tuple(t[3])]))
    return tuple(sorted([a, b]))


# ---------------------------------------------------------------------------
# structure extraction


@dataclass(frozen=True)
class NuclearFamily:
    generation: int   # 1-based generation of the parents
    parents: Tuple[Mode, Mode]
    children: Tuple[Mode, Mode]


def nuclear_families(f: FamilyStructure) -> List[NuclearFamily]:
    out = []
    gens = f.generations
    for j in range(len(gens) - 1):
        kids = set(gens[j + 1])
        for p, q in itertools.combinations(sorted(gens[j]), 2):
            seen = set()
            for c in sorted(kids):
                d = (p[0] + q[0] - c[0], p[1] + q[1] - c[1])
                if d not in kids or d == c:
                    continue
                pair = tuple(sorted([c, d]))
                if pair in seen or not in_relation(f.relation, (p, q, c, d)):
                    continue
                seen.add(pair)
                out.append(NuclearFamily(j + 1, (p, q), pair))
    return out


def rectangles_within(f: FamilyStructure) -> List[tuple]:
    """All rectangles with every vertex in the family, as unordered keys."""
    modes = f.modes
    if len(modes) < 4:
        return []
    pts = np.array(modes)
    present = set(modes)
    found = set()
    for i, j in itertools.combinations(range(len(pts)), 2):
        n1, n2 = pts[i], pts[j]
        n3 = pts
        n4 = n1 + n2 - n3
        ok = _relation_mask(f.relation, n1[None], n2[None], n3, n4)
        for r in np.nonzero(ok)[0]:
            k4 = (int(n4[r, 0]), int(n4[r, 1]))
            if k4 in present:
                found.add(rectangle_key([tuple(n1), tuple(n2), tuple(n3[r]), k4]))
    return sorted(found)


def _bounding_box(modes: Sequence[Mode]) -> Tuple[int, int, int, int]:
    pts = np.array(modes)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    d = int((hi - lo).max())
    return int(lo[0] - d), int(hi[0] + d), int(lo[1] - d), int(hi[1] + d)


def spreading_counts(f: FamilyStructure) -> Dict[Mode, int]:
    """For each ``n`` outside the family in the inflated bounding box, the number of
    rectangles with ``n`` as a vertex and exactly two vertices in the family."""
    modes = f.modes
    if len(modes) < 2:
        return {}
    present = set(modes)
    x0, x1, y0, y1 = _bounding_box(modes)
    xs, ys = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1), indexing="ij")
    grid = np.stack([xs.ravel(), ys.ravel()], axis=1)
    outside = np.array([tuple(g) not in present for g in grid.tolist()])
    cand = grid[outside]
    pts = np.array(modes)
    found: Dict[Mode, set] = {tuple(c): set() for c in cand.tolist()}
    for i, j in itertools.permutations(range(len(pts)), 2):
        p, q = pts[i], pts[j]
        # n opposite the in-family pair, or n sharing a side with p
        for arrangement in ("opposite", "adjacent"):
            if arrangement == "opposite":
                m = p + q - cand
                ok = _relation_mask(f.relation, p[None], q[None], cand, m)
                tuples = lambda r: [tuple(p), tuple(q), tuple(cand[r]), tuple(m[r])]
            else:
                m = cand + p - q
                ok = _relation_mask(f.relation, cand, p[None], q[None], m)
                tuples = lambda r: [tuple(cand[r]), tuple(p), tuple(q), tuple(m[r])]
            for r in np.nonzero(ok)[0]:
                mr = (int(m[r, 0]), int(m[r, 1]))
                if mr in present or mr == tuple(cand[r]):
                    continue
                found[tuple(cand[r])].add(rectangle_key([tuple(map(int, v)) for v in tuples(r)]))
    return {k: len(v) for k, v in found.items() if v}


# ---------------------------------------------------------------------------
# validation


def _result(ok: bool, witness=None) -> dict:
    return {"pass": bool(ok), "witness": witness}


def validate_family(f: FamilyStructure) -> Dict[str, dict]:
    """Pass/fail and a failure witness for each of the six conditions."""
    gens = f.generations
    modes = f.modes
    present = set(modes)
    fams = nuclear_families(f)
    report: Dict[str, dict] = {}

    # closure
    witness = None
    if modes:
        pts = np.array(modes)
        for i, j in itertools.product(range(len(pts)), repeat=2):
            n4 = pts[i] + pts[j] - pts
            ok = _relation_mask(f.relation, pts[i][None], pts[j][None], pts, n4)
            for r in np.nonzero(ok)[0]:
                k4 = (int(n4[r, 0]), int(n4[r, 1]))
                if k4 not in present:
                    witness = [list(modes[i]), list(modes[j]), list(modes[r]), list(k4)]
                    break
            if witness:
                break
    report["closure"] = _result(witness is None, witness)

    as_parent: Dict[Mode, List[NuclearFamily]] = {k: [] for k in modes}
    as_child: Dict[Mode, List[NuclearFamily]] = {k: [] for k in modes}
    for fam in fams:
        for p in fam.parents:
            as_parent[p].append(fam)
        for c in fam.children:
            as_child[c].append(fam)

    # spouse and children
    if not gens:
        report["spouse_children"] = _result(False, "no generations")
    elif any(len(g) == 0 for g in gens):
        j = next(j for j, g in enumerate(gens, 1) if len(g) == 0)
        report["spouse_children"] = _result(False, f"generation {j} is empty")
    else:
        bad = next((k for g in gens[:-1] for k in g if len(as_parent[k]) != 1), None)
        report["spouse_children"] = _result(
            bad is None, None if bad is None else {"mode": list(bad), "families": len(as_parent[bad])})

    # sibling and parents
    bad = next((k for g in gens[1:] for k in g if len(as_child[k]) != 1), None)
    report["sibling_parents"] = _result(
        bad is None, None if bad is None else {"mode": list(bad), "families": len(as_child[bad])})

    # nondegeneracy: sibling differs from spouse
    witness = None
    for k in modes:
        spouses = {p for fam in as_parent[k] for p in fam.parents if p != k}
        siblings = {c for fam in as_child[k] for c in fam.children if c != k}
        common = spouses & siblings
        if common:
            witness = {"mode": list(k), "sibling_and_spouse": list(sorted(common)[0])}
            break
    report["nondegeneracy"] = _result(witness is None, witness)

    # faithfulness
    fam_keys = {rectangle_key([*fam.parents, *fam.children]) for fam in fams}
    extra = [r for r in rectangles_within(f) if r not in fam_keys]
    report["faithfulness"] = _result(not extra, [[list(v) for pair in extra[0] for v in pair]] if extra else None)

    # no spreading
    counts = spreading_counts(f)
    worst = max(counts.items(), key=lambda kv: kv[1], default=None)
    ok = worst is None or worst[1] <= 2
    report["no_spreading"] = _result(ok, None if ok else {"mode": list(worst[0]), "rectangles": worst[1]})
    return report


def passes(report: Dict[str, dict], conditions: Sequence[str] = CONDITIONS[:5]) -> bool:
    return all(report[c]["pass"] for c in conditions)


# ---------------------------------------------------------------------------
# Sobolev sums and the ratio bound


def generation_sums(f: FamilyStructure) -> List[float]:
    """``sum_{n in Lambda_j} |n|^{2s}`` for each generation (Euclidean ``|n|``)."""
    return [float(sum((k[0] ** 2 + k[1] ** 2) ** f.s for k in g)) for g in f.generations]


def permutation_structure(f: FamilyStructure) -> Optional[List[List[int]]]:
    """``tau_l`` with ``Lambda_l = {(a_i, b_{tau_l(i)})}`` for ``Lambda_1 = {(a_i, b_i)}``, or None."""
    if not f.generations:
        return []
    base = list(f.generations[0])
    a = [k[0] for k in base]
    b = [k[1] for k in base]
    out = []
    for g in f.generations:
        if Counter(k[0] for k in g) != Counter(a) or Counter(k[1] for k in g) != Counter(b):
            return None
        free_a = {}
        for i, ai in enumerate(a):
            free_a.setdefault(ai, []).append(i)
        free_b = {}
        for i, bi in enumerate(b):
            free_b.setdefault(bi, []).append(i)
        tau = [0] * len(base)
        for x, y in sorted(g):
            tau[free_a[x].pop(0)] = free_b[y].pop(0)
        if sorted(tau) != list(range(len(base))):
            return None
        out.append(tau)
    return out


def check_ratio_bound(f: FamilyStructure) -> dict:
    """Max generation-sum ratio against ``2**s`` plus the permutation structure."""
    if f.relation is not Relation.IRRATIONAL_R:
        raise FamilyError("ratio bound applies to the IrrationalR relation")
    report = validate_family(f)
    failed = [c for c in CONDITIONS[:5] if not report[c]["pass"]]
    if failed:
        raise FamilyError(f"family fails condition(s) {failed}")
    sums = generation_sums(f)
    ratios = [sk / sj for sk in sums for sj in sums if sj > 0]
    max_ratio = max(ratios, default=1.0)
    tau = permutation_structure(f)
    bound = 2.0 ** f.s
    return {"sums": sums, "max_ratio": float(max_ratio), "bound": bound, "permutations": tau,
            "permutation_ok": tau is not None, "pass": bool(max_ratio <= bound and tau is not None)}


# ---------------------------------------------------------------------------
# randomized search


def _children(p: Mode, q: Mode) -> Tuple[Mode, Mode]:
    return (p[0], q[1]), (q[0], p[1])


def random_candidate(rng: np.random.Generator, box: int = 6, max_generations: int = 4,
                     max_pairs: int = 3, s: float = 1.5) -> Optional[FamilyStructure]:
    """Grow generations by axis-parallel children from random pairings; None if it collides."""
    pairs = int(rng.integers(1, max_pairs + 1))
    n = 2 * pairs
    vals = np.arange(-box, box + 1)
    a = rng.choice(vals, n, replace=False)
    b = rng.choice(vals, n, replace=False)
    gen = [(int(x), int(y)) for x, y in zip(a, b)]
    gens = [gen]
    G = int(rng.integers(1, max_generations + 1))
    for _ in range(G - 1):
        order = rng.permutation(len(gen))
        nxt = []
        for i in range(0, len(order), 2):
            nxt.extend(_children(gen[order[i]], gen[order[i + 1]]))
        gen = nxt
        gens.append(gen)
    flat = [k for g in gens for k in g]
    if len(set(flat)) != len(flat):
        return None
    return FamilyStructure(tuple(tuple(g) for g in gens), Relation.IRRATIONAL_R, s)


def random_family_search(n_instances: int = 20, seed: int = 0, box: int = 6, max_generations: int = 4,
                         s: float = 1.5, max_tries: int = 20000) -> List[FamilyStructure]:
    """Distinct random IrrationalR families passing conditions i-v."""
    rng = np.random.default_rng(seed)
    found, keys = [], set()
    for _ in range(max_tries):
        if len(found) >= n_instances:
            break
        f = random_candidate(rng, box, max_generations, s=s)
        if f is None:
            continue
        key = tuple(tuple(sorted(g)) for g in f.generations)
        if key in keys:
            continue
        if passes(validate_family(f)):
            keys.add(key)
            found.append(f)
    return found
