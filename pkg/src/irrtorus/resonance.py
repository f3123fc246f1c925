"""Resonant and weakly resonant 4-tuples on the weighted torus.

A momentum-conserving 4-tuple ``(k1, k2, k3, k4)`` of 2D modes is the same
thing as a pair of 1D quadruples ``(a, b, c, d)`` with ``a + b = c + d``,
one per coordinate.  Everything here enumerates over such pairs, so the
coordinate defects ``A_i = a^2 + b^2 - c^2 - d^2`` are integers computed
once per 1D quadruple and resonance tests never touch floating point.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from .lattice import Box, Mode, TorusSpec, as_box

# enumerate_resonances builds Python objects for every tuple; beyond this
# half-width use the array-level helpers instead
ENUMERATION_CAP = 12
DEFAULT_WEAK_THRESHOLD = 1.0


class ResonanceCapError(ValueError):
    pass


class MomentumError(ValueError):
    pass


class ResonanceClass(str, enum.Enum):
    DEGENERATE = "Degenerate"
    PARALLEL = "Parallel"
    NONPARALLEL = "Nonparallel"


@dataclass(frozen=True)
class ResonantTuple:
    k1: Mode
    k2: Mode
    k3: Mode
    k4: Mode
    cls: ResonanceClass
    weak_defect: float

    @property
    def modes(self) -> Tuple[Mode, Mode, Mode, Mode]:
        return (self.k1, self.k2, self.k3, self.k4)


@dataclass(frozen=True)
class ResonanceQueryResult:
    center: Mode
    triples: List[Tuple[Mode, Mode, Mode]]


# ---------------------------------------------------------------------------
# 1D quadruples and the tuple-pair representation


@dataclass(frozen=True, eq=False)
class Quads:
    """All ``(a, b, c, d)`` in ``[-M, M]^4`` with ``a + b = c + d``."""

    M: int
    q: np.ndarray        # (n, 4) int64
    A: np.ndarray        # a^2 + b^2 - c^2 - d^2
    paired: np.ndarray   # {a, b} == {c, d} as multisets

    def max_abs(self) -> np.ndarray:
        return np.abs(self.q).max(axis=1)


@lru_cache(maxsize=16)
def quads(M: int) -> Quads:
    r = np.arange(-M, M + 1)
    a, b, c = (x.ravel() for x in np.meshgrid(r, r, r, indexing="ij"))
    d = a + b - c
    keep = np.abs(d) <= M
    q = np.stack([a[keep], b[keep], c[keep], d[keep]], axis=1).astype(np.int64)
    A = q[:, 0] ** 2 + q[:, 1] ** 2 - q[:, 2] ** 2 - q[:, 3] ** 2
    paired = ((q[:, 0] == q[:, 2]) & (q[:, 1] == q[:, 3])) | ((q[:, 0] == q[:, 3]) & (q[:, 1] == q[:, 2]))
    for arr in (q, A, paired):
        arr.setflags(write=False)
    return Quads(M, q, A, paired)


def pair_modes(qd: Quads, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Mode coordinates of tuples given by quad-pair indices, shape ``(n, 4, 2)``."""
    return np.stack([qd.q[i], qd.q[j]], axis=-1)


def flat_indices(modes: np.ndarray, L: int) -> np.ndarray:
    """Flat index of each mode in the storage box ``Q_L``."""
    w = 2 * L + 1
    return (modes[..., 0] + L) * w + (modes[..., 1] + L)


def resonant_mask(spec: TorusSpec, Ax: np.ndarray, Ay: np.ndarray) -> np.ndarray:
    """Exact integer resonance test for broadcastable coordinate defects."""
    if spec.is_rational:
        p, q = spec.rational
        return p * Ax + q * Ay == 0
    return (Ax == 0) & (Ay == 0)


def defect_values(spec: TorusSpec, Ax: np.ndarray, Ay: np.ndarray) -> np.ndarray:
    if spec.is_rational:
        p, q = spec.rational
        return (p * Ax + q * Ay).astype(float)
    w1, w2 = spec.weights
    # exact resonances must carry an exact zero defect
    return np.where((Ax == 0) & (Ay == 0), 0.0, w1 * Ax + w2 * Ay)


def scan_pairs(spec: TorusSpec, L: int, select, chunk: int = 256) -> Iterator[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Yield ``(i, j, defect)`` chunks of quad pairs in ``Q_L`` accepted by ``select``.

    ``select(ix, jy, Ax, Ay, defect)`` receives broadcast row/column blocks
    and returns a boolean mask.
    """
    qd = quads(L)
    n = len(qd.A)
    cols = np.arange(n)
    for start in range(0, n, chunk):
        rows = np.arange(start, min(start + chunk, n))
        Ax = qd.A[rows][:, None]
        Ay = qd.A[None, :]
        d = defect_values(spec, Ax, Ay)
        mask = select(rows[:, None], cols[None, :], Ax, Ay, d)
        ii, jj = np.nonzero(mask)
        yield rows[ii], cols[jj], d[ii, jj]


def collect_pairs(spec, L, select) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    parts = list(scan_pairs(spec, L, select))
    if not parts:
        return np.empty(0, int), np.empty(0, int), np.empty(0)
    return tuple(np.concatenate(p) for p in zip(*parts))


def _lex_order(modes: np.ndarray) -> np.ndarray:
    keys = modes.reshape(len(modes), 8).T[::-1]
    return np.lexsort(keys)


# ---------------------------------------------------------------------------
# single-tuple queries


def _coord_defect(t, axis: int) -> int:
    a, b, c, d = (int(m[axis]) for m in t)
    return a * a + b * b - c * c - d * d


def momentum_ok(t) -> bool:
    k1, k2, k3, k4 = t
    return k1[0] + k2[0] == k3[0] + k4[0] and k1[1] + k2[1] == k3[1] + k4[1]


def tuple_defect(spec: TorusSpec, t) -> float:
    """``lambda_k1 + lambda_k2 - lambda_k3 - lambda_k4``."""
    Ax, Ay = _coord_defect(t, 0), _coord_defect(t, 1)
    return float(defect_values(spec, np.int64(Ax), np.int64(Ay)))


def is_resonant(spec: TorusSpec, t) -> bool:
    """Momentum conservation plus zero defect, decided in integers."""
    if not momentum_ok(t):
        return False
    return bool(resonant_mask(spec, _coord_defect(t, 0), _coord_defect(t, 1)))


def classify(t) -> ResonanceClass:
    """Degenerate, Parallel or Nonparallel geometry of a momentum-conserving tuple."""
    t = tuple(tuple(int(x) for x in m) for m in t)
    if not momentum_ok(t):
        raise MomentumError(f"tuple {t} violates k1 + k2 = k3 + k4")
    k1, k2, k3, k4 = t
    if sorted([k1, k2]) == sorted([k3, k4]):
        return ResonanceClass.DEGENERATE
    if all(sorted([k1[i], k2[i]]) == sorted([k3[i], k4[i]]) for i in (0, 1)):
        return ResonanceClass.PARALLEL
    return ResonanceClass.NONPARALLEL


def classify_array(modes: np.ndarray) -> np.ndarray:
    """Vectorised :func:`classify` over ``(n, 4, 2)`` arrays; returns class codes 0/1/2."""
    k1, k2, k3, k4 = (modes[:, i] for i in range(4))
    eq = lambda u, v: np.all(u == v, axis=-1)
    degenerate = (eq(k1, k3) & eq(k2, k4)) | (eq(k1, k4) & eq(k2, k3))
    coord = [((k1[:, i] == k3[:, i]) & (k2[:, i] == k4[:, i])) | ((k1[:, i] == k4[:, i]) & (k2[:, i] == k3[:, i]))
             for i in (0, 1)]
    parallel = coord[0] & coord[1]
    return np.where(degenerate, 0, np.where(parallel, 1, 2))


_CLASS_CODES = [ResonanceClass.DEGENERATE, ResonanceClass.PARALLEL, ResonanceClass.NONPARALLEL]


def canonical_rectangle(t) -> tuple:
    """Unordered representative: the pair of unordered index pairs, sorted."""
    k1, k2, k3, k4 = (tuple(int(x) for x in m) for m in t)
    return tuple(sorted([tuple(sorted([k1, k2])), tuple(sorted([k3, k4]))]))


def to_tuples(modes: np.ndarray, defects: np.ndarray) -> List[ResonantTuple]:
    codes = classify_array(modes) if len(modes) else np.empty(0, int)
    out = []
    for m, c, d in zip(modes.tolist(), codes.tolist(), defects.tolist()):
        out.append(ResonantTuple(tuple(m[0]), tuple(m[1]), tuple(m[2]), tuple(m[3]), _CLASS_CODES[c], float(d)))
    return out


# ---------------------------------------------------------------------------
# enumerations


def resonant_tuple_array(spec: TorusSpec, N) -> Tuple[np.ndarray, np.ndarray]:
    """All ordered resonant tuples in ``Q_N`` as ``(modes (n,4,2), defects)``, sorted."""
    N = as_box(N).M
    qd = quads(N)
    i, j, d = collect_pairs(spec, N, lambda ix, jy, Ax, Ay, dd: resonant_mask(spec, Ax, Ay))
    modes = pair_modes(qd, i, j)
    order = _lex_order(modes)
    return modes[order], d[order]


def enumerate_resonances(spec: TorusSpec, N) -> List[ResonantTuple]:
    """Complete, duplicate-free list of ordered resonant tuples inside ``Q_N``.

    Sorted lexicographically by the flattened coordinates.  Raises
    :class:`ResonanceCapError` above ``ENUMERATION_CAP``.
    """
    N = as_box(N)
    if N.M > ENUMERATION_CAP:
        raise ResonanceCapError(f"N={N.M} exceeds enumeration cap {ENUMERATION_CAP}")
    return to_tuples(*resonant_tuple_array(spec, N))


def count_by_class(tuples: Sequence[ResonantTuple]) -> dict:
    counts = {c.value: 0 for c in ResonanceClass}
    for t in tuples:
        counts[t.cls.value] += 1
    return counts


def unordered_rectangles(tuples: Sequence[ResonantTuple]) -> dict:
    """Collapse ordered tuples to canonical unordered representatives."""
    out = {}
    for t in tuples:
        out.setdefault(canonical_rectangle(t.modes), t.cls)
    return out


def resonant_neighbors(spec: TorusSpec, k: Mode, N) -> ResonanceQueryResult:
    """Ordered triples ``(k1, k2, k3)`` with ``(k1, k2, k3, k)`` resonant inside ``Q_N``."""
    N = as_box(N)
    k = (int(k[0]), int(k[1]))
    if k not in N:
        raise ValueError(f"center {k} outside Q_{N.M}")
    if spec.is_rational:
        modes, _ = resonant_tuple_array(spec, N)
        hit = np.all(modes[:, 3] == np.asarray(k), axis=1)
        triples = sorted({tuple(tuple(m) for m in row[:3]) for row in modes[hit].tolist()})
        return ResonanceQueryResult(k, triples)
    kx, ky = k
    r = range(-N.M, N.M + 1)
    found = set()
    for a in r:
        for b in r:
            for tri in (((kx, b), (a, ky), (a, b)), ((a, ky), (kx, b), (a, b)),
                        ((kx, ky), (a, b), (a, b)), ((a, b), (kx, ky), (a, b))):
                if all(m in N for m in tri):
                    found.add(tri)
    return ResonanceQueryResult(k, sorted(found))


def weak_tuple_array(spec: TorusSpec, N, L, threshold: float = DEFAULT_WEAK_THRESHOLD):
    """Momentum tuples in ``Q_L`` with a mode outside ``Q_N`` and ``|defect| < threshold``.

    Returns ``(modes, defects)`` sorted lexicographically.
    """
    N, L = as_box(N).M, as_box(L).M
    if not N < L:
        raise ValueError(f"need N < L, got N={N}, L={L}")
    qd = quads(L)
    inside = qd.max_abs() <= N

    def select(ix, jy, Ax, Ay, d):
        return ~(inside[ix] & inside[jy]) & (np.abs(d) < threshold)

    i, j, d = collect_pairs(spec, L, select)
    modes = pair_modes(qd, i, j)
    order = _lex_order(modes)
    return modes[order], d[order]


def weak_resonance_set(spec: TorusSpec, N, L, threshold: float = DEFAULT_WEAK_THRESHOLD) -> List[ResonantTuple]:
    """Weakly resonant tuples crossing the ``Q_N`` boundary, truncated to ``Q_L``.

    The comparison is strict (``|defect| < threshold``).  Tuples that are not
    exactly resonant are still tagged with their geometric class.
    """
    return to_tuples(*weak_tuple_array(spec, N, L, threshold))


def min_nonresonant_defect(spec: TorusSpec, N) -> float:
    """Smallest ``|defect|`` over momentum-conserving non-resonant tuples in ``Q_N`` (inf if none)."""
    # the defect depends only on (A_x, A_y), and every combination of
    # per-coordinate values occurs, so scanning distinct values is exhaustive
    u = np.unique(quads(as_box(N).M).A)
    Ux, Uy = u[:, None], u[None, :]
    d = np.abs(defect_values(spec, Ux, Uy))
    d = np.where(resonant_mask(spec, Ux, Uy), np.inf, d)
    return float(d.min())


def small_divisor_constant(spec: TorusSpec, N) -> float:
    """``max(1, 1 / min |defect|)`` over non-resonant momentum tuples in ``Q_N``."""
    m = min_nonresonant_defect(spec, N)
    return max(1.0, 1.0 / m) if np.isfinite(m) and m > 0 else 1.0
