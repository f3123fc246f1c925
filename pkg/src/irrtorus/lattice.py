"""Torus weights, lattice boxes, dispersion and Sobolev norms.

Fields are stored densely over an infinity-norm box ``Q_M``; the array
index of mode ``(k1, k2)`` is ``(k1 + M, k2 + M)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Tuple, Union

import numpy as np

Mode = Tuple[int, int]

# default search bound for the integer-combination test of irrational weights
IRRATIONALITY_BOUND = 50
IRRATIONALITY_TOL = 1e-9


class TorusSpecError(ValueError):
    pass


@dataclass(frozen=True)
class TorusSpec:
    """Weight pair ``(w1, w2)`` with its rationality class.

    ``rational`` holds the coprime integer pair ``(p, q)`` for rational
    tori and is ``None`` for irrational ones.  Use :meth:`square`,
    :meth:`make_rational` or :meth:`make_irrational` rather than the raw
    constructor.
    """

    weights: Tuple[float, float]
    rational: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        w1, w2 = self.weights
        if not (w1 > 0 and w2 > 0):
            raise TorusSpecError(f"weights must be positive, got {self.weights}")
        if self.rational is not None:
            p, q = self.rational
            if p <= 0 or q <= 0 or math.gcd(p, q) != 1:
                raise TorusSpecError(f"rational pair must be coprime positive integers, got {self.rational}")
            if Fraction(w1).limit_denominator(10**9) * q != Fraction(w2).limit_denominator(10**9) * p:
                raise TorusSpecError(f"weights {self.weights} are not proportional to {self.rational}")

    @classmethod
    def square(cls) -> "TorusSpec":
        return cls.make_rational(1, 1)

    @classmethod
    def make_rational(cls, p: int, q: int) -> "TorusSpec":
        p, q = int(p), int(q)
        g = math.gcd(p, q)
        if g == 0:
            raise TorusSpecError("rational weights must be positive")
        return cls((float(p // g), float(q // g)), (p // g, q // g))

    @classmethod
    def make_irrational(cls, w1: float, w2: float, bound: int = IRRATIONALITY_BOUND,
                        tol: float = IRRATIONALITY_TOL) -> "TorusSpec":
        spec = cls((float(w1), float(w2)), None)
        m = integer_relation(spec.weights, bound, tol)
        if m is not None:
            raise TorusSpecError(
                f"weights {spec.weights} satisfy {m[0]}*w1 + {m[1]}*w2 = 0 within tol {tol}; not irrational")
        return spec

    @property
    def is_rational(self) -> bool:
        return self.rational is not None

    def to_dict(self) -> dict:
        return {"weights": list(self.weights), "rational": self.is_rational}


def integer_relation(weights, bound: int = IRRATIONALITY_BOUND,
                     tol: float = IRRATIONALITY_TOL) -> Optional[Tuple[int, int]]:
    """Smallest ``(m1, m2) != 0`` in ``[-bound, bound]^2`` with ``|w.m| <= tol``, else None."""
    w1, w2 = weights
    r = np.arange(-bound, bound + 1)
    m1, m2 = np.meshgrid(r, r, indexing="ij")
    vals = np.abs(w1 * m1 + w2 * m2)
    vals[bound, bound] = np.inf
    hit = np.argwhere(vals <= tol * max(1.0, abs(w1), abs(w2)))
    if len(hit) == 0:
        return None
    order = np.argsort(np.abs(hit - bound).sum(axis=1), kind="stable")
    i, j = hit[order[0]]
    return int(r[i]), int(r[j])


@dataclass(frozen=True)
class Box:
    """The box ``Q_M = {k : max(|k1|, |k2|) <= M}``."""

    M: int

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 0:
            raise ValueError(f"box half-width must be a non-negative integer, got {self.M}")

    @property
    def width(self) -> int:
        return 2 * self.M + 1

    @property
    def size(self) -> int:
        return self.width ** 2

    def __contains__(self, k) -> bool:
        return max(abs(k[0]), abs(k[1])) <= self.M

    def modes(self) -> Iterator[Mode]:
        r = range(-self.M, self.M + 1)
        for a in r:
            for b in r:
                yield (a, b)

    def coords(self) -> np.ndarray:
        """Integer coordinates of all modes, shape ``(size, 2)``, in flat-index order."""
        r = np.arange(-self.M, self.M + 1)
        k1, k2 = np.meshgrid(r, r, indexing="ij")
        return np.stack([k1.ravel(), k2.ravel()], axis=1)

    def flat_index(self, k) -> int:
        return (k[0] + self.M) * self.width + (k[1] + self.M)


def as_box(b: Union[Box, int]) -> Box:
    return b if isinstance(b, Box) else Box(int(b))


def dispersion(spec: TorusSpec, k) -> float:
    """``w1*k1**2 + w2*k2**2``; exact for integer weights."""
    w1, w2 = spec.weights
    if spec.is_rational:
        p, q = spec.rational
        return float(p * k[0] ** 2 + q * k[1] ** 2)
    return w1 * k[0] ** 2 + w2 * k[1] ** 2


def dispersion_grid(spec: TorusSpec, box: Union[Box, int]) -> np.ndarray:
    box = as_box(box)
    c = box.coords()
    w1, w2 = spec.weights
    return (w1 * c[:, 0] ** 2 + w2 * c[:, 1] ** 2).reshape(box.width, box.width)


def bracket_weights(box: Union[Box, int], s: float) -> np.ndarray:
    """``(1 + |k|^2)^s`` over the box."""
    c = as_box(box).coords()
    w = (1.0 + c[:, 0] ** 2 + c[:, 1] ** 2).astype(float) ** s
    return w.reshape(as_box(box).width, -1)


@dataclass(frozen=True, eq=False)
class ModeField:
    """Complex Fourier amplitudes over ``Q_M``; zero outside the box."""

    box: Box
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        box = as_box(self.box)
        vals = np.array(self.values, dtype=complex)
        if vals.shape != (box.width, box.width):
            raise ValueError(f"values shape {vals.shape} does not match box {box}")
        vals.setflags(write=False)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, box: Union[Box, int]) -> "ModeField":
        box = as_box(box)
        return cls(box, np.zeros((box.width, box.width), dtype=complex))

    @classmethod
    def from_modes(cls, box: Union[Box, int], entries) -> "ModeField":
        """Build from a mapping or iterable of ``(k, value)`` pairs."""
        box = as_box(box)
        vals = np.zeros((box.width, box.width), dtype=complex)
        items = entries.items() if hasattr(entries, "items") else entries
        for k, v in items:
            if k not in box:
                raise ValueError(f"mode {k} outside box Q_{box.M}")
            vals[k[0] + box.M, k[1] + box.M] += v
        return cls(box, vals)

    @classmethod
    def from_flat(cls, box: Union[Box, int], flat) -> "ModeField":
        box = as_box(box)
        return cls(box, np.asarray(flat, dtype=complex).reshape(box.width, box.width))

    def __getitem__(self, k) -> complex:
        if k not in self.box:
            return 0j
        return complex(self.values[k[0] + self.box.M, k[1] + self.box.M])

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def mass(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))

    def support(self) -> list:
        idx = np.argwhere(self.values != 0)
        return [(int(i) - self.box.M, int(j) - self.box.M) for i, j in idx]

    def embed(self, box: Union[Box, int]) -> "ModeField":
        """Re-express on another storage box; refuses to drop nonzero modes."""
        box = as_box(box)
        if box.M >= self.box.M:
            out = np.zeros((box.width, box.width), dtype=complex)
            o = box.M - self.box.M
            out[o:o + self.box.width, o:o + self.box.width] = self.values
            return ModeField(box, out)
        o = self.box.M - box.M
        inner = self.values[o:o + box.width, o:o + box.width]
        if np.any(residual_mask(self.box, box) & (self.values != 0)):
            raise ValueError(f"field has nonzero modes outside Q_{box.M}")
        return ModeField(box, inner)

    def __add__(self, other: "ModeField") -> "ModeField":
        M = max(self.box.M, other.box.M)
        return ModeField(Box(M), self.embed(M).values + other.embed(M).values)

    def __sub__(self, other: "ModeField") -> "ModeField":
        M = max(self.box.M, other.box.M)
        return ModeField(Box(M), self.embed(M).values - other.embed(M).values)

    def scale(self, c: complex) -> "ModeField":
        return ModeField(self.box, c * self.values)

    def to_rows(self) -> list:
        rows = []
        for k1, k2 in self.support():
            v = self[(k1, k2)]
            rows.append((k1, k2, v.real, v.imag))
        return rows

    def to_text(self) -> str:
        """Text table of ``k1 k2 re im`` rows for nonzero modes."""
        return "".join(f"{k1} {k2} {re:.17g} {im:.17g}\n" for k1, k2, re, im in self.to_rows())

    @classmethod
    def from_text(cls, text: str, box: Union[Box, int, None] = None) -> "ModeField":
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k1, k2, re, im = line.split()
            rows.append(((int(k1), int(k2)), complex(float(re), float(im))))
        if box is None:
            box = max([max(abs(k[0]), abs(k[1])) for k, _ in rows], default=0)
        return cls.from_modes(box, rows)

    def to_document(self) -> dict:
        return {"box_half_width": self.box.M,
                "entries": [[k1, k2, re, im] for k1, k2, re, im in self.to_rows()]}

    def to_json(self) -> str:
        return json.dumps(self.to_document())

    @classmethod
    def from_document(cls, doc: dict) -> "ModeField":
        return cls.from_modes(doc["box_half_width"],
                              [((int(e[0]), int(e[1])), complex(e[2], e[3])) for e in doc["entries"]])


def inside_mask(storage: Union[Box, int], box: Union[Box, int]) -> np.ndarray:
    """Boolean mask over the storage box marking modes of ``box``."""
    storage, box = as_box(storage), as_box(box)
    c = storage.coords()
    m = np.maximum(np.abs(c[:, 0]), np.abs(c[:, 1])) <= box.M
    return m.reshape(storage.width, storage.width)


def residual_mask(storage, box) -> np.ndarray:
    return ~inside_mask(storage, box)


def restrict(f: ModeField, box: Union[Box, int]) -> ModeField:
    """Zero every mode outside ``box`` (storage extent unchanged)."""
    return ModeField(f.box, np.where(inside_mask(f.box, box), f.values, 0))


def residual(f: ModeField, box: Union[Box, int]) -> ModeField:
    """Zero every mode inside ``box``."""
    return ModeField(f.box, np.where(inside_mask(f.box, box), 0, f.values))


def sobolev_norm(f: ModeField, s: float) -> float:
    if s < 0:
        raise ValueError("Sobolev index must be non-negative")
    return float(np.sqrt(np.sum(np.abs(f.values) ** 2 * bracket_weights(f.box, s))))


def sobolev_norm_array(flat_values: np.ndarray, box: Union[Box, int], s: float) -> np.ndarray:
    """Sobolev norms along the last axis of flat-indexed states, shape ``(..., size)``."""
    w = bracket_weights(box, s).ravel()
    return np.sqrt(np.sum(np.abs(flat_values) ** 2 * w, axis=-1))


def random_field(box: Union[Box, int], support: Union[Box, int], norm: float, s: float,
                 rng: np.random.Generator) -> ModeField:
    """Complex Gaussian data on ``support`` rescaled to ``||.||_s = norm``."""
    box = as_box(box)
    vals = rng.standard_normal((box.width, box.width)) + 1j * rng.standard_normal((box.width, box.width))
    vals = np.where(inside_mask(box, support), vals, 0)
    f = ModeField(box, vals)
    return f.scale(norm / sobolev_norm(f, s))
