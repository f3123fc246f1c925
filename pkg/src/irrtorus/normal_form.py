"""Order-4 normal form: the auxiliary Hamiltonian chi and its time-1 flow.

Conventions.  The Poisson bracket is
``{f, g} = i sum_j (df/dz_j dg/dzbar_j - df/dzbar_j dg/dz_j)``, under which
``{z_k1 z_k2 zbar_k3 zbar_k4, H0} = i * defect * (same monomial)`` for
``H0 = sum_k lambda_k |z_k|^2``.  The quartic part is
``P = c * sum z_k1 z_k2 zbar_k3 zbar_k4`` over ordered momentum tuples, and
chi carries ``g = i c / defect`` on every term it removes, so that
``{chi, H0} + P`` keeps exactly the resonant and weakly resonant terms.

The vector field is ``X_chi(z)_k = -i dchi/dzbar_k``.  With ``c = 1/2`` the
time-1 flow of ``X_chi`` maps normalized coordinates to the coordinates of
``i dpsi_k/dt = lambda_k psi_k + sum psi_k1 psi_k2 conj(psi_k3)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import List, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from . import _kernels
from .lattice import Box, ModeField, TorusSpec, as_box, dispersion_grid, residual_mask, sobolev_norm
from .resonance import (DEFAULT_WEAK_THRESHOLD, ResonantTuple, classify_array, collect_pairs,
                        defect_values, flat_indices, pair_modes, quads, resonant_mask, resonant_tuple_array,
                        small_divisor_constant, to_tuples, weak_tuple_array)
from .spectral import CubicConvolution

# refuse flows with sqrt(C_N) * ||z0||_s^2 above this
ANALYTICITY_GUARD = 0.1
DEFAULT_ODE_TOL = 1e-10


class NormalFormError(ValueError):
    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = offending


class SupportError(ValueError):
    pass


class LieTransformError(RuntimeError):
    pass


class ChiPart(str, enum.Enum):
    CHI1 = "Chi1"
    CHI2 = "Chi2"


class Direction(str, enum.Enum):
    FORWARD = "forward"
    INVERSE = "inverse"


@dataclass(frozen=True, eq=False)
class ChiTerms:
    """Materialized coefficient table: ordered tuples, ``g`` and part tag."""

    modes: np.ndarray
    g: np.ndarray
    part: np.ndarray   # 0 -> Chi1, 1 -> Chi2
    defect: np.ndarray

    def __len__(self):
        return len(self.g)


@dataclass(frozen=True, eq=False)
class ChiPolynomial:
    """Sparse quartic ``chi = chi1 + chi2`` defined by a selection rule.

    chi1 holds every non-resonant momentum tuple inside ``Q_N``; chi2 every
    momentum tuple of ``Q_L`` with a mode outside ``Q_N`` and
    ``|defect| >= weak_threshold``.  The coefficient of a term is
    ``i * quartic_coefficient / defect``.  Terms are materialized only on
    request (:meth:`terms`); the vector field runs a compiled loop over the
    rule directly.
    """

    spec: TorusSpec
    n_box: Box
    l_box: Box
    weak_threshold: float = DEFAULT_WEAK_THRESHOLD
    quartic_coefficient: float = 1.0

    @cached_property
    def small_divisor_constant(self) -> float:
        return small_divisor_constant(self.spec, self.n_box)

    @cached_property
    def _tables(self):
        L, N = self.l_box.M, self.n_box.M
        qd = quads(L)
        w = 2 * L + 1
        u, ucode = np.unique(qd.A, return_inverse=True)
        Ux, Uy = u[:, None], u[None, :]
        d = defect_values(self.spec, Ux, Uy)
        safe = np.where(d == 0, 1.0, d)
        recip_in = np.where(resonant_mask(self.spec, Ux, Uy), 0.0, 1.0 / safe)
        recip_cross = np.where(np.abs(d) < self.weak_threshold, 0.0, 1.0 / safe)
        xoff = np.ascontiguousarray((qd.q + L) * w)
        yoff = np.ascontiguousarray(qd.q + L)
        inside = np.ascontiguousarray(qd.max_abs() <= N)
        return xoff, yoff, ucode.astype(np.int64), inside, recip_in, recip_cross

    def slot4_sum(self, z_flat: np.ndarray) -> np.ndarray:
        """``S_k = sum over terms with k4 = k of z_k1 z_k2 conj(z_k3) / defect``."""
        xoff, yoff, ucode, inside, rin, rcross = self._tables
        out = np.zeros_like(z_flat, dtype=complex)
        return _kernels.chi_slot4_sum(np.ascontiguousarray(z_flat, dtype=complex), xoff, yoff, ucode, inside,
                                      rin, rcross, out)

    def vector_field_flat(self, z_flat: np.ndarray) -> np.ndarray:
        return 2.0 * self.quartic_coefficient * self.slot4_sum(z_flat)

    def value_flat(self, z_flat: np.ndarray) -> float:
        S = self.slot4_sum(z_flat)
        return float(np.real(1j * self.quartic_coefficient * np.vdot(z_flat, S)))

    def terms(self) -> ChiTerms:
        L, N = self.l_box.M, self.n_box.M
        qd = quads(L)
        inside = qd.max_abs() <= N
        spec, thr = self.spec, self.weak_threshold

        def select(ix, jy, Ax, Ay, d):
            both = inside[ix] & inside[jy]
            return (both & ~resonant_mask(spec, Ax, Ay)) | (~both & (np.abs(d) >= thr))

        i, j, d = collect_pairs(spec, L, select)
        modes = pair_modes(qd, i, j)
        part = np.where(inside[i] & inside[j], 0, 1)
        order = np.lexsort(modes.reshape(len(modes), 8).T[::-1])
        return ChiTerms(modes[order], 1j * self.quartic_coefficient / d[order], part[order], d[order])

    def coefficient(self, t) -> complex:
        """Coefficient ``g`` of an ordered tuple (0 if it is not a chi term)."""
        t = np.asarray(t, dtype=np.int64)
        L, N = self.l_box.M, self.n_box.M
        if not np.all(t[0] + t[1] == t[2] + t[3]) or np.abs(t).max() > L:
            return 0j
        Ax = int(t[0, 0] ** 2 + t[1, 0] ** 2 - t[2, 0] ** 2 - t[3, 0] ** 2)
        Ay = int(t[0, 1] ** 2 + t[1, 1] ** 2 - t[2, 1] ** 2 - t[3, 1] ** 2)
        d = float(defect_values(self.spec, np.int64(Ax), np.int64(Ay)))
        if np.abs(t).max() <= N:
            if resonant_mask(self.spec, Ax, Ay):
                return 0j
        elif abs(d) < self.weak_threshold:
            return 0j
        return 1j * self.quartic_coefficient / d


@dataclass(frozen=True, eq=False)
class NormalFormDecomposition:
    """Resonant terms ``L`` (inside ``Q_N``) and weak terms ``U`` (crossing, inside ``Q_L``)."""

    resonant_modes: np.ndarray
    weak_modes: np.ndarray
    weak_defects: np.ndarray

    @property
    def resonant_terms(self) -> List[ResonantTuple]:
        return to_tuples(self.resonant_modes, np.zeros(len(self.resonant_modes)))

    @property
    def weak_terms(self) -> List[ResonantTuple]:
        return to_tuples(self.weak_modes, self.weak_defects)


def _refuse_rational(spec: TorusSpec, L: int):
    modes, _ = resonant_tuple_array(spec, min(L, 4))
    codes = classify_array(modes) if len(modes) else np.empty(0, int)
    bad = modes[codes == 2]
    offending = tuple(map(tuple, bad[0].tolist())) if len(bad) else None
    raise NormalFormError(
        f"rational torus {spec.rational}: resonances are not decoupled per coordinate"
        + (f"; nonparallel resonant tuple {offending}" if offending else ""), offending)


def build_chi(spec: TorusSpec, N, L, weak_threshold: float = DEFAULT_WEAK_THRESHOLD,
              quartic_coefficient: float = 1.0):
    """Construct chi and the resonant/weak decomposition for an irrational torus.

    Returns ``(ChiPolynomial, NormalFormDecomposition)``.
    """
    N, L = as_box(N), as_box(L)
    if not N.M < L.M:
        raise ValueError(f"need N < L, got N={N.M}, L={L.M}")
    if spec.is_rational:
        _refuse_rational(spec, L.M)
    chi = ChiPolynomial(spec, N, L, float(weak_threshold), float(quartic_coefficient))
    res_modes, _ = resonant_tuple_array(spec, N)
    weak_modes, weak_d = weak_tuple_array(spec, N, L, weak_threshold)
    return chi, NormalFormDecomposition(res_modes, weak_modes, weak_d)


def _as_storage(chi: ChiPolynomial, z: ModeField) -> np.ndarray:
    L = chi.l_box
    if z.box.M > L.M and np.any(residual_mask(z.box, L) & (z.values != 0)):
        raise SupportError(f"field has modes outside the chi lattice Q_{L.M}")
    return z.embed(L).flat.copy() if z.box.M != L.M else z.flat.copy()


def chi_vector_field(chi: ChiPolynomial, z: ModeField) -> ModeField:
    """``X_chi(z)_k = -i dchi/dzbar_k`` on the chi lattice ``Q_L``."""
    return ModeField.from_flat(chi.l_box, chi.vector_field_flat(_as_storage(chi, z)))


def chi_value(chi: ChiPolynomial, z: ModeField) -> float:
    return chi.value_flat(_as_storage(chi, z))


def chi_gradient(chi: ChiPolynomial, z: ModeField) -> ModeField:
    """``dchi/dzbar_k``; real directional derivative along h is ``2 Re <grad, h>``."""
    return ModeField.from_flat(chi.l_box, 1j * chi.vector_field_flat(_as_storage(chi, z)))


def lie_transform(chi: ChiPolynomial, z0: ModeField, direction=Direction.FORWARD,
                  ode_tol: float = DEFAULT_ODE_TOL, s: float = 1.0,
                  guard: float = ANALYTICITY_GUARD) -> ModeField:
    """Time-1 (forward) or time-(-1) (inverse) flow of ``X_chi`` from ``z0``.

    Refuses data with ``sqrt(C_N) * ||z0||_s^2 > guard``.  Integrates with an
    adaptive embedded Runge-Kutta pair (DOP853) at relative tolerance
    ``ode_tol``.
    """
    direction = Direction(direction)
    y0 = _as_storage(chi, z0)
    r = sobolev_norm(ModeField.from_flat(chi.l_box, y0), s)
    if np.sqrt(chi.small_divisor_constant) * r ** 2 > guard:
        raise LieTransformError(
            f"||z0||_s = {r:.3g} outside the analyticity ball (C_N = {chi.small_divisor_constant:.3g}, guard {guard})")
    if not np.any(y0):
        return ModeField.from_flat(chi.l_box, y0)
    t_end = 1.0 if direction is Direction.FORWARD else -1.0
    atol = ode_tol * float(np.abs(y0).max())
    sol = solve_ivp(lambda t, y: chi.vector_field_flat(y), (0.0, t_end), y0, method="DOP853",
                    rtol=ode_tol, atol=atol)
    if not sol.success:
        raise LieTransformError(f"Lie flow failed: {sol.message}")
    return ModeField.from_flat(chi.l_box, sol.y[:, -1])


# ---------------------------------------------------------------------------
# cancellation checks


def termwise_identity_residual(chi: ChiPolynomial) -> float:
    """Max over stored terms of ``|g * i * defect + c|``: each term cancels its P coefficient."""
    t = chi.terms()
    if len(t) == 0:
        return 0.0
    return float(np.abs(t.g * 1j * t.defect + chi.quartic_coefficient).max())


def _monomial_sum(z_flat: np.ndarray, modes: np.ndarray, L: int) -> complex:
    if len(modes) == 0:
        return 0j
    idx = flat_indices(modes, L)
    return complex(np.sum(z_flat[idx[:, 0]] * z_flat[idx[:, 1]] * np.conj(z_flat[idx[:, 2]] * z_flat[idx[:, 3]])))


def poisson_bracket_with_h0(chi: ChiPolynomial, z_flat: np.ndarray) -> float:
    """``{chi, H0}(z)`` from the gradient of chi."""
    lam = dispersion_grid(chi.spec, chi.l_box).ravel()
    grad = 1j * chi.vector_field_flat(z_flat)
    return float(-2.0 * np.imag(np.sum(lam * z_flat * np.conj(grad))))


def verify_poisson_cancellation(chi: ChiPolynomial, decomposition: NormalFormDecomposition, spec: TorusSpec,
                                sample_fields: Sequence[ModeField]) -> dict:
    """Evaluate ``{chi, H0} + P - L - U`` on sample fields.

    P is evaluated through the dealiased FFT cubic (all momentum tuples of
    ``Q_L``), the bracket through the chi gradient, and L, U from their term
    lists, so the three routes are independent.
    """
    L = chi.l_box.M
    c = chi.quartic_coefficient
    conv = CubicConvolution(L)
    residuals = []
    for f in sample_fields:
        z = _as_storage(chi, f)
        bracket = poisson_bracket_with_h0(chi, z)
        P = c * conv.quartic(z)
        Lv = c * _monomial_sum(z, decomposition.resonant_modes, L)
        Uv = c * _monomial_sum(z, decomposition.weak_modes, L)
        residuals.append(abs(bracket + P - Lv - Uv))
    n_terms = len(quads(L).A) ** 2
    tol = 1e-10 * n_terms
    worst = max(residuals, default=0.0)
    return {"max_residual": float(worst), "residuals": [float(r) for r in residuals],
            "term_count": int(n_terms), "tolerance": tol, "pass": bool(worst < tol)}
