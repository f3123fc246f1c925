"""Truncated cubic NLS dynamics on the mode lattice.

Four systems share the storage box ``Q_L`` and flat mode indexing:

* full:       ``i psi_k' = lambda_k psi_k + sum_{k1+k2-k3=k} psi_k1 psi_k2 conj(psi_k3)``
* condensed:  ``i v_k' = lambda_k v_k + sum over resonant and weak terms``
* resonant:   ``i u_k' = sum over resonant and weak terms u_k1 u_k2 conj(u_k3) exp(-i D t)``
  with ``D = lambda_k1 + lambda_k2 - lambda_k3 - lambda_k``

The resonant system is the condensed one after ``u_k = exp(i lambda_k t) v_k``.
The resonant terms are the resonant tuples inside ``Q_N``; the weak terms are
the tuples of ``Q_L`` with a mode outside ``Q_N`` and ``|D| < weak_threshold``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from . import _kernels
from .lattice import (Box, ModeField, TorusSpec, as_box, dispersion_grid, inside_mask, random_field,
                      sobolev_norm, sobolev_norm_array)
from .normal_form import ANALYTICITY_GUARD, Direction, build_chi, lie_transform
from .resonance import (DEFAULT_WEAK_THRESHOLD, classify_array, flat_indices, resonant_tuple_array,
                        small_divisor_constant, weak_tuple_array)
from .spectral import CubicConvolution

ACTIVATION_THRESHOLD = 1e-6
CONFINEMENT_TOL = 1e-9
DEFAULT_TOLERANCE = 1e-10
DEFAULT_OUTPUT_COUNT = 201
TAYLOR_CAP = 10
# normal-form coefficient matching the full system's normalization
NLS_QUARTIC_COEFFICIENT = 0.5


class SimulationError(RuntimeError):
    pass


class WindowWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    """Parameters shared by the integrators and the verification pipeline.

    ``t_final`` is a user cap; the effective horizon is
    ``min(1/epsilon**2, window_constant / ||u0||_s**2, t_final)``.
    ``dt_controls`` is the adaptive relative tolerance; ``split_step`` the
    fixed step of the split-step full integrator.
    """

    spec: TorusSpec
    N: Box
    L: Box
    M: Box
    s: float = 1.5
    epsilon: float = 0.05
    t_final: Optional[float] = None
    dt_controls: float = DEFAULT_TOLERANCE
    seed: int = 0
    weak_threshold: float = DEFAULT_WEAK_THRESHOLD
    window_constant: float = 1.0
    n_output: int = DEFAULT_OUTPUT_COUNT
    split_step: float = 0.005
    activation_threshold: float = ACTIVATION_THRESHOLD
    confinement_tol: float = CONFINEMENT_TOL

    def __post_init__(self):
        for name in ("N", "L", "M"):
            object.__setattr__(self, name, as_box(getattr(self, name)))
        if not 3 * self.M.M < self.N.M < self.L.M:
            raise ValueError(f"need 3M < N < L, got M={self.M.M}, N={self.N.M}, L={self.L.M}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.s > 1:
            raise ValueError("Sobolev index s must exceed 1")
        if self.t_final is not None and not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if self.n_output < 2:
            raise ValueError("n_output must be at least 2")

    def with_(self, **kw) -> "SimulationConfig":
        return replace(self, **kw)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States on ``Q_L`` (flat, shape ``(n_times, size)``) with conserved records."""

    box: Box
    times: np.ndarray
    values: np.ndarray
    conserved: Dict[str, np.ndarray]
    t_bound: str = "cap"
    window_exceeded: bool = False

    @property
    def states(self) -> List[ModeField]:
        return [ModeField.from_flat(self.box, v) for v in self.values]

    def state(self, i: int) -> ModeField:
        return ModeField.from_flat(self.box, self.values[i])

    def amplitude(self, k) -> np.ndarray:
        return np.abs(self.values[:, self.box.flat_index(k)])


@dataclass(frozen=True, eq=False)
class DerivativeTable:
    """``entries[n]`` is the flat array of ``d^n u_k / dt^n`` at 0 over ``Q_L``."""

    box: Box
    order: int
    entries: np.ndarray

    def __getitem__(self, key) -> complex:
        k, n = key
        if k not in self.box:
            return 0j
        return complex(self.entries[n, self.box.flat_index(k)])

    def taylor(self, t: float) -> np.ndarray:
        return sum(self.entries[n] * t ** n / math.factorial(n) for n in range(self.order + 1))


# ---------------------------------------------------------------------------
# term lists


@dataclass(frozen=True, eq=False)
class TermList:
    """Flat indices ``(k1, k2, k3, k4)`` and gauge defects; the first ``n_resonant`` rows are resonant."""

    L: int
    idx: np.ndarray
    delta: np.ndarray
    n_resonant: int

    def restricted(self, include_weak: bool) -> "TermList":
        if include_weak:
            return self
        n = self.n_resonant
        return TermList(self.L, self.idx[:n], self.delta[:n], n)


@lru_cache(maxsize=8)
def term_list(spec: TorusSpec, N: int, L: int, weak_threshold: float = DEFAULT_WEAK_THRESHOLD) -> TermList:
    res, res_d = resonant_tuple_array(spec, N)
    weak, weak_d = weak_tuple_array(spec, N, L, weak_threshold)
    modes = np.concatenate([res, weak]) if len(weak) else res
    idx = np.ascontiguousarray(flat_indices(modes, L).astype(np.int64))
    delta = np.ascontiguousarray(np.concatenate([res_d, weak_d]).astype(float))
    for a in (idx, delta):
        a.setflags(write=False)
    return TermList(L, idx, delta, len(res))


def _terms_for(config: SimulationConfig, include_weak: bool = True) -> TermList:
    return term_list(config.spec, config.N.M, config.L.M, float(config.weak_threshold)).restricted(include_weak)


def _storage(config: SimulationConfig, f: ModeField) -> np.ndarray:
    if f.box.M > config.L.M and np.any(~inside_mask(f.box, config.L) & (f.values != 0)):
        raise ValueError(f"initial data has modes outside Q_{config.L.M}")
    return f.embed(config.L).flat.astype(complex)


def term_rhs(terms: TermList, u: np.ndarray, t: float = 0.0) -> np.ndarray:
    out = np.zeros_like(u)
    return _kernels.term_sum(np.ascontiguousarray(u), terms.idx, terms.delta, float(t), out)


# ---------------------------------------------------------------------------
# horizon policy


def analyticity_window(config: SimulationConfig, u0: ModeField) -> float:
    r = sobolev_norm(u0, config.s)
    return math.inf if r == 0 else config.window_constant / r ** 2


def resolve_t_final(config: SimulationConfig, u0: ModeField) -> Tuple[float, str]:
    """Effective horizon and the name of the active bound."""
    bounds = {"epsilon": 1.0 / config.epsilon ** 2, "window": analyticity_window(config, u0)}
    if config.t_final is not None:
        bounds["cap"] = config.t_final
    name = min(bounds, key=bounds.get)
    return bounds[name], name


def _horizon(config: SimulationConfig, u0: ModeField) -> Tuple[float, str, bool]:
    window = analyticity_window(config, u0)
    if config.t_final is not None:
        t, name = config.t_final, "cap"
    else:
        t, name = resolve_t_final(config, u0)
    exceeded = t > window * (1 + 1e-12)
    if exceeded:
        warnings.warn(f"t_final={t:.4g} exceeds the analyticity window {window:.4g}", WindowWarning, stacklevel=3)
    return t, name, exceeded


def _output_times(config: SimulationConfig, t_final: float) -> np.ndarray:
    return np.linspace(0.0, t_final, config.n_output)


# ---------------------------------------------------------------------------
# diagnostics


def _lattice_data(spec: TorusSpec, L: Box):
    lam = dispersion_grid(spec, L).ravel()
    c = L.coords().astype(float)
    return lam, c


def _momentum(values: np.ndarray, coords: np.ndarray) -> np.ndarray:
    return (np.abs(values) ** 2) @ coords


def _resonant_records(config: SimulationConfig, terms: TermList, values: np.ndarray) -> Dict[str, np.ndarray]:
    _, coords = _lattice_data(config.spec, config.L)
    res = terms.restricted(False)
    ham = np.array([0.5 * np.real(np.vdot(u, term_rhs(res, u))) for u in values])
    return {"mass": np.sum(np.abs(values) ** 2, axis=1), "hamiltonian": ham, "momentum": _momentum(values, coords)}


def full_hamiltonian(spec: TorusSpec, L: Box, psi: np.ndarray, conv: Optional[CubicConvolution] = None) -> float:
    """``1/2 sum lambda |psi|^2 + 1/4 sum over momentum tuples`` on ``Q_L``."""
    conv = conv or CubicConvolution(L.M)
    lam = dispersion_grid(spec, L).ravel()
    return float(0.5 * np.sum(lam * np.abs(psi) ** 2) + 0.25 * conv.quartic(psi))


# ---------------------------------------------------------------------------
# integrators


def _solve(rhs, y0: np.ndarray, times: np.ndarray, tol: float, what: str) -> np.ndarray:
    if not np.any(y0):
        return np.zeros((len(times), len(y0)), dtype=complex)
    atol = tol * float(np.abs(y0).max())
    sol = solve_ivp(rhs, (times[0], times[-1]), y0, method="DOP853", t_eval=times, rtol=tol, atol=atol)
    if not sol.success:
        raise SimulationError(f"{what} integration failed: {sol.message}")
    return sol.y.T.copy()


def integrate_resonant(config: SimulationConfig, u0: ModeField, include_weak: bool = True) -> Trajectory:
    """Gauged resonant system; ``include_weak=False`` keeps only the resonant terms."""
    terms = _terms_for(config, include_weak)
    y0 = _storage(config, u0)
    t_final, bound, exceeded = _horizon(config, u0)
    times = _output_times(config, t_final)
    vals = _solve(lambda t, u: -1j * term_rhs(terms, u, t), y0, times, config.dt_controls, "resonant")
    return Trajectory(config.L, times, vals, _resonant_records(config, terms, vals), bound, exceeded)


def integrate_condensed(config: SimulationConfig, v0: ModeField, include_weak: bool = True) -> Trajectory:
    """Condensed system with the linear rotation kept (integrated directly)."""
    terms = _terms_for(config, include_weak)
    lam, _ = _lattice_data(config.spec, config.L)
    y0 = _storage(config, v0)
    t_final, bound, exceeded = _horizon(config, v0)
    times = _output_times(config, t_final)
    vals = _solve(lambda t, v: -1j * (lam * v + term_rhs(terms, v)), y0, times, config.dt_controls, "condensed")
    return Trajectory(config.L, times, vals, _resonant_records(config, terms, vals), bound, exceeded)


def gauge(spec: TorusSpec, L: Box, times: np.ndarray, values: np.ndarray, inverse: bool = False) -> np.ndarray:
    """``u = exp(i lambda t) v`` (or the inverse) applied row-wise."""
    lam = dispersion_grid(spec, L).ravel()
    sign = -1.0 if inverse else 1.0
    return values * np.exp(sign * 1j * np.outer(times, lam))


def _implicit_midpoint(conv: CubicConvolution, psi: np.ndarray, h: float, tol: float = 1e-15) -> np.ndarray:
    new = psi - 1j * h * conv(psi)
    scale = max(1.0, float(np.abs(psi).max()))
    for _ in range(100):
        nxt = psi - 1j * h * conv(0.5 * (psi + new))
        if np.abs(nxt - new).max() <= tol * scale:
            return nxt
        new = nxt
    raise SimulationError("implicit midpoint iteration did not converge; reduce split_step")


def integrate_full(config: SimulationConfig, psi0: ModeField, method: str = "split-step",
                   grid: Optional[int] = None) -> Trajectory:
    """Galerkin-truncated NLS on ``Q_L`` with an alias-free padded FFT.

    ``split-step``: Strang splitting, exact linear rotation, implicit-midpoint
    nonlinear substep (mass is conserved to round-off).  ``lawson``: adaptive
    DOP853 in the interaction picture ``w = exp(i lambda t) psi``.
    """
    conv = CubicConvolution(config.L.M, grid)
    lam, coords = _lattice_data(config.spec, config.L)
    y0 = _storage(config, psi0)
    t_final, bound, exceeded = _horizon(config, psi0)
    times = _output_times(config, t_final)
    if method == "lawson":
        def rhs(t, w):
            ph = np.exp(1j * lam * t)
            return -1j * ph * conv(w / ph)
        vals = gauge(config.spec, config.L, times, _solve(rhs, y0, times, config.dt_controls, "full"), inverse=True)
    elif method == "split-step":
        vals = np.empty((len(times), len(y0)), dtype=complex)
        vals[0] = psi = y0
        for n in range(1, len(times)):
            span = times[n] - times[n - 1]
            steps = max(1, int(math.ceil(span / config.split_step - 1e-9)))
            h = span / steps
            half = np.exp(-0.5j * lam * h)
            for _ in range(steps):
                psi = _implicit_midpoint(conv, half * psi, h) * half
            vals[n] = psi
    else:
        raise ValueError(f"unknown method {method!r}")
    records = {"mass": np.sum(np.abs(vals) ** 2, axis=1),
               "hamiltonian": np.array([full_hamiltonian(config.spec, config.L, v, conv) for v in vals]),
               "momentum": _momentum(vals, coords)}
    return Trajectory(config.L, times, vals, records, bound, exceeded)


# ---------------------------------------------------------------------------
# Taylor recursion


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def taylor_derivatives(config: SimulationConfig, u0: ModeField, n_max: int,
                       include_weak: bool = True) -> DerivativeTable:
    """Exact derivative recursion of the resonant system at ``t = 0``.

    ``D^n u_k = -i sum_terms sum_{a0+..+a3=n-1} multinom * (-iD)^a0
    D^a1 u_k1 D^a2 u_k2 conj(D^a3 u_k3)``.  Terms whose factors vanish
    identically contribute exact zeros.
    """
    if not 0 <= n_max <= TAYLOR_CAP:
        raise ValueError(f"n_max={n_max} outside [0, {TAYLOR_CAP}]")
    terms = _terms_for(config, include_weak)
    D = np.zeros((n_max + 1, config.L.size), dtype=complex)
    D[0] = _storage(config, u0)
    i1, i2, i3, i4 = terms.idx.T
    lam_pow = [np.ones(len(terms.delta), dtype=complex)]
    for _ in range(n_max):
        lam_pow.append(lam_pow[-1] * (-1j * terms.delta))
    size = config.L.size
    for n in range(1, n_max + 1):
        acc = np.zeros(size, dtype=complex)
        for a0, a1, a2, a3 in _compositions(n - 1, 4):
            x, y, z = D[a1][i1], D[a2][i2], D[a3][i3]
            live = (x != 0) & (y != 0) & (z != 0)
            if not live.any():
                continue
            coef = math.factorial(n - 1) // (math.factorial(a0) * math.factorial(a1) * math.factorial(a2)
                                             * math.factorial(a3))
            p = coef * lam_pow[a0][live] * x[live] * y[live] * np.conj(z[live])
            acc += np.bincount(i4[live], p.real, size) + 1j * np.bincount(i4[live], p.imag, size)
        D[n] = -1j * acc
    return DerivativeTable(config.L, n_max, D)


# ---------------------------------------------------------------------------
# confinement


def support_confinement_report(trajectory: Trajectory, M, N=None) -> dict:
    """Per-time max modulus outside ``Q_M``, split into the ``Q_N`` annulus and the exterior."""
    M = as_box(M)
    box = trajectory.box
    N = as_box(N) if N is not None else box
    outside = ~inside_mask(box, M).ravel()
    annulus = outside & inside_mask(box, N).ravel()
    exterior = ~inside_mask(box, N).ravel()
    amp = np.abs(trajectory.values)

    def region_max(mask):
        return amp[:, mask].max(axis=1) if mask.any() else np.zeros(len(amp))

    a, e = region_max(annulus), region_max(exterior)
    return {"times": trajectory.times, "annulus": a, "exterior": e, "outside": np.maximum(a, e),
            "max_outside": float(max(a.max(initial=0.0), e.max(initial=0.0)))}


def activation_time(trajectory: Trajectory, k, threshold: float = ACTIVATION_THRESHOLD) -> Optional[float]:
    """First output time at which ``|u_k|`` crosses ``threshold`` (linear interpolation)."""
    a = trajectory.amplitude(k)
    hit = np.nonzero(a >= threshold)[0]
    if len(hit) == 0:
        return None
    i = int(hit[0])
    if i == 0:
        return 0.0
    t0, t1, a0, a1 = trajectory.times[i - 1], trajectory.times[i], a[i - 1], a[i]
    return float(t0 + (threshold - a0) / (a1 - a0) * (t1 - t0))


def random_initial_data(config: SimulationConfig) -> ModeField:
    """Gaussian data on ``Q_M`` with ``||.||_s = epsilon``, deterministic in ``seed``."""
    return random_field(config.L, config.M, config.epsilon, config.s, np.random.default_rng(config.seed))


# ---------------------------------------------------------------------------
# three-step cascade


def closure(terms: TermList, seed_indices: Sequence[int], size: int, steps: Optional[int] = None) -> np.ndarray:
    """Modes reachable from ``seed_indices`` through the term list (boolean mask over flat indices)."""
    live = np.zeros(size, dtype=bool)
    live[list(seed_indices)] = True
    i1, i2, i3, i4 = terms.idx.T
    n = 0
    while steps is None or n < steps:
        hit = live[i1] & live[i2] & live[i3]
        new = live.copy()
        new[i4[hit]] = True
        n += 1
        if np.array_equal(new, live):
            break
        live = new
    return live


@dataclass(frozen=True)
class CascadeInstance:
    P1: Tuple[int, int]
    P2: Tuple[int, int]
    P3: Tuple[int, int]
    Q1: Tuple[int, int]
    Q2: Tuple[int, int]
    Q3: Tuple[int, int]
    Q4: Tuple[int, int]

    @property
    def support(self):
        return [self.P1, self.P2, self.P3, self.Q1]

    @property
    def targets(self):
        return [self.Q2, self.Q3, self.Q4]


# found by find_cascade_instance(4, 5) on the square torus
DEFAULT_CASCADE = CascadeInstance(P1=(-4, -3), P2=(0, -1), P3=(-2, -2), Q1=(-3, 0), Q2=(-1, -4), Q3=(-1, 1), Q4=(1, -3))


def _is_nonparallel(spec: TorusSpec, t) -> bool:
    t = np.asarray(t)
    if not np.all(t[0] + t[1] == t[2] + t[3]):
        return False
    lam = [spec.weights[0] * k[0] ** 2 + spec.weights[1] * k[1] ** 2 for k in t]
    if lam[0] + lam[1] != lam[2] + lam[3]:
        return False
    return bool(classify_array(t[None])[0] == 2)


def validate_cascade(instance: CascadeInstance, L, spec: Optional[TorusSpec] = None, box: int = 4) -> List[str]:
    """Reasons the instance fails the cascade geometry (empty when valid)."""
    spec = spec or TorusSpec.square()
    L = as_box(L)
    c = instance
    pts = [c.P1, c.P2, c.P3, c.Q1, c.Q2, c.Q3, c.Q4]
    problems = []
    if len(set(pts)) != 7:
        problems.append("points not distinct")
    if any(max(abs(p[0]), abs(p[1])) > L.M for p in pts):
        problems.append(f"points outside Q_{L.M}")
        return problems
    for name, t in (("(P1,P2,Q1,Q2)", (c.P1, c.P2, c.Q1, c.Q2)), ("(Q1,P2,P3,Q3)", (c.Q1, c.P2, c.P3, c.Q3)),
                    ("(Q2,Q3,Q1,Q4)", (c.Q2, c.Q3, c.Q1, c.Q4))):
        if not _is_nonparallel(spec, t):
            problems.append(f"{name} is not a nonparallel resonant tuple")
    rational = term_list(spec, box, L.M)
    irr = term_list(TorusSpec.make_irrational(1.0, math.sqrt(2.0)), box, L.M)
    idx = [L.flat_index(p) for p in pts]
    q4 = idx[6]
    if closure(rational, idx[:3], L.size)[q4]:
        problems.append("Q4 reachable without Q1")
    if closure(rational, idx[:4], L.size, steps=1)[q4]:
        problems.append("Q4 driven directly by the initial support")
    irr_reach = closure(irr, idx[:4], L.size)
    if any(irr_reach[i] for i in idx[4:]):
        problems.append("targets reachable under irrational weights")
    return problems


def find_cascade_instance(box: int = 4, L: int = 5) -> CascadeInstance:
    """Deterministic search over nonparallel resonant tuples of ``Q_box`` on the square torus."""
    spec = TorusSpec.square()
    modes, _ = resonant_tuple_array(spec, box)
    nonpar = modes[classify_array(modes) == 2]
    by_pair: Dict[tuple, list] = {}
    for t in nonpar.tolist():
        by_pair.setdefault((tuple(t[0]), tuple(t[1])), []).append(t)
    nonpar_set = {tuple(map(tuple, t)) for t in nonpar.tolist()}
    for t in nonpar.tolist():
        P1, P2, Q1, Q2 = map(tuple, t)
        for t2 in by_pair.get((Q1, P2), []):
            P3, Q3 = tuple(t2[2]), tuple(t2[3])
            Q4 = (Q2[0] + Q3[0] - Q1[0], Q2[1] + Q3[1] - Q1[1])
            if (Q2, Q3, Q1, Q4) not in nonpar_set:
                continue
            inst = CascadeInstance(P1, P2, P3, Q1, Q2, Q3, Q4)
            if not validate_cascade(inst, L, spec, box):
                return inst
    raise SimulationError(f"no cascade instance in Q_{box}")


def three_step_cascade_demo(L=5, spec: Optional[TorusSpec] = None, instance: Optional[CascadeInstance] = None,
                            t_final: float = 1.0, populate_q1: bool = True, box: int = 4,
                            tolerance: float = DEFAULT_TOLERANCE, n_output: int = 2001) -> dict:
    """Resonant run from unit data on ``{P1, P2, P3, Q1}``; activation times of ``Q2, Q3, Q4``."""
    spec = spec or TorusSpec.square()
    instance = instance or DEFAULT_CASCADE
    L = as_box(L)
    cfg = SimulationConfig(spec, box, L, 1, s=1.5, epsilon=1.0, t_final=t_final, dt_controls=tolerance,
                           n_output=n_output)
    data = {p: 1.0 for p in instance.support}
    if not populate_q1:
        data[instance.Q1] = 0.0
    u0 = ModeField.from_modes(L, data)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WindowWarning)
        traj = integrate_resonant(cfg, u0)
    names = ["Q2", "Q3", "Q4"]
    act = {n: activation_time(traj, p, cfg.activation_threshold) for n, p in zip(names, instance.targets)}
    peak = {n: float(traj.amplitude(p).max()) for n, p in zip(names, instance.targets)}
    order_ok = (act["Q4"] is not None and act["Q2"] is not None and act["Q3"] is not None
                and act["Q2"] < act["Q4"] and act["Q3"] < act["Q4"])
    return {"spec": spec.to_dict(), "instance": {k: list(v) for k, v in instance.__dict__.items()},
            "populate_q1": populate_q1, "t_final": t_final, "activation_times": act, "peak_amplitudes": peak,
            "order_ok": bool(order_ok), "window_exceeded": traj.window_exceeded, "trajectory": traj}


# ---------------------------------------------------------------------------
# theorem pipeline


def _strided(n: int, count: int) -> np.ndarray:
    return np.unique(np.linspace(0, n - 1, min(count, n)).round().astype(int))


def theorem_pipeline(config: SimulationConfig, gamma: float, n_pullback: int = 21, full_method: str = "lawson",
                     gamma_grid: Optional[Sequence[float]] = None, guard: float = ANALYTICITY_GUARD,
                     psi0: Optional[ModeField] = None) -> dict:
    """Compare the full dynamics with the resonant system through the normal-form flow.

    ``z(0) = v(0) = u(0) = psi0``.  The full system is run from ``psi0``
    (for the ``|psi_j| < epsilon**gamma`` check) and from ``T(psi0)``, whose
    pullback ``z(t) = T^{-1}(psi(t))`` is compared with the gauged resonant
    trajectory ``v(t)``.
    """
    if not gamma < 3:
        raise ValueError("gamma must be below 3")
    if config.spec.is_rational:
        raise ValueError("theorem pipeline requires an irrational torus")
    C = small_divisor_constant(config.spec, config.N)
    eps = config.epsilon
    if math.sqrt(C) * eps ** 2 > guard:
        raise ValueError(f"epsilon={eps} violates the smallness gate sqrt(C_N) eps^2 <= {guard}")
    chi, _ = build_chi(config.spec, config.N, config.L, config.weak_threshold, NLS_QUARTIC_COEFFICIENT)
    psi0 = psi0 if psi0 is not None else random_initial_data(config)
    t_final, bound = resolve_t_final(config, psi0)
    cfg = config.with_(t_final=t_final)
    tol = config.dt_controls

    u = integrate_resonant(cfg, psi0)
    v = gauge(config.spec, config.L, u.times, u.values, inverse=True)
    psi = integrate_full(cfg, psi0, method=full_method)
    psi_z0 = lie_transform(chi, psi0, Direction.FORWARD, tol, config.s, guard)
    with warnings.catch_warnings():
        # T(psi0) is O(eps^3) larger than psi0; the horizon stays the one resolved for psi0
        warnings.simplefilter("ignore", WindowWarning)
        psi_z = integrate_full(cfg, psi_z0, method=full_method)

    samples = _strided(len(u.times), n_pullback)
    z = np.array([lie_transform(chi, psi_z.state(i), Direction.INVERSE, tol, config.s, guard).flat
                  for i in samples])
    gap = sobolev_norm_array(z - v[samples], config.L, config.s)

    outside = ~inside_mask(config.L, config.M).ravel()
    sup_psi = float(np.abs(psi.values[:, outside]).max())
    sup_psi_z = float(np.abs(psi_z.values[:, outside]).max())
    sup_z = float(np.abs(z[:, outside]).max())
    sup_v = float(np.abs(v[:, outside]).max())
    threshold = eps ** gamma
    grid = np.round(np.arange(2.0, 3.0 + 1e-9, 0.05), 10) if gamma_grid is None else np.asarray(gamma_grid)
    passing = [float(g) for g in grid if sup_psi < eps ** g]
    mass0 = psi.conserved["mass"][0]
    report = {
        "epsilon": eps, "gamma": gamma, "threshold": threshold, "t_final": t_final, "t_bound": bound,
        "small_divisor_constant": C, "sup_psi_outside": sup_psi, "sup_psi_z_outside": sup_psi_z,
        "sup_z_outside": sup_z, "sup_v_outside": sup_v,
        "margin": threshold / sup_psi if sup_psi > 0 else math.inf,
        "duhamel_gap": float(gap.max()), "duhamel_ratio": float(gap.max() / eps ** 3),
        "largest_passing_gamma": max(passing) if passing else None,
        "mass_drift": float(np.abs(psi.conserved["mass"] - mass0).max() / mass0),
        "pass": bool(sup_psi < threshold),
    }
    return {"report": report, "times": u.times, "pullback_times": u.times[samples], "gap": gap,
            "psi": psi, "resonant": u}
