"""Observables: complex-valued functions on the state space.

Observables are immutable construction trees that are evaluated on demand
on an ``(n, dim)`` array of states, so the Koopman action is literal
composition ``x -> f(T x)`` rather than interpolation of tabulated values.
Arithmetic operators build new trees::

    f = FourierMode(1)
    g = 2.0 * f * FourierMode(-3) + 1
    Kg = koopman_apply(CircleRotation(0.25), g)
"""

from dataclasses import dataclass
from itertools import product as _iproduct
from typing import Tuple

import numpy as np

from .errors import DomainError, InvariantError

__all__ = [
    "as_points",
    "Observable",
    "Constant",
    "Coordinate",
    "FourierMode",
    "Monomial",
    "StateVector",
    "Indicator",
    "FunctionObservable",
    "Sum",
    "Scaled",
    "Product",
    "Composed",
    "MarkovAction",
    "ClampParams",
    "Clamped",
    "LinearCombination",
    "Dictionary",
    "koopman_apply",
    "product",
    "clamp",
    "clamp_values",
    "linear_combination",
]

CLAMP_MODES = ("auto", "modulus", "componentwise")


def as_points(x, dim=None):
    """Coerce ``x`` to an ``(n, dim)`` float array of states.

    A scalar is one 1-d state; a 1-d array is a batch of 1-d states unless
    ``dim`` says it is a single ``dim``-dimensional state.
    """
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        return a.reshape(1, 1)
    if a.ndim == 1:
        if dim is not None and dim > 1 and a.size == dim:
            return a.reshape(1, dim)
        return a.reshape(-1, 1)
    if a.ndim != 2:
        raise DomainError(f"states must be scalars, vectors or (n, dim) arrays, got ndim={a.ndim}")
    return a


class Observable:
    """Base class of the observable algebra.

    Subclasses implement :meth:`_eval` on an ``(n, dim)`` array and return
    an array of shape ``(n,)`` (real or complex dtype).
    """

    # keep numpy scalars from swallowing observables in ``c * f``
    __array_ufunc__ = None

    def __call__(self, x):
        pts = as_points(x)
        out = np.asarray(self._eval(pts))
        if out.shape == ():
            out = np.full(pts.shape[0], out[()])
        if np.ndim(x) == 0:
            return out[0]
        return out

    def _eval(self, pts):
        raise NotImplementedError

    def __add__(self, other):
        return Sum((self, _wrap(other)))

    def __radd__(self, other):
        return Sum((_wrap(other), self))

    def __sub__(self, other):
        return Sum((self, Scaled(-1.0, _wrap(other))))

    def __rsub__(self, other):
        return Sum((_wrap(other), Scaled(-1.0, self)))

    def __neg__(self):
        return Scaled(-1.0, self)

    def __mul__(self, other):
        if isinstance(other, Observable):
            return Product(self, other)
        return Scaled(other, self)

    def __rmul__(self, other):
        return Scaled(other, self)

    def __truediv__(self, c):
        return Scaled(1.0 / c, self)


def _wrap(v):
    return v if isinstance(v, Observable) else Constant(v)


def _column(pts, index):
    if index >= pts.shape[1]:
        raise DomainError(f"coordinate {index} requested from {pts.shape[1]}-dimensional states")
    return pts[:, index]


@dataclass(frozen=True)
class Constant(Observable):
    value: complex = 1.0

    def _eval(self, pts):
        return np.full(pts.shape[0], self.value)


@dataclass(frozen=True)
class Coordinate(Observable):
    index: int = 0

    def _eval(self, pts):
        return _column(pts, self.index).copy()


@dataclass(frozen=True)
class FourierMode(Observable):
    """``x -> exp(2 pi i n x)`` on the circle coordinate ``index``."""

    n: int
    index: int = 0

    def _eval(self, pts):
        return np.exp(2j * np.pi * self.n * _column(pts, self.index))


@dataclass(frozen=True)
class Monomial(Observable):
    """``x -> prod_j x_j ** powers[j]``."""

    powers: Tuple[int, ...]

    @classmethod
    def of(cls, n):
        return cls((int(n),))

    @property
    def degree(self):
        return sum(self.powers)

    def _eval(self, pts):
        out = np.ones(pts.shape[0])
        for j, p in enumerate(self.powers):
            if p:
                out = out * _column(pts, j) ** p
        return out


def _state_index(pts, m):
    labels = pts[:, 0]
    idx = np.rint(labels).astype(np.int64)
    if pts.shape[1] != 1 or np.any(idx != labels) or np.any((idx < 1) | (idx > m)):
        raise DomainError(f"finite-state observables take integer labels in 1..{m}")
    return idx - 1


@dataclass(frozen=True)
class StateVector(Observable):
    """Function on the finite states ``1..m`` given by its value table."""

    values: Tuple[complex, ...]

    def _eval(self, pts):
        table = np.asarray(self.values)
        return table[_state_index(pts, table.size)]


@dataclass(frozen=True)
class Indicator(Observable):
    """Indicator of the single state ``state`` among ``1..n_states``."""

    state: int
    n_states: int

    def _eval(self, pts):
        return (_state_index(pts, self.n_states) == self.state - 1).astype(float)


@dataclass(frozen=True, eq=False)
class FunctionObservable(Observable):
    """Wraps a vectorized callable ``f(points) -> values``."""

    func: object
    name: str = "function"

    def _eval(self, pts):
        return self.func(pts)


@dataclass(frozen=True)
class Sum(Observable):
    terms: Tuple[Observable, ...]

    def _eval(self, pts):
        out = self.terms[0]._eval(pts)
        for t in self.terms[1:]:
            out = out + t._eval(pts)
        return out


@dataclass(frozen=True)
class Scaled(Observable):
    coeff: complex
    inner: Observable

    def _eval(self, pts):
        return self.coeff * self.inner._eval(pts)


@dataclass(frozen=True)
class Product(Observable):
    left: Observable
    right: Observable

    def _eval(self, pts):
        return self.left._eval(pts) * self.right._eval(pts)


@dataclass(frozen=True)
class Composed(Observable):
    """``x -> inner(system(x))`` for a deterministic map ``system``."""

    inner: Observable
    system: object

    def _eval(self, pts):
        return self.inner._eval(self.system(pts))


@dataclass(frozen=True)
class MarkovAction(Observable):
    """``i -> sum_j p_ij f(j)``: the stochastic Koopman image of ``inner``."""

    inner: Observable
    chain: object

    def _eval(self, pts):
        P = self.chain.transition_matrix
        m = P.shape[0]
        idx = _state_index(pts, m)
        states = np.arange(1, m + 1, dtype=float).reshape(m, 1)
        return (P @ self.inner._eval(states))[idx]


@dataclass(frozen=True)
class ClampParams:
    """Clamp band ``[1/k, m]`` applied to the modulus of an observable.

    The band may be degenerate (``1/k == m``, e.g. ``k = m = 1``) but not
    empty.
    """

    m: float
    k: float

    def __post_init__(self):
        if not (np.isfinite(self.m) and np.isfinite(self.k)):
            raise InvariantError("clamp parameters must be finite")
        if self.m <= 0:
            raise InvariantError("clamp bound m must be positive")
        if self.k < 1:
            raise InvariantError("clamp parameter k must be at least 1")
        if 1.0 / self.k > self.m:
            raise InvariantError("clamp band [1/k, m] is empty")

    @property
    def lower(self):
        return 1.0 / self.k


def _real_clamp(v, m, lo):
    # The six cases, by sign:
    #   v >= m -> m;  lo < v < m -> v;  0 <= v <= lo -> lo
    #   -lo <= v < 0 -> -lo;  -m < v < -lo -> v;  v <= -m -> -m
    # i.e. nonnegative values are clipped to [lo, m] and negative values to
    # [-m, -lo].  NaN stays NaN.
    v = np.asarray(v, dtype=float)
    return np.where(v >= 0, np.clip(v, lo, m), np.clip(v, -m, -lo))


_SHRINK = 1.0 - 2.0 ** -52
_GROW = 1.0 + 2.0 ** -52


def _in_band(z, m, lo):
    # numpy's vectorized complex abs and the correctly rounded hypot can
    # differ by an ulp; a value counts as inside only if both agree
    r1 = np.abs(z)
    r2 = np.hypot(z.real, z.imag)
    return (r1 >= lo) & (r1 <= m) & (r2 >= lo) & (r2 <= m)


def _grid_search(z, m, lo, width=2):
    # vectorized first pass of _ulp_search; entries without an in-band
    # neighbour are returned unchanged
    delta = np.spacing(np.maximum(np.abs(z.real), np.abs(z.imag)))
    steps = np.arange(-width, width + 1)
    cand = ((z.real[:, None, None] + steps[None, :, None] * delta[:, None, None])
            + 1j * (z.imag[:, None, None] + steps[None, None, :] * delta[:, None, None]))
    cand = cand.reshape(z.size, -1)
    ok = _in_band(cand, m, lo)
    dist = np.where(ok, np.abs(cand - z[:, None]), np.inf)
    best = np.argmin(dist, axis=1)
    rows = np.arange(z.size)
    return np.where(ok[rows, best], cand[rows, best], z)


def _phase_sweep(z, m, lo, span, n_angles=257):
    # vectorized: points on the target circle within +-span radians of z,
    # each with a 3x3 ulp jitter
    r = np.clip(np.hypot(z.real, z.imag), lo, m)
    theta = np.angle(z)[:, None] + np.linspace(-span, span, n_angles)[None, :]
    base = (r[:, None] * np.cos(theta) + 1j * (r[:, None] * np.sin(theta)))
    jitter = np.arange(-1, 2)[None, None, :] * np.spacing(r)[:, None, None]
    cand = (base[:, :, None, None] + jitter[:, :, :, None] + 1j * jitter[:, :, None, :])
    cand = cand.reshape(z.size, -1)
    ok = _in_band(cand, m, lo)
    dist = np.where(ok, np.abs(cand - z[:, None]), np.inf)
    best = np.argmin(dist, axis=1)
    rows = np.arange(z.size)
    return np.where(ok[rows, best], cand[rows, best], z)


def _ulp_search(z, m, lo):
    # a narrow (or degenerate) band: search small grids around z whose step
    # is one ulp of the larger component, so each step moves |z| by at most
    # about one ulp of the modulus
    delta = np.spacing(max(abs(z.real), abs(z.imag)))
    for width in (24,):
        steps = np.arange(-width, width + 1) * delta
        cand = ((z.real + steps)[:, None] + 1j * (z.imag + steps)[None, :]).ravel()
        ok = _in_band(cand, m, lo)
        if ok.any():
            break
    span = 1e-12
    while not ok.any() and span <= 1e-8:
        # sweep the phase along the target circle, widening the arc as needed
        r = min(max(abs(z), lo), m)
        theta = np.angle(z) + np.linspace(-span, span, 4001)
        base = r * np.cos(theta) + 1j * (r * np.sin(theta))
        jitter = np.arange(-2, 3) * np.spacing(r)
        cand = (base[:, None, None] + jitter[None, :, None]
                + 1j * jitter[None, None, :]).ravel()
        ok = _in_band(cand, m, lo)
        span *= 10
    if not ok.any():
        return z
    cand = cand[ok]
    return cand[np.argmin(np.abs(cand - z))]


def _modulus_clamp(v, m, lo):
    v = np.asarray(v, dtype=complex)
    r = np.abs(v)
    out = v.copy()
    zero = r == 0
    outside = ~zero & ~_in_band(v, m, lo)
    out[zero] = lo
    if np.any(outside):
        r_out = np.hypot(v[outside].real, v[outside].imag)
        target = np.clip(r_out, lo, m)
        # rescale by a power of two first so subnormal or huge moduli cannot overflow
        _, e = np.frexp(r_out)
        vs = np.ldexp(v[outside].real, -e) + 1j * np.ldexp(v[outside].imag, -e)
        g = vs * (target / np.hypot(vs.real, vs.imag))
        # rescaling can land an ulp outside the band; nudge it back in
        for _ in range(3):
            if _in_band(g, m, lo).all():
                break
            rg = np.maximum(np.abs(g), np.hypot(g.real, g.imag))
            hi_bad = rg > m
            lo_bad = ~hi_bad & (np.minimum(np.abs(g), np.hypot(g.real, g.imag)) < lo)
            g = np.where(hi_bad, g * _SHRINK, np.where(lo_bad, g * _GROW, g))
        bad = ~_in_band(g, m, lo)
        for width in (2, 12):
            if not bad.any():
                break
            g[bad] = _grid_search(g[bad], m, lo, width)
            bad = ~_in_band(g, m, lo)
        for span in (1e-12, 1e-10, 1e-8):
            if not bad.any():
                break
            g[bad] = _phase_sweep(g[bad], m, lo, span)
            bad = ~_in_band(g, m, lo)
        if bad.any():
            g[bad] = [_ulp_search(z, m, lo) for z in g[bad]]
        out[outside] = g
    return out


def clamp_values(v, params, mode="auto"):
    """Clamp an array of observable values into the band of ``params``.

    Parameters
    ----------
    v : array_like
        Values. Real dtype goes through the six-case sign-preserving clamp;
        complex dtype through the phase-preserving modulus clamp, whose
        output satisfies the band under both ``np.abs`` and ``np.hypot``
        (an out-of-band result of the rescale is moved by a few ulps or,
        for a degenerate band, by a tiny phase change).
    params : ClampParams
    mode : {"auto", "modulus", "componentwise"}
        ``componentwise`` clamps the real and imaginary parts separately
        with the real clamp (comparison variant; its modulus can reach
        ``sqrt(2) m``).
    """
    if mode not in CLAMP_MODES:
        raise ValueError(f"unknown clamp mode {mode!r}")
    v = np.asarray(v)
    m, lo = float(params.m), float(params.lower)
    if mode == "componentwise":
        return _real_clamp(v.real, m, lo) + 1j * _real_clamp(np.imag(v), m, lo)
    if mode == "auto" and not np.iscomplexobj(v):
        return _real_clamp(v, m, lo)
    return _modulus_clamp(v, m, lo)


@dataclass(frozen=True)
class Clamped(Observable):
    inner: Observable
    params: ClampParams
    mode: str = "auto"

    def _eval(self, pts):
        return clamp_values(self.inner._eval(pts), self.params, self.mode)


@dataclass(frozen=True)
class LinearCombination(Observable):
    coeffs: Tuple[complex, ...]
    elements: Tuple[Observable, ...]

    def _eval(self, pts):
        out = None
        for c, d in zip(self.coeffs, self.elements):
            term = c * d._eval(pts)
            out = term if out is None else out + term
        return out


class Dictionary:
    """Ordered finite family of observables spanning a Galerkin subspace.

    By convention the first element is the constant ``1``.
    """

    def __init__(self, elements, label="custom"):
        elements = tuple(elements)
        if not elements:
            raise InvariantError("a dictionary must be nonempty")
        self.elements = elements
        self.label = label

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, i):
        return self.elements[i]

    def __repr__(self):
        return f"Dictionary({self.label!r}, size={len(self)})"

    @classmethod
    def fourier(cls, order):
        """``1, e^{2 pi i x}, e^{-2 pi i x}, ..., e^{-2 pi i order x}``."""
        modes = [FourierMode(0)]
        for n in range(1, order + 1):
            modes += [FourierMode(n), FourierMode(-n)]
        return cls(modes, f"fourier-{order}")

    @classmethod
    def monomial(cls, order, dim=1):
        """All monomials of total degree at most ``order``, by degree."""
        powers = [p for p in _iproduct(range(order + 1), repeat=dim) if sum(p) <= order]
        powers.sort(key=lambda p: (sum(p), tuple(-q for q in p)))
        return cls([Monomial(tuple(p)) for p in powers], f"monomial-{order}")

    @classmethod
    def indicator(cls, m):
        """Constant ``1`` followed by the indicators of states ``2..m``."""
        elems = [Constant(1.0)] + [Indicator(j, m) for j in range(2, m + 1)]
        return cls(elems, f"indicator-{m}")

    def evaluate(self, x):
        """Values of every element on the states ``x`` as an ``(N, n)`` array."""
        pts = as_points(x)
        rows = [np.broadcast_to(np.asarray(d._eval(pts)), (pts.shape[0],)) for d in self.elements]
        return np.array(rows, dtype=complex)


def koopman_apply(system, f):
    """Koopman image ``K f`` of ``f`` under ``system``.

    For a deterministic map this is the composition ``x -> f(T x)``; for a
    Markov chain it is the conditional expectation ``i -> sum_j p_ij f(j)``.
    """
    return system.koopman(f)


def product(f, g):
    """Pointwise product ``x -> f(x) g(x)``."""
    return Product(f, g)


def clamp(f, params, mode="auto"):
    """Observable whose values are those of ``f`` clamped into ``params``'s band."""
    return Clamped(f, params, mode)


def linear_combination(coeffs, dictionary):
    """``x -> sum_i coeffs[i] * dictionary[i](x)``."""
    coeffs = tuple(complex(c) for c in np.ravel(coeffs))
    if len(coeffs) != len(dictionary):
        raise ValueError(f"{len(coeffs)} coefficients for a dictionary of size {len(dictionary)}")
    return LinearCombination(coeffs, tuple(dictionary))
