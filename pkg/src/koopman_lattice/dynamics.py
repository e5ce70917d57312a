"""Discrete-time systems: deterministic maps and finite Markov chains.

Deterministic maps act on ``(n, dim)`` arrays of states.  Circle maps live
on ``[0, 1)`` and reduce their output with ``x - floor(x)`` (a result of
exactly ``1.0`` is mapped to ``0.0``).  Every call checks that inputs and
outputs lie in the declared state space.

Two systems carry catalogs of closed-form eigenpairs used as oracles:

* circle rotation ``x -> x + alpha``: ``(e^{2 pi i n alpha}, e^{2 pi i n x})``;
* affine contraction ``x -> a x`` (``b = 0``): ``(prod a_j^p_j, x^p)``.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DomainError, InvariantError, NoCatalogError
from .observables import (
    Composed,
    Constant,
    Dictionary,
    FourierMode,
    MarkovAction,
    Monomial,
    as_points,
)

__all__ = [
    "DeterministicMap",
    "CircleRotation",
    "Doubling",
    "AffineContraction",
    "Logistic",
    "Composition",
    "compose",
    "apply_map",
    "ExactEigenpair",
    "exact_eigenpairs",
    "MarkovChain",
    "markov_koopman_matrix",
    "load_markov_chain",
]

_ROW_TOL = 1e-12
_REGISTRATION_TOL = 1e-10
_REGISTRATION_POINTS = 1000


def reduce_circle(y):
    """Fundamental-domain reduction onto ``[0, 1)``."""
    r = y - np.floor(y)
    return np.where(r >= 1.0, 0.0, r)


class DeterministicMap:
    """Base class for maps ``T: M -> M``.

    Attributes
    ----------
    space : str
        ``"circle"`` (``[0, 1)``), ``"interval"`` (``[0, 1]``) or ``"real"``
        (``R^dim``).
    dim : int
        State dimension.
    """

    space = "circle"
    dim = 1

    def __call__(self, x):
        pts = as_points(x, self.dim)
        self._check(pts, "input")
        out = self._step(pts)
        self._check(out, "output")
        return out

    def _step(self, pts):
        raise NotImplementedError

    def _check(self, pts, where):
        if pts.shape[1] != self.dim:
            raise DomainError(f"{self.kind} acts on {self.dim}-dimensional states, got {pts.shape[1]}")
        if not np.all(np.isfinite(pts)):
            raise DomainError(f"non-finite {where} state for {self.kind}")
        if self.space == "circle":
            bad = (pts < 0.0) | (pts >= 1.0)
        elif self.space == "interval":
            bad = (pts < 0.0) | (pts > 1.0)
        else:
            return
        if np.any(bad):
            i = int(np.argmax(bad.any(axis=1)))
            raise DomainError(f"{where} state {pts[i].tolist()} outside the {self.space} domain of {self.kind}")

    def koopman(self, f):
        if isinstance(f, Constant):
            return f
        return Composed(f, self)

    def describe(self):
        raise NotImplementedError


@dataclass(frozen=True)
class CircleRotation(DeterministicMap):
    alpha: float
    kind = "circle-rotation"

    def _step(self, pts):
        return reduce_circle(pts + self.alpha)

    def describe(self):
        return {"kind": self.kind, "alpha": float(self.alpha)}


@dataclass(frozen=True)
class Doubling(DeterministicMap):
    kind = "doubling"

    def _step(self, pts):
        return reduce_circle(2.0 * pts)

    def describe(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class AffineContraction(DeterministicMap):
    """``x -> a * x + b`` on ``R^d`` with diagonal ``a``.

    With ``contraction=True`` every ``|a_j|`` must lie in ``(0, 1)``.
    """

    a: Tuple[float, ...]
    b: Tuple[float, ...] = None
    contraction: bool = True
    kind = "affine-contraction"
    space = "real"

    def __post_init__(self):
        a = tuple(float(v) for v in np.atleast_1d(self.a))
        b = (0.0,) * len(a) if self.b is None else tuple(float(v) for v in np.atleast_1d(self.b))
        if len(b) != len(a):
            raise InvariantError("affine map needs one offset per dimension")
        if self.contraction and not all(0.0 < abs(v) < 1.0 for v in a):
            raise InvariantError("contraction coefficients must satisfy 0 < |a| < 1")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def dim(self):
        return len(self.a)

    def _step(self, pts):
        return np.asarray(self.a) * pts + np.asarray(self.b)

    def describe(self):
        return {"kind": self.kind, "a": list(self.a), "b": list(self.b)}


@dataclass(frozen=True)
class Logistic(DeterministicMap):
    """``x -> r x (1 - x)`` on ``[0, 1]`` with ``0 <= r <= 4``."""

    r: float
    kind = "logistic"
    space = "interval"

    def __post_init__(self):
        if not 0.0 <= self.r <= 4.0:
            raise InvariantError("logistic parameter must lie in [0, 4]")

    def _step(self, pts):
        return np.clip(self.r * pts * (1.0 - pts), 0.0, 1.0)

    def describe(self):
        return {"kind": self.kind, "r": float(self.r)}


@dataclass(frozen=True)
class Composition(DeterministicMap):
    """Applies ``maps[0]``, then ``maps[1]``, and so on."""

    maps: Tuple[DeterministicMap, ...]
    kind = "composition"

    def __post_init__(self):
        maps = tuple(self.maps)
        if not maps:
            raise InvariantError("composition needs at least one map")
        spaces = {(m.space, m.dim) for m in maps}
        if len(spaces) != 1:
            raise InvariantError("composed maps must share one state space")
        object.__setattr__(self, "maps", maps)

    @property
    def space(self):
        return self.maps[0].space

    @property
    def dim(self):
        return self.maps[0].dim

    def _step(self, pts):
        for m in self.maps:
            pts = m(pts)
        return pts

    def describe(self):
        return {"kind": self.kind, "maps": [m.describe() for m in self.maps]}


def compose(outer, inner):
    """The map ``outer o inner`` (``inner`` is applied first)."""
    return Composition((inner, outer))


def apply_map(T, x):
    """``T x``; scalars in, scalar out."""
    out = T(x)
    if np.ndim(x) == 0:
        return float(out[0, 0])
    if np.ndim(x) == 1 and T.dim == 1:
        return out[:, 0]
    if np.ndim(x) == 1:
        return out[0]
    return out


@dataclass(frozen=True)
class ExactEigenpair:
    eigenvalue: complex
    eigenfunction: object
    label: str
    order: int


def _registration_states(T, seed=0):
    rng = np.random.Generator(np.random.Philox(seed))
    if T.space == "real":
        return rng.standard_normal((_REGISTRATION_POINTS, T.dim))
    return rng.random((_REGISTRATION_POINTS, T.dim))


def _register(T, pairs):
    x = _registration_states(T)
    for p in pairs:
        fx = p.eigenfunction(x)
        gap = np.abs(p.eigenfunction(T(x)) - p.eigenvalue * fx)
        if np.any(gap > _REGISTRATION_TOL * (1.0 + np.abs(fx))):
            raise InvariantError(f"catalog pair {p.label} fails the eigen-identity (max gap {gap.max():.3e})")
    return pairs


def exact_eigenpairs(T, max_order):
    """Closed-form eigenpairs of ``T`` up to ``max_order``.

    Rotation: modes ``|n| <= max_order`` in the order ``0, 1, -1, 2, -2, ...``.
    Contraction with ``b = 0``: monomials of total degree ``<= max_order``.
    Every pair is checked against ``f(Tx) = lambda f(x)`` on 1000 states
    before it is returned.

    Raises
    ------
    NoCatalogError
        If ``T`` has no catalog (doubling, logistic, compositions, or an
        affine map with ``b != 0``).
    """
    if max_order < 0:
        raise ValueError("max_order must be nonnegative")
    if isinstance(T, CircleRotation):
        pairs = []
        for n in [0] + [s * j for j in range(1, max_order + 1) for s in (1, -1)]:
            lam = np.exp(2j * np.pi * n * T.alpha)
            pairs.append(ExactEigenpair(complex(lam), FourierMode(n), f"fourier[{n}]", n))
        return _register(T, pairs)
    if isinstance(T, AffineContraction) and all(v == 0.0 for v in T.b):
        pairs = []
        for mono in Dictionary.monomial(max_order, T.dim):
            lam = float(np.prod([a ** p for a, p in zip(T.a, mono.powers)]))
            label = "monomial[" + ",".join(str(p) for p in mono.powers) + "]"
            pairs.append(ExactEigenpair(complex(lam), mono, label, mono.degree))
        return _register(T, pairs)
    raise NoCatalogError(f"no closed-form eigenpair catalog for {getattr(T, 'kind', type(T).__name__)}")


class MarkovChain:
    """Finite Markov chain on the states ``1..m``.

    ``transition_matrix[i, j]`` is the probability of moving from state
    ``i + 1`` to state ``j + 1``.
    """

    kind = "markov"
    space = "finite"
    dim = 1

    def __init__(self, transition_matrix):
        P = np.array(transition_matrix, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise InvariantError("transition matrix must be square")
        if P.shape[0] < 2:
            raise InvariantError("a Markov chain needs at least 2 states")
        if not np.all(np.isfinite(P)) or np.any(P < 0):
            raise InvariantError("transition probabilities must be finite and nonnegative")
        sums = P.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > _ROW_TOL)
        if bad.size:
            i = int(bad[0])
            raise InvariantError(f"row {i} of the transition matrix sums to {sums[i]!r}, not 1")
        P.setflags(write=False)
        self.transition_matrix = P

    @property
    def n_states(self):
        return self.transition_matrix.shape[0]

    def koopman(self, f):
        return MarkovAction(f, self)

    def describe(self):
        return {"kind": self.kind, "matrix": self.transition_matrix.tolist()}

    def __repr__(self):
        return f"MarkovChain(m={self.n_states})"


def markov_koopman_matrix(chain):
    """Matrix of the stochastic Koopman operator, which is ``P`` itself."""
    if not isinstance(chain, MarkovChain):
        chain = MarkovChain(chain)
    return chain.transition_matrix.astype(complex)


def load_markov_chain(path):
    """Read a transition matrix from whitespace-separated rows."""
    P = np.loadtxt(path, dtype=float, ndmin=2)
    return MarkovChain(P)
