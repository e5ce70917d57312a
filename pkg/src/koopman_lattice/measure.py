"""Reference probability measures and reproducible L2(mu) quadrature.

Every integral in the package is realized as a weighted sum over a
:class:`SampleSet`.  Three realizations exist:

* ``exact-discrete`` -- one point per state of a finite measure, exact.
* ``grid-1d`` -- equispaced deterministic grid for 1-d continuous measures
  (left endpoints on the circle, midpoints on a box, probability midpoints
  for a Gaussian).
* ``monte-carlo`` -- draws from a counter-based (Philox) generator.

Each quadrature value comes with an error estimate: the refinement
difference against the every-other-point sub-rule for grids, the weighted
sample standard error for Monte Carlo, and zero for exact sums.
"""

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import ndtri

from .errors import EvaluationError, InvariantError

__all__ = [
    "MEASURE_KINDS",
    "SAMPLE_METHODS",
    "ProbabilityMeasure",
    "SampleSet",
    "sample",
    "integrate",
    "inner_product",
    "l2_norm",
    "l2_norm_with_error",
    "restricted_norm",
    "everywhere",
    "nowhere",
    "write_samples_csv",
]

MEASURE_KINDS = ("uniform-circle", "uniform-box", "gaussian", "finite-discrete")
SAMPLE_METHODS = ("monte-carlo", "grid-1d", "exact-discrete")

_MASS_TOL = 1e-12


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProbabilityMeasure:
    """A reference probability measure ``mu``.

    Use the class constructors (:meth:`uniform_circle`, :meth:`uniform_box`,
    :meth:`gaussian`, :meth:`finite_discrete`) rather than the raw
    initializer.
    """

    kind: str
    dim: int = 1
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    mean: Optional[np.ndarray] = None
    variance: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise InvariantError(f"unknown measure kind {self.kind!r}")
        if self.kind == "uniform-box":
            if self.lower.shape != (self.dim,) or self.upper.shape != (self.dim,):
                raise InvariantError("box bounds must have one entry per dimension")
            if not np.all(self.lower < self.upper):
                raise InvariantError("box bounds must satisfy lower < upper")
        elif self.kind == "gaussian":
            if self.mean.shape != (self.dim,) or self.variance.shape != (self.dim,):
                raise InvariantError("gaussian mean/variance must have one entry per dimension")
            if not np.all(self.variance > 0):
                raise InvariantError("gaussian covariance entries must be strictly positive")
        elif self.kind == "finite-discrete":
            w = self.weights
            if w.ndim != 1 or w.size < 1:
                raise InvariantError("finite-discrete weights must be a nonempty vector")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise InvariantError("finite-discrete weights must be finite and nonnegative")
            if abs(w.sum() - 1.0) > _MASS_TOL:
                raise InvariantError(f"finite-discrete weights sum to {w.sum()!r}, not 1")

    @classmethod
    def uniform_circle(cls):
        """Normalized Lebesgue measure on the circle ``[0, 1)``."""
        return cls("uniform-circle", 1)

    @classmethod
    def uniform_box(cls, lower, upper):
        lower = _frozen(np.atleast_1d(lower))
        upper = _frozen(np.atleast_1d(upper))
        return cls("uniform-box", lower.size, lower=lower, upper=upper)

    @classmethod
    def gaussian(cls, mean=0.0, variance=1.0):
        """Gaussian measure with diagonal covariance ``variance``."""
        mean = _frozen(np.atleast_1d(mean))
        variance = _frozen(np.atleast_1d(variance))
        if variance.size == 1 and mean.size > 1:
            variance = _frozen(np.full(mean.size, variance[0]))
        return cls("gaussian", mean.size, mean=mean, variance=variance)

    @classmethod
    def finite_discrete(cls, weights):
        """Measure on the states ``1..m`` with the given probabilities."""
        weights = _frozen(weights)
        return cls("finite-discrete", 1, weights=weights)

    @property
    def n_states(self):
        return None if self.weights is None else self.weights.size

    def describe(self):
        """Plain-data description used in reports."""
        out = {"kind": self.kind, "dim": self.dim}
        for name in ("lower", "upper", "mean", "variance", "weights"):
            value = getattr(self, name)
            if value is not None:
                out[name] = [float(v) for v in value]
        return out


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Weighted point set realizing integrals against a measure.

    ``points`` has shape ``(n, dim)``; ``weights`` has shape ``(n,)`` and
    sums to one.
    """

    points: np.ndarray
    weights: np.ndarray
    seed: int
    method: str
    measure: ProbabilityMeasure = field(repr=False)

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[0] != self.weights.shape[0]:
            raise InvariantError("points must be (n, dim) with one weight per point")
        if np.any(self.weights < 0):
            raise InvariantError("sample weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > _MASS_TOL:
            raise InvariantError("sample weights must sum to 1")
        if (self.method == "exact-discrete") != (self.measure.kind == "finite-discrete"):
            raise InvariantError("exact-discrete is used exactly for finite-discrete measures")

    def __len__(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


def sample(measure, n=1, seed=0, method=None):
    """Build a reproducible :class:`SampleSet` for ``measure``.

    Parameters
    ----------
    measure : ProbabilityMeasure
        Reference measure.
    n : int
        Number of points. Ignored for ``exact-discrete``.
    seed : int
        Seed of the Philox generator (only used by ``monte-carlo``).
    method : str, optional
        One of :data:`SAMPLE_METHODS`. Defaults to ``exact-discrete`` for
        finite measures and ``monte-carlo`` otherwise.

    Returns
    -------
    SampleSet
        Identical arguments give bit-identical sample sets.
    """
    if method is None:
        method = "exact-discrete" if measure.kind == "finite-discrete" else "monte-carlo"
    if method not in SAMPLE_METHODS:
        raise ValueError(f"unknown sampling method {method!r}")
    if int(n) != n or n < 1:
        raise ValueError("sample size n must be a positive integer")
    n = int(n)
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be nonnegative")

    if measure.kind == "finite-discrete":
        if method != "exact-discrete":
            raise ValueError("finite-discrete measures require the exact-discrete method")
        m = measure.n_states
        points = np.arange(1, m + 1, dtype=float).reshape(m, 1)
        weights = np.array(measure.weights, dtype=float)
    elif method == "exact-discrete":
        raise ValueError(f"exact-discrete is not available for {measure.kind} measures")
    elif method == "grid-1d":
        if measure.dim != 1:
            raise ValueError("grid-1d requires a 1-dimensional continuous measure")
        points = _grid_1d(measure, n)
        weights = np.full(n, 1.0 / n)
    else:
        rng = np.random.Generator(np.random.Philox(seed))
        points = _monte_carlo(measure, n, rng)
        weights = np.full(n, 1.0 / n)

    return SampleSet(_frozen(points), _frozen(weights), seed, method, measure)


def _grid_1d(measure, n):
    i = np.arange(n, dtype=float)
    if measure.kind == "uniform-circle":
        x = i / n
    elif measure.kind == "uniform-box":
        lo, hi = measure.lower[0], measure.upper[0]
        x = lo + (hi - lo) * (i + 0.5) / n
    else:
        x = measure.mean[0] + np.sqrt(measure.variance[0]) * ndtri((i + 0.5) / n)
    return x.reshape(n, 1)


def _monte_carlo(measure, n, rng):
    d = measure.dim
    if measure.kind == "uniform-circle":
        return rng.random((n, 1))
    if measure.kind == "uniform-box":
        return measure.lower + (measure.upper - measure.lower) * rng.random((n, d))
    return measure.mean + np.sqrt(measure.variance) * rng.standard_normal((n, d))


def _evaluate(f, s):
    try:
        values = np.asarray(f(s.points))
    except EvaluationError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with the point attached
        point = _first_bad_point(f, s.points)
        raise EvaluationError(f"evaluation failed: {exc}", point) from exc
    if values.shape == ():
        values = np.full(len(s), values[()])
    if values.shape != (len(s),):
        raise EvaluationError(f"observable returned shape {values.shape}, expected ({len(s)},)")
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise EvaluationError("observable is not finite at a sample point", s.points[idx].copy())
    return values


def _first_bad_point(f, points):
    for x in points:
        try:
            f(x.reshape(1, -1))
        except Exception:  # noqa: BLE001
            return x.copy()
    return None


def integrate(values, s):
    """Weighted sum of ``values`` over ``s`` with an error estimate.

    Returns
    -------
    value : float or complex
        ``sum_i w_i * values_i`` (pairwise summation).
    error : float
        Quadrature error estimate (see module docstring).
    """
    values = np.asarray(values)
    w = s.weights
    if np.iscomplexobj(values):
        total = complex(np.sum(w * values.real), np.sum(w * values.imag))
    else:
        total = float(np.sum(w * values))
    return total, _quadrature_error(values, total, s)


def _quadrature_error(values, total, s):
    if s.method == "exact-discrete":
        return 0.0
    w = s.weights
    if s.method == "grid-1d":
        if len(s) < 2:
            return float(abs(total))
        coarse_w = w[::2]
        h = values[::2]
        if np.iscomplexobj(h):
            coarse = complex(np.sum(coarse_w * h.real), np.sum(coarse_w * h.imag))
        else:
            coarse = float(np.sum(coarse_w * h))
        return float(abs(total - coarse / coarse_w.sum()))
    dev = np.abs(values - total) ** 2
    variance = float(np.sum(w * dev))
    return float(np.sqrt(variance * np.sum(w * w)))


def inner_product(f, g, s):
    """``<f, g> = sum_i w_i f(x_i) conj(g(x_i))``.

    The real and imaginary parts are accumulated separately so that
    ``inner_product(f, g, s) == conj(inner_product(g, f, s))`` holds
    bit-for-bit.
    """
    return _inner_values(_evaluate(f, s), _evaluate(g, s), s.weights)


def _inner_values(fv, gv, w):
    fr, fi = fv.real, np.imag(fv)
    gr, gi = gv.real, np.imag(gv)
    re = np.sum(w * (fr * gr + fi * gi))
    im = np.sum(w * (fi * gr - fr * gi))
    return complex(re, im)


def l2_norm_with_error(f, s, restriction=None):
    """L2(mu) norm of ``f`` on ``s`` and its quadrature error estimate."""
    values = _evaluate(f, s)
    sq = np.abs(values) ** 2
    if restriction is not None:
        sq = np.where(_mask(restriction, s), sq, 0.0)
    integral, err = integrate(sq, s)
    integral = max(integral, 0.0)
    return float(np.sqrt(integral)), _sqrt_error(integral, err)


def _sqrt_error(integral, err):
    """Propagate an error ``err`` on ``I`` to ``sqrt(I)``."""
    if err == 0.0:
        return 0.0
    via_sqrt = float(np.sqrt(err))
    if integral <= 0.0:
        return via_sqrt
    return min(err / (2.0 * np.sqrt(integral)), via_sqrt)


def l2_norm(f, s):
    """``||f||_2`` on the sample set ``s``."""
    return l2_norm_with_error(f, s)[0]


def restricted_norm(f, s, restriction):
    """L2 norm of ``f`` restricted to the subset marked by ``restriction``.

    ``restriction`` is a vectorized predicate taking an ``(n, dim)`` array
    of states and returning ``n`` booleans.
    """
    return l2_norm_with_error(f, s, restriction)[0]


def _mask(restriction, s):
    mask = np.asarray(restriction(s.points), dtype=bool)
    if mask.shape == ():
        mask = np.full(len(s), bool(mask))
    if mask.shape != (len(s),):
        raise EvaluationError("restriction predicate must return one boolean per point")
    return mask


def everywhere(points):
    """Restriction predicate for the whole state space."""
    return np.ones(np.shape(points)[0], dtype=bool)


def nowhere(points):
    """Restriction predicate for the empty set."""
    return np.zeros(np.shape(points)[0], dtype=bool)


def write_samples_csv(s, path):
    """Dump ``s`` as CSV with columns ``index, x0, ..., weight``."""
    header = ["index"] + [f"x{j}" for j in range(s.dim)] + ["weight"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i, (x, w) in enumerate(zip(s.points, s.weights)):
            writer.writerow([i] + [format(v, ".17g") for v in x] + [format(w, ".17g")])
