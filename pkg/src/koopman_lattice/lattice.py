"""Weyl residuals and lattice-closure analysis of Koopman spectra.

Spectrum membership is tested through Weyl residuals: a unit-norm ``psi``
with small ``||K psi - lambda psi||_2`` is evidence that ``lambda`` lies in
the spectrum.  On top of that this module provides

* product checks for pairs of eigenpairs (``(lambda eta, f g)``),
* the clamp-based Weyl sequence ``psi_k`` built from truncated products
  with ``m = k^3``, reported next to the bound ``2 (1 + |lambda|) / k``,
* closure checks of finite spectra (Markov chains), including the power
  test ``lambda^r`` for eigenvalues off the unit circle,
* the unit-disk diagnostic ``max |lambda| <= 1``.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import NumericalError, PreconditionError
from .measure import integrate, l2_norm_with_error, _evaluate, _sqrt_error
from .observables import ClampParams, Scaled, clamp, koopman_apply, product

__all__ = [
    "DEFAULT_MEMBERSHIP_TOL",
    "PRODUCT_NORM_FLOOR",
    "WeylWitness",
    "weyl_residual",
    "default_tolerance",
    "LatticeRecord",
    "PowerTest",
    "LatticeReport",
    "lattice_product_check",
    "catalog_lattice_check",
    "eigenpair_lattice_check",
    "WeylSequenceStep",
    "WeylSequenceTrace",
    "build_weyl_sequence",
    "weyl_sequence_bound",
    "finite_spectrum_lattice_closure",
    "unit_disk_check",
]

DEFAULT_MEMBERSHIP_TOL = 1e-6
PRODUCT_NORM_FLOOR = 1e-12
# evaluation roundoff allowance, in units of eps * (||K psi|| + |lambda|)
_ROUNDOFF_UNITS = 1e3


@dataclass(frozen=True)
class WeylWitness:
    """Unit vector ``psi`` with its residual ``||K psi - lambda psi||_2``."""

    psi: object
    eigenvalue: complex
    residual: float
    error: float
    input_norm: float


def weyl_residual(f, eigenvalue, system, samples):
    """Normalize ``f`` and measure its Weyl residual for ``eigenvalue``.

    Parameters
    ----------
    f : Observable
        Candidate (approximate) eigenfunction; need not be normalized.
    eigenvalue : complex
    system : DeterministicMap or MarkovChain
    samples : SampleSet

    Returns
    -------
    WeylWitness
        ``error`` combines the quadrature error of the residual norm with a
        floating-point evaluation allowance.
    """
    norm, _ = l2_norm_with_error(f, samples)
    if not norm > 0.0:
        raise PreconditionError("Weyl residual of a zero-norm observable is undefined")
    lam = complex(eigenvalue)
    scale = 1.0 / norm
    kv = _evaluate(koopman_apply(system, f), samples) * scale
    v = _evaluate(f, samples) * scale
    r = kv - lam * v
    integral, err = integrate(np.abs(r) ** 2, samples)
    integral = max(integral, 0.0)
    residual = float(np.sqrt(integral))
    kv_norm = float(np.sqrt(max(integrate(np.abs(kv) ** 2, samples)[0], 0.0)))
    roundoff = _ROUNDOFF_UNITS * np.finfo(float).eps * (kv_norm + abs(lam))
    error = _sqrt_error(integral, err) + roundoff
    return WeylWitness(Scaled(scale, f), lam, residual, float(error), norm)


def default_tolerance(witness):
    """Membership tolerance ``max(1e-6, 10 * quadrature error)``."""
    return max(DEFAULT_MEMBERSHIP_TOL, 10.0 * witness.error)


@dataclass(frozen=True)
class LatticeRecord:
    """Outcome of one product check ``lambda * eta``.

    ``residual`` is the Weyl residual of the product function (deterministic
    systems) or the distance from the product to the nearest spectrum
    element (finite spectra).
    """

    lam: complex
    eta: complex
    product: complex
    residual: Optional[float]
    verdict: str
    tolerance: float
    labels: tuple = ()
    note: str = ""


@dataclass(frozen=True)
class PowerTest:
    eigenvalue: complex
    escaped: bool
    escape_power: Optional[int]
    max_power: int


@dataclass
class LatticeReport:
    records: List[LatticeRecord] = field(default_factory=list)
    unmatched_products: List[complex] = field(default_factory=list)
    power_tests: List[PowerTest] = field(default_factory=list)

    @property
    def verdict(self):
        if any(r.verdict == "violation" for r in self.records) or any(p.escaped for p in self.power_tests):
            return "violation"
        if all(r.verdict == "closed" for r in self.records):
            return "closed"
        return "inconclusive"

    @property
    def violations(self):
        return [r for r in self.records if r.verdict == "violation"]


def _credible(f, lam, system, samples, tol, name):
    w = weyl_residual(f, lam, system, samples)
    limit = default_tolerance(w) if tol is None else tol
    if w.residual > limit:
        raise PreconditionError(
            f"{name} is not a credible eigenpair: residual {w.residual:.3e} > tolerance {limit:.3e}"
        )
    return w


def lattice_product_check(pair1, pair2, system, samples, tol=None, labels=()):
    """Check whether ``(lambda eta, f g)`` is again an (approximate) eigenpair.

    Parameters
    ----------
    pair1, pair2 : tuple of (complex, Observable)
        ``(lambda, f)`` and ``(eta, g)``; both must have Weyl residual at most
        the tolerance.
    tol : float, optional
        Membership tolerance. Defaults to :func:`default_tolerance` of each
        witness.

    Returns
    -------
    LatticeRecord
        ``closed`` if the product residual is within tolerance, otherwise
        ``inconclusive``.
    """
    lam, f = pair1
    eta, g = pair2
    _credible(f, lam, system, samples, tol, "first pair")
    _credible(g, eta, system, samples, tol, "second pair")
    prod_val = complex(lam) * complex(eta)
    h = product(f, g)
    norm, _ = l2_norm_with_error(h, samples)
    if not norm > PRODUCT_NORM_FLOOR:
        limit = DEFAULT_MEMBERSHIP_TOL if tol is None else tol
        return LatticeRecord(complex(lam), complex(eta), prod_val, None, "inconclusive", limit,
                             tuple(labels), "product norm below floor")
    w = weyl_residual(h, prod_val, system, samples)
    limit = default_tolerance(w) if tol is None else tol
    verdict = "closed" if w.residual <= limit else "inconclusive"
    return LatticeRecord(complex(lam), complex(eta), prod_val, w.residual, verdict, limit, tuple(labels))


def catalog_lattice_check(system, samples, catalog, max_sum_order=None, tol=None):
    """Product checks over all unordered pairs of a closed-form catalog.

    ``max_sum_order`` keeps only pairs whose orders add up to at most that
    value (e.g. ``n + m <= 6`` for monomials).
    """
    report = LatticeReport()
    for i, p in enumerate(catalog):
        for q in catalog[i:]:
            if max_sum_order is not None and abs(p.order) + abs(q.order) > max_sum_order:
                continue
            report.records.append(lattice_product_check(
                (p.eigenvalue, p.eigenfunction), (q.eigenvalue, q.eigenfunction),
                system, samples, tol, labels=(p.label, q.label)))
    return report


def eigenpair_lattice_check(eigenvalues, eigenfunctions, system, samples, tol=None):
    """Product checks among the credible members of a computed eigen-table.

    Pairs failing the credibility precondition are skipped.
    """
    credible = []
    for i, (lam, f) in enumerate(zip(eigenvalues, eigenfunctions)):
        try:
            _credible(f, lam, system, samples, tol, f"eigenpair {i}")
        except PreconditionError:
            continue
        credible.append((i, complex(lam), f))
    report = LatticeReport()
    for a, (i, lam, f) in enumerate(credible):
        for j, eta, g in credible[a:]:
            report.records.append(lattice_product_check(
                (lam, f), (eta, g), system, samples, tol, labels=(f"eig[{i}]", f"eig[{j}]")))
    return report


def weyl_sequence_bound(lam, k):
    """The bound ``2 (1 + |lambda|) / k`` on the residual of ``psi_k``."""
    return 2.0 * (1.0 + abs(lam)) / k


@dataclass(frozen=True)
class WeylSequenceStep:
    k: int
    m: int
    params: ClampParams
    psi: object
    product_norm: float
    residual: float
    error: float
    bound: float
    bound_satisfied: bool
    norm_floor_ok: bool


@dataclass
class WeylSequenceTrace:
    """Residual trace of the clamp-product sequence ``psi_k``.

    The sequence index ``n_k`` of the underlying Weyl sequences has no
    analog for fixed input functions and is recorded as not applicable.
    """

    lam: complex
    eta: complex
    steps: List[WeylSequenceStep] = field(default_factory=list)
    n_k: str = "not applicable"

    @property
    def target(self):
        return self.lam * self.eta

    @property
    def all_bounds_satisfied(self):
        return all(s.bound_satisfied for s in self.steps)


def build_weyl_sequence(f, g, lam, eta, system, samples, k_max, tol=None, mode="auto",
                        check_credible=True):
    """Clamp-product Weyl sequence for ``lambda * eta``.

    For ``k = 1..k_max`` with ``m = k^3`` the unit-normalized inputs are
    clamped into ``[1/k, m]``, multiplied, normalized, and the residual
    against ``lambda * eta`` is recorded next to ``2 (1 + |lambda|) / k``.
    The bound is reported, never enforced.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    lam, eta = complex(lam), complex(eta)
    if check_credible:
        wf = _credible(f, lam, system, samples, tol, "f")
        wg = _credible(g, eta, system, samples, tol, "g")
        f_unit, g_unit = wf.psi, wg.psi
    else:
        f_unit = Scaled(1.0 / l2_norm_with_error(f, samples)[0], f)
        g_unit = Scaled(1.0 / l2_norm_with_error(g, samples)[0], g)
    trace = WeylSequenceTrace(lam, eta)
    target = lam * eta
    for k in range(1, k_max + 1):
        m = k ** 3
        params = ClampParams(float(m), float(k))
        h = product(clamp(f_unit, params, mode), clamp(g_unit, params, mode))
        norm, _ = l2_norm_with_error(h, samples)
        if not norm > PRODUCT_NORM_FLOOR:
            raise NumericalError(f"clamp-product norm {norm!r} below floor at k={k}")
        w = weyl_residual(h, target, system, samples)
        bound = weyl_sequence_bound(lam, k)
        trace.steps.append(WeylSequenceStep(
            k=k, m=m, params=params, psi=w.psi, product_norm=norm,
            residual=w.residual, error=w.error, bound=bound,
            bound_satisfied=bool(w.residual <= bound),
            norm_floor_ok=bool(norm >= 1.0 / k ** 2 - 1e-12),
        ))
    return trace


def _power_test(lam, eigs, tol):
    mod = abs(lam)
    if mod == 0.0:
        return PowerTest(lam, False, None, 1)
    big = float(np.max(np.abs(eigs)))
    if mod < 1.0:
        r_max = max(1, math.ceil(math.log(tol) / math.log(mod)))
    else:
        r_max = max(1, math.floor(math.log(big + tol) / math.log(mod)) + 1)
    power = lam
    for r in range(1, r_max + 1):
        if np.min(np.abs(eigs - power)) > tol:
            return PowerTest(lam, True, r, r_max)
        power = power * lam
    return PowerTest(lam, False, None, r_max)


def finite_spectrum_lattice_closure(eigs, tol=1e-9):
    """Closure of a finite spectrum under multiplication.

    Every ordered pair product is matched against the multiset (absolute
    distance ``<= tol``; multiplicities ignored).  Each eigenvalue with
    ``||lambda| - 1| > tol`` also gets a power test: its powers must leave
    the set for some ``r`` before ``|lambda|^r`` drops below ``tol``.
    """
    eigs = np.asarray(eigs, dtype=complex).ravel()
    if eigs.size == 0:
        raise ValueError("spectrum must be nonempty")
    report = LatticeReport()
    for lam in eigs:
        for eta in eigs:
            prod = lam * eta
            dist = float(np.min(np.abs(eigs - prod)))
            verdict = "closed" if dist <= tol else "violation"
            report.records.append(LatticeRecord(complex(lam), complex(eta), complex(prod), dist, verdict, tol))
            if verdict == "violation" and not any(abs(prod - u) <= tol for u in report.unmatched_products):
                report.unmatched_products.append(complex(prod))
    for lam in eigs:
        if abs(abs(lam) - 1.0) > tol and not any(abs(p.eigenvalue - lam) <= tol for p in report.power_tests):
            report.power_tests.append(_power_test(complex(lam), eigs, tol))
    return report


def unit_disk_check(eigs, tol=1e-8):
    """``(max |lambda| <= 1 + tol, offenders)``."""
    eigs = np.asarray(eigs, dtype=complex).ravel()
    offenders = [complex(v) for v in eigs if abs(v) > 1.0 + tol]
    return not offenders, offenders
