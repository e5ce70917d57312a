"""Galerkin (EDMD) approximation of the Koopman operator on a dictionary.

With dictionary ``d_1..d_N`` and quadrature weights ``w``::

    G[i, j] = <d_j, d_i> = sum_p w_p d_j(x_p) conj(d_i(x_p))
    A[i, j] = <K d_j, d_i>

and the Koopman matrix solves ``G Kmat = A`` through a truncated
eigen-pseudoinverse of ``G``.  Right eigenvectors ``v`` of ``Kmat`` are
coefficient vectors of approximate eigenfunctions ``sum_j v_j d_j``.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import NumericalError
from .lattice import weyl_residual
from .measure import SampleSet, l2_norm
from .observables import koopman_apply, linear_combination

__all__ = [
    "DEFAULT_REGULARIZATION",
    "MAX_DENSE_SIZE",
    "GramPair",
    "KoopmanMatrix",
    "EigenDecomposition",
    "assemble",
    "solve_koopman",
    "eigendecompose",
    "sort_order",
    "eigenvalue_errors",
    "edmd",
]

DEFAULT_REGULARIZATION = 1e-10
MAX_DENSE_SIZE = 512
_PSD_TOL = 1e-10


@dataclass(frozen=True)
class GramPair:
    G: np.ndarray
    A: np.ndarray
    condition: float


@dataclass(frozen=True)
class KoopmanMatrix:
    matrix: np.ndarray
    threshold: float
    rank: int


def _pair_sums(rows_left, rows_right, w):
    # out[i, j] = sum_p w_p rows_right[j, p] conj(rows_left[i, p]), pairwise along p
    n_left = rows_left.shape[0]
    out = np.empty((n_left, rows_right.shape[0]), dtype=complex)
    for i in range(n_left):
        terms = rows_right * (np.conj(rows_left[i]) * w)
        out[i] = np.sum(terms.real, axis=1) + 1j * np.sum(terms.imag, axis=1)
    return out


def assemble(dictionary, system, samples):
    """Gram and action matrices of ``dictionary`` under ``system``.

    Returns
    -------
    GramPair
        ``G`` is symmetrized as ``(G + G^H) / 2``; ``condition`` is the ratio
        of its extreme eigenvalues (``inf`` when singular).
    """
    pts = samples.points
    psi = np.array([np.broadcast_to(d(pts), (len(samples),)) for d in dictionary], dtype=complex)
    kpsi = np.array([np.broadcast_to(koopman_apply(system, d)(pts), (len(samples),))
                     for d in dictionary], dtype=complex)
    w = np.ascontiguousarray(samples.weights)
    G = _pair_sums(psi, psi, w)
    A = _pair_sums(psi, kpsi, w)
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(A))):
        raise NumericalError("non-finite entries in the Gram or action matrix")
    G = 0.5 * (G + G.conj().T)
    ev = np.linalg.eigvalsh(G)
    if ev[0] < -_PSD_TOL * max(1.0, ev[-1]):
        raise NumericalError(f"Gram matrix is not positive semidefinite (min eigenvalue {ev[0]:.3e})")
    cond = float(ev[-1] / ev[0]) if ev[0] > 0 else float("inf")
    return GramPair(G, A, cond)


def solve_koopman(gp, reg=DEFAULT_REGULARIZATION):
    """Least-squares Koopman matrix ``pinv(G) @ A``.

    Eigenvalues of ``G`` at or below ``reg * max eigenvalue`` are truncated.
    """
    if reg < 0:
        raise ValueError("regularization must be nonnegative")
    G = np.asarray(gp.G, dtype=complex)
    A = np.asarray(gp.A, dtype=complex)
    evals, V = np.linalg.eigh(G)
    top = evals[-1]
    if not top > np.finfo(float).tiny:
        raise NumericalError("Gram matrix is numerically zero")
    threshold = reg * top
    keep = evals > threshold
    Vk = V[:, keep]
    ginv = (Vk / evals[keep]) @ Vk.conj().T
    K = ginv @ A
    if not np.all(np.isfinite(K)):
        raise NumericalError("non-finite Koopman matrix")
    return KoopmanMatrix(K, float(threshold), int(keep.sum()))


def sort_order(eigenvalues):
    """Indices sorting by modulus (descending), then argument in ``[-pi, pi)``."""
    lam = np.asarray(eigenvalues, dtype=complex)
    mod = np.round(np.abs(lam), 10)
    arg = np.angle(lam)
    arg = np.where(arg >= np.pi, -np.pi, arg)
    arg = np.round(arg, 12)
    return np.lexsort((arg, -mod))


@dataclass
class EigenDecomposition:
    """Eigenpairs of a Koopman matrix.

    ``coefficients[:, i]`` is the dictionary coefficient vector of the
    ``i``-th eigenfunction; when a dictionary and samples were supplied it is
    scaled to unit L2 norm as an observable.
    """

    eigenvalues: np.ndarray
    coefficients: np.ndarray
    matrix_residuals: np.ndarray
    l2_norms: Optional[np.ndarray] = None
    weyl_residuals: Optional[np.ndarray] = None
    weyl_errors: Optional[np.ndarray] = None
    eigenvalue_errors: Optional[np.ndarray] = None
    dictionary: object = None

    def __len__(self):
        return self.eigenvalues.size

    def eigenfunction(self, i):
        if self.dictionary is None:
            raise ValueError("eigenfunctions need the dictionary the matrix was built on")
        return linear_combination(self.coefficients[:, i], self.dictionary)

    def eigenfunctions(self):
        return [self.eigenfunction(i) for i in range(len(self))]

    def reconstruct(self):
        """``V diag(lambda) V^{-1}``; equals the matrix when eigenvalues are simple."""
        V = self.coefficients
        return V @ np.diag(self.eigenvalues) @ np.linalg.inv(V)


def eigendecompose(kmat, dictionary=None, samples=None, system=None):
    """Dense nonsymmetric eigendecomposition (LAPACK Hessenberg + shifted QR).

    Parameters
    ----------
    kmat : KoopmanMatrix or array_like
    dictionary, samples : optional
        When both are given every eigenvector is lifted to an observable and
        normalized to unit L2 norm on ``samples``.
    system : optional
        When given as well, Weyl residuals of the lifted pairs are computed.
    """
    K = np.asarray(getattr(kmat, "matrix", kmat), dtype=complex)
    n = K.shape[0]
    if K.ndim != 2 or K.shape[1] != n or n < 1:
        raise ValueError("Koopman matrix must be square and nonempty")
    if n > MAX_DENSE_SIZE:
        raise ValueError(f"dense eigensolver is limited to N <= {MAX_DENSE_SIZE}")
    try:
        lam, V = np.linalg.eig(K)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"QR iteration did not converge on a {n}x{n} matrix: {exc}") from exc
    order = sort_order(lam)
    lam, V = lam[order], V[:, order]
    V = V / np.linalg.norm(V, axis=0)
    res = np.linalg.norm(K @ V - V * lam, axis=0) / np.linalg.norm(V, axis=0)
    out = EigenDecomposition(lam, V, res, dictionary=dictionary)
    if dictionary is None or samples is None:
        return out

    norms = np.empty(n)
    for i in range(n):
        norms[i] = l2_norm(linear_combination(V[:, i], dictionary), samples)
        if norms[i] > 0:
            V[:, i] = V[:, i] / norms[i]
    out.l2_norms = norms
    if system is not None:
        wr = np.full(n, np.nan)
        we = np.full(n, np.nan)
        for i in range(n):
            if norms[i] > 0:
                w = weyl_residual(out.eigenfunction(i), lam[i], system, samples)
                wr[i], we[i] = w.residual, w.error
        out.weyl_residuals, out.weyl_errors = wr, we
    return out


def _eigenvalues(dictionary, system, samples, reg):
    return np.linalg.eigvals(solve_koopman(assemble(dictionary, system, samples), reg).matrix)


def _subset(samples, idx):
    w = samples.weights[idx]
    return SampleSet(samples.points[idx], w / w.sum(), samples.seed, samples.method, samples.measure)


def _match(reference, other):
    cost = np.abs(reference[:, None] - other[None, :])
    rows, cols = linear_sum_assignment(cost)
    out = np.empty_like(reference)
    out[rows] = other[cols]
    return out


def eigenvalue_errors(dictionary, system, samples, eigenvalues, reg=DEFAULT_REGULARIZATION,
                      n_batches=10, condition=None):
    """Error estimate for EDMD eigenvalues.

    * ``monte-carlo``: batch-means standard error over ``n_batches``
      contiguous blocks of the sample (eigenvalues matched by assignment);
    * ``grid-1d``: distance to the eigenvalues of the every-other-point grid;
    * ``exact-discrete``: zero.

    A floating-point floor ``eps * cond(G) * max(1, |lambda|)`` is added in
    quadrature.
    """
    lam = np.asarray(eigenvalues, dtype=complex)
    n = len(samples)
    stat = np.zeros(lam.size)
    if samples.method == "monte-carlo" and n >= 2 * len(dictionary) * 2:
        b = int(min(n_batches, n // (2 * len(dictionary))))
        edges = np.linspace(0, n, b + 1).astype(int)
        batches = np.array([
            _match(lam, _eigenvalues(dictionary, system, _subset(samples, slice(lo, hi)), reg))
            for lo, hi in zip(edges[:-1], edges[1:])
        ])
        dev = np.abs(batches - batches.mean(axis=0)) ** 2
        stat = np.sqrt(dev.sum(axis=0) / (b - 1) / b)
    elif samples.method == "grid-1d" and n >= 2 * len(dictionary):
        coarse = _eigenvalues(dictionary, system, _subset(samples, slice(None, None, 2)), reg)
        stat = np.abs(_match(lam, coarse) - lam)
    if condition is None:
        condition = assemble(dictionary, system, samples).condition
    floor = np.finfo(float).eps * min(condition, 1.0 / np.finfo(float).eps) * np.maximum(1.0, np.abs(lam))
    return np.sqrt(stat ** 2 + floor ** 2)


def edmd(dictionary, system, samples, reg=DEFAULT_REGULARIZATION, with_errors=True):
    """Assemble, solve and decompose in one call.

    Returns
    -------
    EigenDecomposition
        With lifted eigenfunctions, Weyl residuals and (optionally)
        eigenvalue error estimates.
    gram : GramPair
    kmat : KoopmanMatrix
    """
    gram = assemble(dictionary, system, samples)
    kmat = solve_koopman(gram, reg)
    eig = eigendecompose(kmat, dictionary, samples, system)
    if with_errors:
        eig.eigenvalue_errors = eigenvalue_errors(dictionary, system, samples, eig.eigenvalues,
                                                  reg, condition=gram.condition)
        # coefficient error of the lifted eigenfunction also enters its residual
        eig.weyl_errors = eig.weyl_errors + eig.eigenvalue_errors
    return eig, gram, kmat
