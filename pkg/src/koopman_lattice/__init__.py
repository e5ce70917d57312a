"""Koopman spectra of maps and Markov chains, and their lattice structure."""

from .dynamics import (
    AffineContraction, CircleRotation, Composition, Doubling, ExactEigenpair,
    Logistic, MarkovChain, apply_map, compose, exact_eigenpairs,
    load_markov_chain, markov_koopman_matrix,
)
from .errors import (
    ConfigError, DomainError, EvaluationError, InvariantError, KoopmanError,
    NoCatalogError, NumericalError, PreconditionError,
)
from .galerkin import (
    EigenDecomposition, GramPair, KoopmanMatrix, assemble, edmd,
    eigendecompose, eigenvalue_errors, solve_koopman,
)
from .lattice import (
    LatticeRecord, LatticeReport, WeylSequenceTrace, WeylWitness,
    build_weyl_sequence, catalog_lattice_check, eigenpair_lattice_check,
    finite_spectrum_lattice_closure, lattice_product_check, unit_disk_check,
    weyl_residual,
)
from .measure import (
    ProbabilityMeasure, SampleSet, inner_product, integrate, l2_norm,
    restricted_norm, sample,
)
from .observables import (
    ClampParams, Constant, Coordinate, Dictionary, FourierMode, Indicator,
    Monomial, Observable, StateVector, clamp, koopman_apply,
    linear_combination, product,
)

from ._version import __version__
