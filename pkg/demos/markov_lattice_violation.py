"""
A Markov chain whose spectrum is not a lattice
==============================================

For a finite Markov chain the stochastic Koopman operator acts on
functions of the state by multiplication with the transition matrix
``P``.  Its spectrum is therefore the (finite) eigenvalue set of ``P``.

A deterministic Koopman operator has a spectrum closed under products.
This script shows that the stochastic one need not be.
"""

import numpy as np

from koopman_lattice import (
    MarkovChain,
    eigendecompose,
    finite_spectrum_lattice_closure,
    markov_koopman_matrix,
    unit_disk_check,
)

# A two-state chain: state 1 is sticky, state 2 is a fair coin.
chain = MarkovChain([[0.9, 0.1], [0.5, 0.5]])

eig = eigendecompose(markov_koopman_matrix(chain))
print("eigenvalues:", np.round(eig.eigenvalues.real, 12))

###############################################################################
# All eigenvalues lie in the closed unit disk, as they must for a
# stochastic matrix.

inside, offenders = unit_disk_check(eig.eigenvalues)
print("inside the unit disk:", inside)

###############################################################################
# The product 0.4 * 0.4 = 0.16 is not an eigenvalue, and neither is any
# higher power of 0.4.  The power test records the first power that
# leaves the set.

report = finite_spectrum_lattice_closure(eig.eigenvalues)
print("verdict:", report.verdict)
print("unmatched products:", [round(p.real, 12) for p in report.unmatched_products])
for test in report.power_tests:
    print(f"powers of {test.eigenvalue.real:g} leave the spectrum at r = {test.escape_power}")

###############################################################################
# A permutation chain behaves differently: its eigenvalues are roots of
# unity, which form a group under multiplication.

cycle = MarkovChain(np.roll(np.eye(5), 1, axis=1))
roots = eigendecompose(markov_koopman_matrix(cycle)).eigenvalues
print("cyclic chain verdict:", finite_spectrum_lattice_closure(roots).verdict)
