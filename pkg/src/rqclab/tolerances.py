"""Numerical tolerances used throughout the package.

Each entry is deliberately named so tests can reference the same value the
library uses.
"""

#: unitarity / hermiticity checks on user-supplied matrices
ALG_TOL = 1e-10
#: slack on PSD and unit-trace checks for density matrices
PSD_SLACK = 1e-9
#: trace-zero precondition when mapping to Pauli coordinates
TRACELESS_TOL = 1e-9
#: agreement between simulator paths
SIM_TOL = 1e-9
#: error budget of the local-product distance optimiser
OPT_TOL = 1e-5
#: slack when checking net separation / covering
NET_TOL = 1e-3
#: difference vectors shorter than this are treated as zero (subspace rank)
RANK_TOL = 1e-9
#: largest reverse lightcone simulated by default
CONE_LIMIT = 13
#: shots per Pauli observable are ceil(SHOTS_CONSTANT / eps**2)
SHOTS_CONSTANT = 18.0
#: floor applied to the tomography precision of the gate learner
MIN_TOMOGRAPHY_EPS = 1e-12
