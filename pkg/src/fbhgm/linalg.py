"""LU factorisation with a cheap 1-norm condition estimate."""
import warnings

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.linalg.lapack import dgecon

from .errors import SingularFactor

COND_LIMIT = 1e12


class Factor:
    """LU factors of a small dense matrix; raises if the matrix is near singular.

    The condition number is estimated with LAPACK ``dgecon`` in the 1-norm.
    """

    def __init__(self, a, which="?", cond_limit=COND_LIMIT):
        a = np.asarray(a, dtype=float)
        self.which = which
        anorm = np.abs(a).sum(axis=0).max() if a.size else 0.0
        if not np.isfinite(anorm):
            raise SingularFactor(which, np.inf)
        if anorm == 0.0:
            raise SingularFactor(which, np.inf)
        with warnings.catch_warnings():
            # exact singularity is reported below through the condition estimate
            warnings.simplefilter("ignore", LinAlgWarning)
            self.lu, self.piv = lu_factor(a, check_finite=False)
        rcond, info = dgecon(self.lu, anorm, norm="1")
        self.cond = np.inf if rcond == 0 else 1.0 / rcond
        if info != 0 or not np.isfinite(self.cond) or self.cond > cond_limit:
            raise SingularFactor(which, self.cond)

    def solve(self, b):
        return lu_solve((self.lu, self.piv), b, check_finite=False)
