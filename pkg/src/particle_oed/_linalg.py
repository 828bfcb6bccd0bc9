import numpy as np
from scipy import linalg

DEFAULT_COND_CAP = 1e12


def symmetrize(m):
    return 0.5 * (m + m.T)


class SymmetricSolver:
    """Factorize a symmetric matrix once; solve many right-hand sides.

    ``positive=True`` requires positive definiteness (Cholesky), otherwise a
    pivoted LU factorization is used.  Either way a condition number above
    ``cond_cap`` is rejected with ``error_cls`` rather than regularized.
    """

    def __init__(self, m, error_cls, cond_cap=DEFAULT_COND_CAP, positive=True, what="matrix"):
        m = symmetrize(np.asarray(m, dtype=float))
        eig = linalg.eigvalsh(m)
        self.eigenvalues = eig
        smallest = eig[0]
        scale = np.max(np.abs(eig))
        if not np.all(np.isfinite(eig)) or scale == 0.0:
            raise error_cls(f"{what} is zero or non-finite", smallest)
        if positive and smallest <= 0.0:
            raise error_cls(f"{what} is not positive definite (smallest eigenvalue {smallest:.3e})", smallest)
        cond = scale / np.min(np.abs(eig))
        if not cond <= cond_cap:
            raise error_cls(f"{what} condition number {cond:.3e} exceeds cap {cond_cap:.1e} "
                            f"(smallest eigenvalue {smallest:.3e})", smallest)
        self.cond = cond
        self.positive = positive
        self.matrix = m
        if positive:
            self._factor = linalg.cho_factor(m, lower=True)
        else:
            self._factor = linalg.lu_factor(m)

    def solve(self, b):
        if self.positive:
            return linalg.cho_solve(self._factor, b)
        return linalg.lu_solve(self._factor, b)

    def logdet(self):
        if not self.positive:
            raise ValueError("log-determinant only defined here for positive definite input")
        return 2.0 * np.sum(np.log(np.diag(self._factor[0])))
