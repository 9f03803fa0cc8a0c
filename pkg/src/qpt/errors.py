"""Exception and warning types shared across the package."""


class QptError(Exception):
    """Base class for all qpt errors."""


class SingularityError(QptError):
    """kappa diverges: eta at (or numerically at) the -1 quasi-energy boundary."""


class SingularMapError(QptError):
    """Ising parameter map evaluated at theta + chi = n*pi, n != 0."""


class CapacityError(QptError):
    """Dense request exceeds the 12-qubit memory ceiling."""


class AliasingError(QptError):
    """Couplings violate max(|theta|,|chi|) < k_int/N; quasi-energies would wrap."""


class EigensolverError(QptError):
    """Dense eigendecomposition failed to converge."""


class NonFiniteResidualError(QptError):
    """Least-squares residual evaluated to NaN/inf."""


class SingularNormalMatrixError(QptError):
    """Damped normal matrix remained singular after repeated lambda escalation."""


class ReconstructionError(QptError):
    """Spectrum reconstruction did not converge."""


class RankDeficiencyError(ReconstructionError):
    """Reconstruction Jacobian is rank deficient; try fewer levels."""


class UsageError(QptError):
    """Bad command-line or config-file input."""


class AliasingWarning(UserWarning):
    """Non-fatal aliasing-bound violation (dense module policy)."""
