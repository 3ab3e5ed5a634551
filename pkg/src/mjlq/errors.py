"""Exception hierarchy for the mjlq package.

Every exception carries enough structured context (regime index, offending
eigenvalue, iteration count, ...) to act on programmatically; the string
form is a single line suitable for CLI stderr.
"""

from __future__ import annotations


class MjlqError(Exception):
    """Base class for all package errors."""


class ValidationError(MjlqError, ValueError):
    """Problem data failed validation."""


class NegativeOffDiagonal(ValidationError):
    """Generator has a negative off-diagonal rate."""

    def __init__(self, i: int, j: int, value: float):
        self.i, self.j, self.value = i, j, value
        super().__init__(f"generator entry ({i},{j}) = {value:g} is negative")


class RowSumViolation(ValidationError):
    """Generator row sum deviates from zero beyond repair tolerance."""

    def __init__(self, i: int, deviation: float):
        self.i, self.deviation = i, deviation
        super().__init__(f"generator row {i} sums to {deviation:g}, not 0")


class DimensionMismatch(ValidationError):
    """Array shapes are inconsistent with the declared dimensions."""


class NotPositiveDefinite(ValidationError):
    """A weight block that must be positive (semi)definite is not."""

    def __init__(self, block: str, regime: int, min_eig: float):
        self.block, self.regime, self.min_eig = block, regime, min_eig
        super().__init__(
            f"{block} in regime {regime} has minimum eigenvalue {min_eig:g}"
        )


class IndefiniteSchurComplement(ValidationError):
    """The state-weight Schur complement Q - S^T R^-1 S is indefinite."""

    def __init__(self, regime: int, min_eig: float):
        self.regime, self.min_eig = regime, min_eig
        super().__init__(
            f"Schur complement in regime {regime} has minimum eigenvalue "
            f"{min_eig:g}"
        )


class SolverError(MjlqError, RuntimeError):
    """An iterative or direct solve failed."""


class SingularOperator(SolverError):
    """The stacked coupled-Lyapunov operator is numerically singular."""


class SingularShiftedOperator(SolverError):
    """The decay-shifted stationary drift-matching system is singular."""


class ResolventSingular(SolverError):
    """2*kappa is an eigenvalue of the generator; the resolvent fails."""


class SingularFeedforwardSystem(SolverError):
    """The stacked two-player feedforward system is singular."""


class SingularConstraintBlock(SolverError):
    """A stacked gain-constraint block is singular at some regime."""

    def __init__(self, regime: int, min_sv: float):
        self.regime, self.min_sv = regime, min_sv
        super().__init__(
            f"gain constraint block singular in regime {regime} "
            f"(smallest singular value {min_sv:.3e})"
        )


class LyapunovSingular(SolverError):
    """A Newton sweep produced a singular coupled Lyapunov operator."""

    def __init__(self, sweep: int):
        self.sweep = sweep
        super().__init__(f"coupled Lyapunov operator singular at sweep {sweep}")


class NotConverged(SolverError):
    """Iteration budget exhausted before reaching tolerance."""

    def __init__(
        self,
        iterations: int,
        best_residual: float,
        what: str = "solver",
        best_residuals: tuple = (),
    ):
        self.iterations = iterations
        self.best_residual = best_residual
        self.best_residuals = best_residuals or (best_residual,)
        super().__init__(
            f"{what} did not converge in {iterations} iterations "
            f"(best residual {best_residual:.3e})"
        )


class InnerCareFailed(SolverError):
    """A best-response Riccati solve inside the game iteration failed."""

    def __init__(self, player: int, sweep: int, cause: Exception):
        self.player, self.sweep = player, sweep
        self.__cause__ = cause
        super().__init__(
            f"player {player} best-response solve failed at sweep {sweep}: {cause}"
        )


class SynthesisFailed(SolverError):
    """No stabilizing gain was found (system may not be stabilizable)."""


# Name used by the Riccati solver when warm-start synthesis fails.
StabilizerSynthesisFailed = SynthesisFailed


class SimulationError(MjlqError, RuntimeError):
    """Monte-Carlo estimation could not meet its contract."""


class HorizonTooShort(SimulationError):
    """The truncation-tail bound exceeds the accuracy target."""

    def __init__(self, tail_bound: float, target: float, horizon: float):
        self.tail_bound, self.target, self.horizon = tail_bound, target, horizon
        super().__init__(
            f"tail bound {tail_bound:.3e} exceeds target {target:.3e} at "
            f"horizon {horizon:g}"
        )


class ReducibleChainWarning(UserWarning):
    """The regime chain is not irreducible; stationary claims may not hold."""


class IndefiniteCrossWeightWarning(UserWarning):
    """A cross-player control weight block is not positive definite.

    The solvers never invert these blocks, so this is a diagnostic rather
    than an error.
    """
