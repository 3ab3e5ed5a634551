"""Problem containers, validation, and JSON (de)serialization.

A problem couples a finite-state Markov chain (the regime process, given
by its generator matrix) with regime-indexed linear dynamics and quadratic
costs.  Regime families are stored as stacked ndarrays with the regime
axis first: A has shape (D, n, n), B has shape (D, n, m), and so on.

Inhomogeneous terms live in the exponentially decaying regime-modulated
class: a signal with rate kappa and per-regime amplitudes bar(i) takes the
value exp(-kappa*t) * bar(i) while the chain sits in regime i.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, fields

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    DimensionMismatch,
    IndefiniteCrossWeightWarning,
    IndefiniteSchurComplement,
    NegativeOffDiagonal,
    NotPositiveDefinite,
    ReducibleChainWarning,
    RowSumViolation,
    ValidationError,
)

ROW_SUM_REPAIR_TOL = 1e-9
PD_TOL = 1e-10
PSD_TOL = 1e-8
TRANSPOSE_TOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _family(name: str, entries, D: int, shape: tuple) -> np.ndarray:
    """Stack a regime family and check its uniform shape."""
    try:
        a = np.asarray(entries, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise DimensionMismatch(f"{name}: not numeric ({exc})") from None
    if a.ndim == len(shape):
        # A single matrix is accepted for D = 1.
        a = a[None]
    if a.shape != (D, *shape):
        raise DimensionMismatch(
            f"{name}: expected shape {(D, *shape)}, got {a.shape}"
        )
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name}: contains non-finite entries")
    return _readonly(a)


def _sym(a: np.ndarray) -> np.ndarray:
    return (a + np.swapaxes(a, -1, -2)) / 2.0


@dataclass(frozen=True)
class Generator:
    """Validated generator matrix of the regime chain."""

    pi: np.ndarray

    @property
    def D(self) -> int:
        return self.pi.shape[0]


def validate_generator(raw) -> Generator:
    """Check generator sign structure and repair tiny row-sum drift.

    Off-diagonal entries must be nonnegative and each row must sum to
    zero.  Row sums within 1e-9 of zero are repaired by adjusting the
    diagonal; larger deviations raise RowSumViolation.  A warning is
    emitted when the chain is reducible (the solvers still run, but
    stationary-distribution claims need not hold).
    """
    if isinstance(raw, Generator):
        return raw
    pi = np.array(raw, dtype=np.float64)
    if pi.ndim != 2 or pi.shape[0] != pi.shape[1]:
        raise DimensionMismatch(f"generator must be square, got shape {pi.shape}")
    if pi.shape[0] < 1:
        raise DimensionMismatch("generator must have at least one regime")
    if not np.all(np.isfinite(pi)):
        raise ValidationError("generator contains non-finite entries")
    D = pi.shape[0]
    for i in range(D):
        for j in range(D):
            if i != j and pi[i, j] < 0.0:
                raise NegativeOffDiagonal(i, j, float(pi[i, j]))
    for i in range(D):
        dev = float(pi[i].sum())
        if abs(dev) > ROW_SUM_REPAIR_TOL:
            raise RowSumViolation(i, dev)
        pi[i, i] -= dev
    if D > 1:
        adjacency = csr_matrix((np.abs(pi) > 0) & ~np.eye(D, dtype=bool))
        ncomp, _ = connected_components(adjacency, directed=True, connection="strong")
        if ncomp > 1:
            warnings.warn(
                f"regime chain is reducible ({ncomp} communicating classes)",
                ReducibleChainWarning,
                stacklevel=2,
            )
    return Generator(pi=_readonly(pi))


def stationary_distribution(gen: Generator) -> np.ndarray:
    """Least-squares stationary row vector mu with mu @ pi = 0, sum(mu) = 1."""
    D = gen.D
    lhs = np.vstack([gen.pi.T, np.ones((1, D))])
    rhs = np.zeros(D + 1)
    rhs[-1] = 1.0
    mu, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    return mu


@dataclass(frozen=True)
class DecayingSignal:
    """Decaying inhomogeneity exp(-kappa*t) * bar(regime) for one player.

    b feeds the state drift, q the state cost, rho the control cost.
    """

    kappa: float
    b: np.ndarray
    q: np.ndarray
    rho: np.ndarray


@dataclass(frozen=True)
class GameDecayingSignals:
    """Decaying inhomogeneities for a two-player problem (shared kappa).

    rho{k}_{l} pairs control k with player l's cost.
    """

    kappa: float
    b: np.ndarray
    q1: np.ndarray
    rho1_1: np.ndarray
    rho2_1: np.ndarray
    q2: np.ndarray
    rho1_2: np.ndarray
    rho2_2: np.ndarray


@dataclass(frozen=True)
class MjlsLqProblem:
    """Single-player regime-switching LQ problem on the infinite horizon."""

    gen: Generator
    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray
    inhomog: DecayingSignal | None = None

    @property
    def D(self) -> int:
        return self.gen.D

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.B.shape[2]

    @property
    def homogeneous(self) -> bool:
        return self.inhomog is None


@dataclass(frozen=True)
class MjlsGameProblem:
    """Two-player nonzero-sum regime-switching LQ game.

    Weight naming: Q{k}, S{j}_{k}, R{j}{l}_{k} give player k's cost blocks,
    where j, l index which control the block multiplies.
    """

    gen: Generator
    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    Q1: np.ndarray
    S1_1: np.ndarray
    S2_1: np.ndarray
    R11_1: np.ndarray
    R12_1: np.ndarray
    R21_1: np.ndarray
    R22_1: np.ndarray
    Q2: np.ndarray
    S1_2: np.ndarray
    S2_2: np.ndarray
    R11_2: np.ndarray
    R12_2: np.ndarray
    R21_2: np.ndarray
    R22_2: np.ndarray
    inhomog: GameDecayingSignals | None = None

    @property
    def D(self) -> int:
        return self.gen.D

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m1(self) -> int:
        return self.B1.shape[2]

    @property
    def m2(self) -> int:
        return self.B2.shape[2]

    @property
    def homogeneous(self) -> bool:
        return self.inhomog is None


def _check_pd(name: str, fam: np.ndarray, tol: float) -> None:
    for i in range(fam.shape[0]):
        w = np.linalg.eigvalsh(fam[i])
        if w[0] <= tol:
            raise NotPositiveDefinite(name, i, float(w[0]))


def _signal_from(raw, D: int, n: int, m: int) -> DecayingSignal:
    if isinstance(raw, DecayingSignal):
        raw = {"kappa": raw.kappa, "b": raw.b, "q": raw.q, "rho": raw.rho}
    if "kappa" not in raw:
        raise ValidationError("inhomog block requires a decay rate 'kappa'")
    kappa = float(raw["kappa"])
    if not (kappa > 0):
        raise ValidationError(f"decay rate kappa must be positive, got {kappa:g}")

    def vec(key: str, width: int) -> np.ndarray:
        if raw.get(key) is None:
            return _readonly(np.zeros((D, width)))
        return _family(f"inhomog.{key}", raw[key], D, (width,))

    return DecayingSignal(kappa=kappa, b=vec("b", n), q=vec("q", n), rho=vec("rho", m))


def _game_signals_from(raw, D: int, n: int, m1: int, m2: int) -> GameDecayingSignals:
    if isinstance(raw, GameDecayingSignals):
        raw = {
            "kappa": raw.kappa,
            "b": raw.b,
            "q1": raw.q1,
            "rho1_1": raw.rho1_1,
            "rho2_1": raw.rho2_1,
            "q2": raw.q2,
            "rho1_2": raw.rho1_2,
            "rho2_2": raw.rho2_2,
        }
    if "kappa" not in raw:
        raise ValidationError("inhomog block requires a decay rate 'kappa'")
    kappa = float(raw["kappa"])
    if not (kappa > 0):
        raise ValidationError(f"decay rate kappa must be positive, got {kappa:g}")

    def vec(key: str, width: int) -> np.ndarray:
        if raw.get(key) is None:
            return _readonly(np.zeros((D, width)))
        return _family(f"inhomog.{key}", raw[key], D, (width,))

    return GameDecayingSignals(
        kappa=kappa,
        b=vec("b", n),
        q1=vec("q1", n),
        rho1_1=vec("rho1_1", m1),
        rho2_1=vec("rho2_1", m2),
        q2=vec("q2", n),
        rho1_2=vec("rho1_2", m1),
        rho2_2=vec("rho2_2", m2),
    )


def validate_lq_problem(
    generator,
    A=None,
    B=None,
    Q=None,
    S=None,
    R=None,
    inhomog=None,
) -> MjlsLqProblem:
    """Validate single-player problem data and return the container.

    Q and R are symmetrized before the eigenvalue tests (file input may
    carry rounding).  R(i) must be positive definite and the state-weight
    Schur complement Q(i) - S(i)^T R(i)^-1 S(i) positive semidefinite.
    Passing an existing problem re-validates it (idempotent).
    """
    if isinstance(generator, MjlsLqProblem) and A is None:
        p = generator
        return validate_lq_problem(p.gen, p.A, p.B, p.Q, p.S, p.R, p.inhomog)
    gen = validate_generator(generator)
    D = gen.D
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 2:
        A = A[None]
    if A.ndim != 3 or A.shape[0] != D or A.shape[1] != A.shape[2]:
        raise DimensionMismatch(
            f"A: expected shape ({D}, n, n), got {A.shape}"
        )
    n = A.shape[1]
    B = np.asarray(B, dtype=np.float64)
    if B.ndim == 2:
        B = B[None]
    if B.ndim != 3 or B.shape[:2] != (D, n):
        raise DimensionMismatch(f"B: expected shape ({D}, {n}, m), got {B.shape}")
    m = B.shape[2]
    A = _family("A", A, D, (n, n))
    B = _family("B", B, D, (n, m))
    Q = _readonly(_sym(_family("Q", Q, D, (n, n))))
    if S is None:
        S = np.zeros((D, m, n))
    S = _family("S", S, D, (m, n))
    R = _readonly(_sym(_family("R", R, D, (m, m))))
    _check_pd("R", R, PD_TOL)
    for i in range(D):
        schur = Q[i] - S[i].T @ np.linalg.solve(R[i], S[i])
        w = np.linalg.eigvalsh(_sym(schur))
        if w[0] < -PSD_TOL:
            raise IndefiniteSchurComplement(i, float(w[0]))
    sig = None if inhomog is None else _signal_from(inhomog, D, n, m)
    return MjlsLqProblem(gen=gen, A=A, B=B, Q=Q, S=S, R=R, inhomog=sig)


def validate_game_problem(
    generator,
    A=None,
    B1=None,
    B2=None,
    Q1=None,
    S1_1=None,
    S2_1=None,
    R11_1=None,
    R12_1=None,
    R22_1=None,
    Q2=None,
    S1_2=None,
    S2_2=None,
    R11_2=None,
    R12_2=None,
    R22_2=None,
    R21_1=None,
    R21_2=None,
    inhomog=None,
) -> MjlsGameProblem:
    """Validate two-player problem data and return the container.

    Symmetry is enforced on every square weight block and the transpose
    pairing R12 = R21^T on the cross blocks (within 1e-10).  Positive
    definiteness is required of the blocks the solvers invert: player 1's
    own weight in their own cost (R11_1) and player 2's own weight in
    their own cost (R22_2).  Cross-cost own-control blocks (R22_1, R11_2)
    only trigger a warning when indefinite.  The state-weight floor is
    Q{k} - S{k}_{k}^T R{k}{k}_{k} S{k}_{k} positive semidefinite.
    Passing an existing problem re-validates it (idempotent).
    """
    if isinstance(generator, MjlsGameProblem) and A is None:
        p = generator
        kw = {f.name: getattr(p, f.name) for f in fields(MjlsGameProblem)}
        return validate_game_problem(kw.pop("gen"), **kw)
    gen = validate_generator(generator)
    D = gen.D
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 2:
        A = A[None]
    if A.ndim != 3 or A.shape[0] != D or A.shape[1] != A.shape[2]:
        raise DimensionMismatch(f"A: expected shape ({D}, n, n), got {A.shape}")
    n = A.shape[1]
    A = _family("A", A, D, (n, n))

    def ctrl(name: str, raw) -> np.ndarray:
        a = np.asarray(raw, dtype=np.float64)
        if a.ndim == 2:
            a = a[None]
        if a.ndim != 3 or a.shape[:2] != (D, n):
            raise DimensionMismatch(
                f"{name}: expected shape ({D}, {n}, m), got {a.shape}"
            )
        return _family(name, a, D, a.shape[1:])

    B1 = ctrl("B1", B1)
    B2 = ctrl("B2", B2)
    m1, m2 = B1.shape[2], B2.shape[2]

    Q1 = _readonly(_sym(_family("Q1", Q1, D, (n, n))))
    Q2 = _readonly(_sym(_family("Q2", Q2, D, (n, n))))
    S1_1 = _family("S1_1", S1_1, D, (m1, n)) if S1_1 is not None else _readonly(np.zeros((D, m1, n)))
    S2_1 = _family("S2_1", S2_1, D, (m2, n)) if S2_1 is not None else _readonly(np.zeros((D, m2, n)))
    S1_2 = _family("S1_2", S1_2, D, (m1, n)) if S1_2 is not None else _readonly(np.zeros((D, m1, n)))
    S2_2 = _family("S2_2", S2_2, D, (m2, n)) if S2_2 is not None else _readonly(np.zeros((D, m2, n)))
    R11_1 = _readonly(_sym(_family("R11_1", R11_1, D, (m1, m1))))
    R22_1 = _readonly(_sym(_family("R22_1", R22_1, D, (m2, m2))))
    R11_2 = _readonly(_sym(_family("R11_2", R11_2, D, (m1, m1))))
    R22_2 = _readonly(_sym(_family("R22_2", R22_2, D, (m2, m2))))
    R12_1 = _family("R12_1", R12_1, D, (m1, m2))
    R12_2 = _family("R12_2", R12_2, D, (m1, m2))

    def pair(name: str, r12: np.ndarray, r21) -> np.ndarray:
        if r21 is None:
            return _readonly(np.swapaxes(r12, -1, -2).copy())
        r21 = _family(name, r21, D, (m2, m1))
        gap = float(np.max(np.abs(r12 - np.swapaxes(r21, -1, -2))))
        if gap > TRANSPOSE_TOL:
            raise ValidationError(
                f"{name} must equal the transpose of its paired cross block "
                f"(max deviation {gap:g})"
            )
        return r21

    R21_1 = pair("R21_1", R12_1, R21_1)
    R21_2 = pair("R21_2", R12_2, R21_2)

    _check_pd("R11_1", R11_1, PD_TOL)
    _check_pd("R22_2", R22_2, PD_TOL)
    for name, fam in (("R22_1", R22_1), ("R11_2", R11_2)):
        for i in range(D):
            w = np.linalg.eigvalsh(fam[i])
            if w[0] <= PD_TOL:
                warnings.warn(
                    f"{name} in regime {i} has minimum eigenvalue {w[0]:g}; "
                    "it is never inverted, continuing",
                    IndefiniteCrossWeightWarning,
                    stacklevel=2,
                )
    for i in range(D):
        schur1 = Q1[i] - S1_1[i].T @ R11_1[i] @ S1_1[i]
        w = np.linalg.eigvalsh(_sym(schur1))
        if w[0] < -PSD_TOL:
            raise IndefiniteSchurComplement(i, float(w[0]))
        schur2 = Q2[i] - S2_2[i].T @ R22_2[i] @ S2_2[i]
        w = np.linalg.eigvalsh(_sym(schur2))
        if w[0] < -PSD_TOL:
            raise IndefiniteSchurComplement(i, float(w[0]))

    sig = None if inhomog is None else _game_signals_from(inhomog, D, n, m1, m2)
    return MjlsGameProblem(
        gen=gen,
        A=A,
        B1=B1,
        B2=B2,
        Q1=Q1,
        S1_1=S1_1,
        S2_1=S2_1,
        R11_1=R11_1,
        R12_1=R12_1,
        R21_1=R21_1,
        R22_1=R22_1,
        Q2=Q2,
        S1_2=S1_2,
        S2_2=S2_2,
        R11_2=R11_2,
        R12_2=R12_2,
        R21_2=R21_2,
        R22_2=R22_2,
        inhomog=sig,
    )


def problem_to_dict(problem) -> dict:
    """Serialize a problem to the JSON document layout."""
    if isinstance(problem, MjlsLqProblem):
        doc = {
            "n": problem.n,
            "m": problem.m,
            "generator": problem.gen.pi.tolist(),
            "regimes": [
                {
                    "A": problem.A[i].tolist(),
                    "B": problem.B[i].tolist(),
                    "Q": problem.Q[i].tolist(),
                    "S": problem.S[i].tolist(),
                    "R": problem.R[i].tolist(),
                }
                for i in range(problem.D)
            ],
        }
        if problem.inhomog is not None:
            sig = problem.inhomog
            doc["inhomog"] = {
                "kappa": sig.kappa,
                "b": sig.b.tolist(),
                "q": sig.q.tolist(),
                "rho": sig.rho.tolist(),
            }
        return doc
    if isinstance(problem, MjlsGameProblem):
        keys = (
            "A B1 B2 Q1 S1_1 S2_1 R11_1 R12_1 R21_1 R22_1 "
            "Q2 S1_2 S2_2 R11_2 R12_2 R21_2 R22_2"
        ).split()
        doc = {
            "n": problem.n,
            "m1": problem.m1,
            "m2": problem.m2,
            "generator": problem.gen.pi.tolist(),
            "regimes": [
                {k: getattr(problem, k)[i].tolist() for k in keys}
                for i in range(problem.D)
            ],
        }
        if problem.inhomog is not None:
            sig = problem.inhomog
            doc["inhomog"] = {
                "kappa": sig.kappa,
                "b": sig.b.tolist(),
                "q1": sig.q1.tolist(),
                "rho1_1": sig.rho1_1.tolist(),
                "rho2_1": sig.rho2_1.tolist(),
                "q2": sig.q2.tolist(),
                "rho1_2": sig.rho1_2.tolist(),
                "rho2_2": sig.rho2_2.tolist(),
            }
        return doc
    raise TypeError(f"not a problem: {type(problem).__name__}")


def _regime_stack(doc: dict, key: str, required: bool = True):
    out = []
    for idx, reg in enumerate(doc["regimes"]):
        if key not in reg:
            if required:
                raise DimensionMismatch(f"regime {idx} is missing block '{key}'")
            return None
        out.append(reg[key])
    return out


def problem_from_dict(doc: dict):
    """Parse and validate a problem JSON document (single- or two-player)."""
    if "regimes" not in doc or "generator" not in doc:
        raise ValidationError("problem document needs 'generator' and 'regimes'")
    if not doc["regimes"]:
        raise ValidationError("problem document has no regimes")
    two_player = "m1" in doc or "B1" in doc["regimes"][0]
    if two_player:
        problem = validate_game_problem(
            doc["generator"],
            A=_regime_stack(doc, "A"),
            B1=_regime_stack(doc, "B1"),
            B2=_regime_stack(doc, "B2"),
            Q1=_regime_stack(doc, "Q1"),
            S1_1=_regime_stack(doc, "S1_1"),
            S2_1=_regime_stack(doc, "S2_1"),
            R11_1=_regime_stack(doc, "R11_1"),
            R12_1=_regime_stack(doc, "R12_1"),
            R22_1=_regime_stack(doc, "R22_1"),
            Q2=_regime_stack(doc, "Q2"),
            S1_2=_regime_stack(doc, "S1_2"),
            S2_2=_regime_stack(doc, "S2_2"),
            R11_2=_regime_stack(doc, "R11_2"),
            R12_2=_regime_stack(doc, "R12_2"),
            R22_2=_regime_stack(doc, "R22_2"),
            R21_1=_regime_stack(doc, "R21_1", required=False),
            R21_2=_regime_stack(doc, "R21_2", required=False),
            inhomog=doc.get("inhomog"),
        )
        declared = (doc.get("n"), doc.get("m1"), doc.get("m2"))
        actual = (problem.n, problem.m1, problem.m2)
    else:
        problem = validate_lq_problem(
            doc["generator"],
            A=_regime_stack(doc, "A"),
            B=_regime_stack(doc, "B"),
            Q=_regime_stack(doc, "Q"),
            S=_regime_stack(doc, "S", required=False),
            R=_regime_stack(doc, "R"),
            inhomog=doc.get("inhomog"),
        )
        declared = (doc.get("n"), doc.get("m"))
        actual = (problem.n, problem.m)
    for want, got in zip(declared, actual):
        if want is not None and int(want) != got:
            raise DimensionMismatch(
                f"declared dimensions {declared} disagree with data {actual}"
            )
    return problem


def load_problem(path):
    """Read and validate a problem JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return problem_from_dict(doc)


def save_problem(problem, path) -> None:
    """Write a problem to a JSON file (round-trips through load_problem)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(problem_to_dict(problem), fh, indent=1)
        fh.write("\n")
