"""Value types: states, rate matrices, superoperator samples, time grids,
and trajectories.

All types are immutable after construction (backing arrays are marked
read-only) and validate their invariants eagerly, so anything downstream
can trust a constructed instance.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from . import linalg
from .errors import ContractViolationError

TRACE_TOL = 1e-12
HERMITICITY_TOL = 1e-12
PSD_FLOOR = -1e-10
PROB_FLOOR = -1e-12
COLUMN_SUM_TOL = 1e-10
GENERATOR_TRACE_TOL = 1e-10


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, PSD complex matrix (the reduced state)."""

    entries: np.ndarray
    trace_tol: float = TRACE_TOL
    herm_tol: float = HERMITICITY_TOL
    psd_floor: float = PSD_FLOOR

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ContractViolationError(f"density matrix must be square, got {m.shape}")
        d = m.shape[0]
        if d < 1 or d > linalg.MAX_QUANTUM_DIM:
            raise ContractViolationError(f"dimension {d} outside supported range 1..{linalg.MAX_QUANTUM_DIM}")
        if linalg.hermiticity_defect(m) > self.herm_tol:
            raise ContractViolationError(
                f"density matrix not Hermitian within {self.herm_tol:g}"
            )
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > self.trace_tol:
            raise ContractViolationError(f"trace {tr} differs from 1 beyond {self.trace_tol:g}")
        w = np.linalg.eigvalsh((m + m.conj().T) / 2.0)
        if w[0] < self.psd_floor:
            raise ContractViolationError(
                f"density matrix not PSD: min eigenvalue {w[0]:.3e} < {self.psd_floor:g}"
            )
        object.__setattr__(self, "entries", _freeze(m))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def eigenvalues(self) -> np.ndarray:
        """Spectrum, descending."""
        return np.linalg.eigvalsh(self.entries)[::-1]


@dataclass(frozen=True)
class ProbabilityVector:
    """Nonnegative real vector summing to one."""

    entries: np.ndarray
    sum_tol: float = TRACE_TOL
    floor: float = PROB_FLOOR

    def __post_init__(self):
        p = np.asarray(self.entries, dtype=float)
        if p.ndim != 1:
            raise ContractViolationError("probability vector must be one-dimensional")
        n = p.size
        if n < 1 or n > linalg.MAX_CLASSICAL_DIM:
            raise ContractViolationError(f"dimension {n} outside supported range 1..{linalg.MAX_CLASSICAL_DIM}")
        if np.min(p) < self.floor:
            raise ContractViolationError(f"negative entry {np.min(p):.3e} below {self.floor:g}")
        if abs(float(np.sum(p)) - 1.0) > self.sum_tol:
            raise ContractViolationError(f"entries sum to {np.sum(p)}, not 1")
        object.__setattr__(self, "entries", _freeze(p))

    @property
    def dim(self) -> int:
        return self.entries.size


@dataclass(frozen=True)
class RateMatrix:
    """Real n x n classical generator with zero column sums.

    The sign of the off-diagonal entries is deliberately NOT an invariant:
    it is exactly the property the divisibility test probes.
    """

    entries: np.ndarray
    column_sum_tol: float = COLUMN_SUM_TOL

    def __post_init__(self):
        w = np.asarray(self.entries, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ContractViolationError(f"rate matrix must be square, got {w.shape}")
        if w.shape[0] > linalg.MAX_CLASSICAL_DIM:
            raise ContractViolationError(f"dimension {w.shape[0]} exceeds {linalg.MAX_CLASSICAL_DIM}")
        colsums = np.abs(w.sum(axis=0))
        scale = max(1.0, float(np.max(np.abs(w))))
        if np.max(colsums) > self.column_sum_tol * scale:
            raise ContractViolationError(
                f"column sums reach {np.max(colsums):.3e}, beyond {self.column_sum_tol:g}"
            )
        object.__setattr__(self, "entries", _freeze(w))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def min_off_diagonal(self) -> float:
        w = self.entries
        mask = ~np.eye(self.dim, dtype=bool)
        return float(np.min(w[mask])) if self.dim > 1 else 0.0


@dataclass(frozen=True)
class SuperoperatorSample:
    """d^2 x d^2 complex matrix acting on column-stacked states, tagged with
    the time it was sampled at.

    With ``is_generator=True`` the trace row must annihilate the matrix
    (Tr(G X) = 0 for all X), the defining property of a generator.
    """

    dim: int
    entries: np.ndarray
    time: float = 0.0
    is_generator: bool = False
    trace_tol: float = GENERATOR_TRACE_TOL

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        d = self.dim
        if m.shape != (d * d, d * d):
            raise ContractViolationError(f"expected shape {(d*d, d*d)}, got {m.shape}")
        if self.time < 0:
            raise ContractViolationError("sample time must be >= 0")
        if self.is_generator:
            defect = trace_annihilation_defect(m, d)
            scale = max(1.0, float(np.max(np.abs(m))))
            if defect > self.trace_tol * scale:
                raise ContractViolationError(
                    f"generator does not annihilate the trace (defect {defect:.3e})"
                )
        object.__setattr__(self, "entries", _freeze(m))


def trace_annihilation_defect(superop: np.ndarray, dim: int) -> float:
    """Max abs entry of trace_row @ superop; zero for exact generators."""
    r = linalg.trace_row(dim) @ np.asarray(superop)
    return float(np.max(np.abs(r)))


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing sample times starting at 0."""

    points: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.points, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ContractViolationError("grid needs at least two points")
        if t[0] != 0.0:
            raise ContractViolationError("grid must start at t=0")
        if np.any(np.diff(t) <= 0):
            raise ContractViolationError("grid must be strictly increasing")
        object.__setattr__(self, "points", _freeze(t))

    @classmethod
    def uniform(cls, dt: float, t_max: float) -> "TimeGrid":
        if dt <= 0 or t_max <= 0:
            raise ContractViolationError("dt and t_max must be positive")
        n = int(round(t_max / dt))
        if abs(n * dt - t_max) > 1e-9 * max(1.0, t_max):
            n = int(np.ceil(t_max / dt))
        return cls(np.arange(n + 1) * dt)

    @property
    def n(self) -> int:
        return self.points.size

    @property
    def t_max(self) -> float:
        return float(self.points[-1])

    @property
    def dt(self) -> float:
        steps = np.diff(self.points)
        if np.max(steps) - np.min(steps) > 1e-9 * np.max(steps):
            raise ContractViolationError("grid is not uniform")
        return float(steps[0])

    def is_uniform(self) -> bool:
        steps = np.diff(self.points)
        return bool(np.max(steps) - np.min(steps) <= 1e-9 * np.max(steps))


@dataclass(frozen=True)
class Trajectory:
    """Per-grid-point states of a single kind ('quantum' or 'classical').

    States are stored as one stacked array: shape (n, d, d) complex for
    quantum, (n, m) float for classical.  Every stored state is validated
    on construction.
    """

    grid: TimeGrid
    states: np.ndarray
    kind: str
    trace_tol: float = 1e-9
    psd_floor: float = PSD_FLOOR

    def __post_init__(self):
        if self.kind not in ("quantum", "classical"):
            raise ContractViolationError(f"unknown trajectory kind {self.kind!r}")
        arr = np.asarray(self.states)
        n = self.grid.n
        if self.kind == "quantum":
            arr = arr.astype(complex)
            if arr.ndim != 3 or arr.shape[0] != n or arr.shape[1] != arr.shape[2]:
                raise ContractViolationError(f"expected ({n}, d, d) quantum states, got {arr.shape}")
            defect = float(np.max(np.abs(arr - arr.conj().transpose(0, 2, 1)))) / 2.0
            if defect > 1e-9:
                raise ContractViolationError(f"non-Hermitian state in trajectory (defect {defect:.3e})")
            traces = np.einsum("nii->n", arr)
            bad = np.argmax(np.abs(traces - 1.0))
            if abs(traces[bad] - 1.0) > self.trace_tol:
                raise ContractViolationError(
                    f"state at t={self.grid.points[bad]:g} has trace {traces[bad]}"
                )
            w = np.linalg.eigvalsh((arr + arr.conj().transpose(0, 2, 1)) / 2.0)
            i = np.argmin(w[:, 0])
            if w[i, 0] < self.psd_floor:
                raise ContractViolationError(
                    f"state at t={self.grid.points[i]:g} has eigenvalue {w[i,0]:.3e}"
                )
        else:
            arr = arr.astype(float)
            if arr.ndim != 2 or arr.shape[0] != n:
                raise ContractViolationError(f"expected ({n}, m) classical states, got {arr.shape}")
            if np.min(arr) < -1e-9:
                i = np.unravel_index(np.argmin(arr), arr.shape)[0]
                raise ContractViolationError(
                    f"negative probability at t={self.grid.points[i]:g}: {np.min(arr):.3e}"
                )
            sums = arr.sum(axis=1)
            bad = np.argmax(np.abs(sums - 1.0))
            if abs(sums[bad] - 1.0) > self.trace_tol:
                raise ContractViolationError(
                    f"state at t={self.grid.points[bad]:g} sums to {sums[bad]}"
                )
        object.__setattr__(self, "states", _freeze(arr))

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def state(self, i: int):
        """The i-th state as a validated value object."""
        if self.kind == "quantum":
            return DensityMatrix(self.states[i], trace_tol=1e-9, psd_floor=-1e-9)
        return ProbabilityVector(self.states[i], sum_tol=1e-9, floor=-1e-9)


def random_density_matrix(dim: int, rng: np.random.Generator) -> DensityMatrix:
    """Full-rank random state from a seeded generator (tests, examples)."""
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    m = a @ a.conj().T + 1e-3 * np.eye(dim)
    return DensityMatrix(m / np.trace(m).real)
