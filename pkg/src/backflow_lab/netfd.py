"""Thermo-field doubling: purification of states in a doubled space, the
extended entropy, and its classical/intrinsic split for two-state systems,
with the decomposed backflow measures built on that split.

A state rho maps to the doubled-space vector with amplitudes
vectorize(sqrt(rho)) (column stacking, tilde index slow), so tracing out
the tilde sector returns exactly rho; the extended entropy of the reduced
doubled state therefore coincides with the von Neumann entropy of rho.
That identity is asserted and tested rather than assumed silently.

For a 2x2 reduced state [[p, c], [c*, 1-p]] the extended entropy splits as
S_hat = s_cl(p) + s_qe with s_cl the binary mixing entropy and s_qe the
residual intrinsic contribution, a function of b_qe = |c|^2 alone at fixed
p.  The residual is <= 0 (coherence lowers entropy) and vanishes iff c = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import ContractViolationError, NotPsdError
from .information import InfoSeries, backflow_functional
from .states import DensityMatrix, TimeGrid, Trajectory

ROUNDTRIP_TOL = 1e-10
SUBADDITIVITY_SLACK = 1e-8


@dataclass(frozen=True)
class ThermoFieldState:
    """Unit vector in the doubled space H (x) H~, basis |n> (x) |n~> with the
    tilde index slow (column-stacking order)."""

    dim: int
    amplitudes: np.ndarray
    norm_tol: float = ROUNDTRIP_TOL

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (self.dim * self.dim,):
            raise ContractViolationError(f"expected {self.dim**2} amplitudes, got {a.shape}")
        nrm = float(np.linalg.norm(a))
        if abs(nrm - 1.0) > self.norm_tol:
            raise ContractViolationError(f"norm {nrm} differs from 1 beyond {self.norm_tol:g}")
        a = np.ascontiguousarray(a)
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)


@dataclass(frozen=True)
class TwoStateNetfdParams:
    """Population p and intrinsic coherence c of the canonical 2x2 reduced
    doubled state [[p, c], [c*, 1-p]]; b_qe = |c|^2."""

    p: float
    c: complex
    psd_slack: float = 1e-12

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ContractViolationError(f"population p={self.p} outside [0, 1]")
        if self.b_qe > self.p * (1.0 - self.p) + self.psd_slack:
            raise NotPsdError(
                f"b_qe={self.b_qe:.3e} exceeds p(1-p)={self.p*(1-self.p):.3e}: "
                "the assembled state is not PSD"
            )

    @property
    def b_qe(self) -> float:
        return float(abs(self.c) ** 2)

    def matrix(self) -> np.ndarray:
        return np.array([[self.p, self.c], [np.conj(self.c), 1.0 - self.p]], dtype=complex)


@dataclass(frozen=True)
class DecomposedBackflow:
    """Backflow of the extended entropy and of its two sectors, plus the
    regime label.  Satisfies n_total <= n_cl + n_qe (positive-part
    subadditivity, exact up to float error)."""

    n_total: float
    n_cl: float
    n_qe: float
    regime: str

    def __post_init__(self):
        if self.n_total > self.n_cl + self.n_qe + SUBADDITIVITY_SLACK:
            raise ContractViolationError(
                f"subadditivity violated: {self.n_total} > {self.n_cl} + {self.n_qe}"
            )

    def to_json_dict(self) -> dict:
        return {
            "n_total": float(self.n_total),
            "n_cl": float(self.n_cl),
            "n_qe": float(self.n_qe),
            "regime": self.regime,
        }


def thermofield_vector(rho: DensityMatrix) -> ThermoFieldState:
    """Doubled-space purification with amplitudes vectorize(sqrt(rho))."""
    root = linalg.psd_sqrt(rho.entries)
    return ThermoFieldState(rho.dim, linalg.vectorize(root))


def extended_reduced_density(psi: ThermoFieldState) -> DensityMatrix:
    """Partial trace of |psi><psi| over the tilde sector, computed directly
    from the amplitudes (the doubled-space projector is never formed)."""
    a = linalg.devectorize(psi.amplitudes, psi.dim)
    rho = a @ a.conj().T
    rho = (rho + rho.conj().T) / 2.0
    return DensityMatrix(rho / np.trace(rho).real, trace_tol=1e-9, psd_floor=-1e-9)


def extended_entropy(rho_a: DensityMatrix) -> float:
    """Entropy of the reduced doubled state (von Neumann entropy)."""
    from .information import von_neumann_entropy

    return von_neumann_entropy(rho_a)


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-p * np.log(p) - (1.0 - p) * np.log(1.0 - p))


def decompose_two_state(params: TwoStateNetfdParams) -> tuple[float, float]:
    """Split the extended entropy of the canonical 2x2 state into
    (s_cl, s_qe): s_cl = binary entropy of p, s_qe = S_hat - s_cl <= 0.

    s_qe depends on |c| only (the eigenvalues are 1/2 +- r with
    r^2 = (p - 1/2)^2 + b_qe) and vanishes iff c = 0.
    """
    s_cl = binary_entropy(params.p)
    r = np.sqrt((params.p - 0.5) ** 2 + params.b_qe)
    r = min(float(r), 0.5)
    s_hat = binary_entropy(0.5 + r)
    return s_cl, s_hat - s_cl


def two_state_entropy_series(
    grid: TimeGrid, p: np.ndarray, b_qe: np.ndarray, skip_intervals=()
) -> tuple[InfoSeries, InfoSeries]:
    """(s_cl, s_qe) series from population and intrinsic-parameter samples."""
    p = np.asarray(p, dtype=float)
    b = np.asarray(b_qe, dtype=float)
    if p.shape != (grid.n,) or b.shape != (grid.n,):
        raise ContractViolationError("p and b_qe must match the grid")
    if np.any(b > p * (1.0 - p) + 1e-12):
        i = int(np.argmax(b - p * (1.0 - p)))
        raise NotPsdError(
            f"b_qe exceeds p(1-p) at t={grid.points[i]:g}: state not PSD"
        )
    pc = np.clip(p, 1e-300, 1.0)
    qc = np.clip(1.0 - p, 1e-300, 1.0)
    s_cl = -(pc * np.log(pc) + qc * np.log(qc))
    r = np.minimum(np.sqrt((p - 0.5) ** 2 + b), 0.5)
    hi = np.clip(0.5 + r, 1e-300, 1.0)
    lo = np.clip(0.5 - r, 1e-300, 1.0)
    s_hat = -(hi * np.log(hi) + lo * np.log(lo))
    return (
        InfoSeries(grid, s_cl, "s_cl", skip_intervals),
        InfoSeries(grid, s_hat - s_cl, "s_qe", skip_intervals),
    )


def two_state_series_from_trajectory(
    traj: Trajectory, skip_intervals=()
) -> tuple[InfoSeries, InfoSeries]:
    """(s_cl, s_qe) series for a two-state quantum trajectory, reading
    p = rho_00(t) and c = rho_01(t)."""
    if traj.kind != "quantum" or traj.dim != 2:
        raise ContractViolationError("need a two-state quantum trajectory")
    p = traj.states[:, 0, 0].real
    b = np.abs(traj.states[:, 0, 1]) ** 2
    return two_state_entropy_series(traj.grid, p, np.minimum(b, p * (1 - p)), skip_intervals)


def coincident_rise_intervals(
    s_cl: InfoSeries, s_qe: InfoSeries, rise_floor: float = 1e-12
) -> bool:
    """True when the two series rise on (essentially) the same grid steps.

    The sharp additivity of the decomposed backflow holds exactly on
    trajectories whose sector rise intervals coincide.  Steps on which
    either increment is smaller than ``rise_floor`` carry no resolvable
    slope information (their additivity defect is bounded by the floor) and
    are ignored; among the resolved steps the detector demands fewer than
    two with opposite slopes.
    """
    if s_cl.grid is not s_qe.grid and not np.array_equal(s_cl.grid.points, s_qe.grid.points):
        raise ContractViolationError("series must share a grid")
    mask = s_cl.skipped() | s_qe.skipped()
    ok_pair = (~mask[:-1]) & (~mask[1:])
    d_cl = np.diff(s_cl.values)
    d_qe = np.diff(s_qe.values)
    resolved = ok_pair & (np.abs(d_cl) > rise_floor) & (np.abs(d_qe) > rise_floor)
    if not np.any(resolved & ((d_cl > 0) | (d_qe > 0))):
        return False
    mismatch = int(np.sum(resolved & (np.sign(d_cl) != np.sign(d_qe))))
    return mismatch < 2


def decomposed_backflow(
    s_cl_series: InfoSeries, s_qe_series: InfoSeries, epsilon_n: float = 1e-6
) -> DecomposedBackflow:
    """Backflow of each entropy sector and of their sum, classified.

    n_total is the backflow of the pointwise sum (the extended entropy);
    positive-part subadditivity guarantees n_total <= n_cl + n_qe.
    """
    if not np.array_equal(s_cl_series.grid.points, s_qe_series.grid.points):
        raise ContractViolationError("series must share a grid")
    if tuple(s_cl_series.skip_intervals) != tuple(s_qe_series.skip_intervals):
        raise ContractViolationError("series must share skip intervals")
    n_cl = backflow_functional(s_cl_series)
    n_qe = backflow_functional(s_qe_series)
    total_series = InfoSeries(
        s_cl_series.grid,
        s_cl_series.values + s_qe_series.values,
        "extended_entropy",
        s_cl_series.skip_intervals,
    )
    n_total = backflow_functional(total_series)
    from .phase_diagram import classify

    return DecomposedBackflow(
        n_total=n_total, n_cl=n_cl, n_qe=n_qe, regime=classify(n_cl, n_qe, epsilon_n)
    )
