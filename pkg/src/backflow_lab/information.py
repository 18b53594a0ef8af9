"""Information measures on states and trajectories, and the backflow
functional (the accumulated increase of an information series).

All entropies use the natural logarithm.  Support mismatches in relative
entropies yield +inf as a value, never an exception, so parameter sweeps
can keep going.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError
from .states import DensityMatrix, ProbabilityVector, TimeGrid, Trajectory

MEASURE_TAGS = (
    "vn_entropy",
    "rel_entropy",
    "kl",
    "trace_distance",
    "extended_entropy",
    "s_cl",
    "s_qe",
)

SUPPORT_EIGENVALUE = 1e-12
SUPPORT_WEIGHT = 1e-10


@dataclass(frozen=True)
class InfoSeries:
    """Scalar information values on a time grid, with skip intervals marking
    windows excluded from backflow accumulation (propagated from generator
    gaps, or covering non-finite values)."""

    grid: TimeGrid
    values: np.ndarray
    measure_tag: str
    skip_intervals: tuple = ()

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise ContractViolationError(f"expected {self.grid.n} values, got shape {vals.shape}")
        skips = tuple((float(a), float(b)) for a, b in self.skip_intervals)
        mask = _skip_mask(self.grid.points, skips)
        if not np.all(np.isfinite(vals[~mask])):
            raise ContractViolationError("non-finite value outside skip intervals")
        vals = np.ascontiguousarray(vals)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "skip_intervals", skips)

    def skipped(self) -> np.ndarray:
        """Boolean mask of grid points inside skip intervals."""
        return _skip_mask(self.grid.points, self.skip_intervals)

    def has_infinite(self) -> bool:
        return bool(np.any(np.isinf(self.values)))

    def tail_residual(self) -> float:
        """Crude indicator of truncating the accumulation window:
        I(t_max) - min_t I(t) over non-skipped points."""
        vals = self.values[~self.skipped()]
        return float(vals[-1] - np.min(vals))


def _skip_mask(ts: np.ndarray, skips) -> np.ndarray:
    mask = np.zeros(ts.size, dtype=bool)
    for a, b in skips:
        mask |= (ts >= a) & (ts <= b)
    return mask


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """-Tr(rho log rho) in nats, with 0 log 0 = 0."""
    w = np.clip(rho.eigenvalues(), 0.0, None)
    nz = w[w > 0]
    return max(float(-np.sum(nz * np.log(nz))), 0.0)


def _spectral_entropy(w: np.ndarray) -> float:
    w = np.clip(w, 0.0, None)
    nz = w[w > 0]
    return float(-np.sum(nz * np.log(nz)))


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Quantum relative entropy D(rho || sigma) = Tr rho (log rho - log sigma).

    Returns +inf when rho puts weight above ``SUPPORT_WEIGHT`` outside the
    support of sigma (sigma eigenvalues below ``SUPPORT_EIGENVALUE``).
    """
    if rho.dim != sigma.dim:
        raise ContractViolationError("states must share a dimension")
    wr, vr = np.linalg.eigh(rho.entries)
    ws, vs = np.linalg.eigh(sigma.entries)
    wr = np.clip(wr, 0.0, None)
    ws = np.clip(ws, 0.0, None)
    small = ws < SUPPORT_EIGENVALUE
    overlap = np.abs(vs.conj().T @ rho.entries @ vs).diagonal().real
    if np.any(small) and float(np.sum(overlap[small])) > SUPPORT_WEIGHT:
        return float("inf")
    cross = np.abs(vr.conj().T @ vs) ** 2  # |<r_i|s_j>|^2
    log_ws = np.where(small, 0.0, np.log(np.where(small, 1.0, ws)))
    keep = ~small
    tr_rho_log_sigma = float(np.einsum("i,ij,j->", wr, cross[:, keep], log_ws[keep]))
    return max(-_spectral_entropy(wr) - tr_rho_log_sigma, 0.0)


def kl_divergence(p: ProbabilityVector, q: ProbabilityVector) -> float:
    """Classical relative entropy D(p || q) in nats; +inf on support mismatch."""
    if p.dim != q.dim:
        raise ContractViolationError("distributions must share a dimension")
    pv = np.clip(p.entries, 0.0, None)
    qv = np.clip(q.entries, 0.0, None)
    small = qv < SUPPORT_EIGENVALUE
    if np.any(small) and float(np.sum(pv[small])) > SUPPORT_WEIGHT:
        return float("inf")
    keep = (pv > 0) & ~small
    return max(float(np.sum(pv[keep] * (np.log(pv[keep]) - np.log(qv[keep])))), 0.0)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """(1/2) sum |eigenvalues(rho - sigma)|, in [0, 1]."""
    if rho.dim != sigma.dim:
        raise ContractViolationError("states must share a dimension")
    w = np.linalg.eigvalsh(rho.entries - sigma.entries)
    return float(0.5 * np.sum(np.abs(w)))


def shannon_entropy(p: np.ndarray) -> float:
    """-sum p log p for a bare nonnegative vector (0 log 0 = 0)."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def series_from_trajectory(
    traj: Trajectory,
    measure_tag: str,
    reference=None,
    skip_intervals=(),
) -> InfoSeries:
    """Pointwise information series over a trajectory.

    ``reference`` is required for 'rel_entropy', 'kl' and 'trace_distance'.
    Gap intervals from an upstream divisibility report should be passed as
    ``skip_intervals``; points with non-finite values (support mismatches)
    are folded into the skip list automatically.
    """
    if measure_tag not in MEASURE_TAGS:
        raise ContractViolationError(f"unknown measure tag {measure_tag!r}")
    needs_ref = measure_tag in ("rel_entropy", "kl", "trace_distance")
    if needs_ref and reference is None:
        raise ContractViolationError(f"measure {measure_tag!r} needs a reference state")
    n = traj.grid.n
    vals = np.empty(n, dtype=float)
    if measure_tag in ("vn_entropy", "rel_entropy", "trace_distance", "extended_entropy"):
        if traj.kind != "quantum":
            raise ContractViolationError(f"{measure_tag!r} needs a quantum trajectory")
    if measure_tag == "kl":
        if traj.kind != "classical":
            raise ContractViolationError("'kl' needs a classical trajectory")
    if measure_tag in ("s_cl", "s_qe"):
        if traj.kind != "quantum" or traj.dim != 2:
            raise ContractViolationError(f"{measure_tag!r} needs a two-state quantum trajectory")
        from .netfd import two_state_series_from_trajectory

        s_cl, s_qe = two_state_series_from_trajectory(traj, skip_intervals=skip_intervals)
        return s_cl if measure_tag == "s_cl" else s_qe
    if measure_tag == "vn_entropy":
        for i in range(n):
            vals[i] = von_neumann_entropy(traj.state(i))
    elif measure_tag == "extended_entropy":
        from .netfd import extended_entropy, thermofield_vector, extended_reduced_density

        for i in range(n):
            psi = thermofield_vector(traj.state(i))
            vals[i] = extended_entropy(extended_reduced_density(psi))
    elif measure_tag == "rel_entropy":
        for i in range(n):
            vals[i] = relative_entropy(traj.state(i), reference)
    elif measure_tag == "trace_distance":
        for i in range(n):
            vals[i] = trace_distance(traj.state(i), reference)
    elif measure_tag == "kl":
        for i in range(n):
            vals[i] = kl_divergence(traj.state(i), reference)
    skips = list(skip_intervals)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        ts = traj.grid.points
        h = float(np.min(np.diff(ts)))
        for i in np.nonzero(bad)[0]:
            skips.append((float(ts[i]) - h / 2, float(ts[i]) + h / 2))
    return InfoSeries(traj.grid, vals, measure_tag, tuple(skips))


def backflow_functional(series: InfoSeries) -> float:
    """Total accumulated increase of the series: the sum of positive
    increments over grid-adjacent pairs of non-skipped points.

    Exactly zero for monotone non-increasing samples and invariant under
    adding a constant.  Pairs separated by a skip interval do not
    contribute.
    """
    mask = series.skipped()
    if int(np.sum(~mask)) < 2:
        raise ContractViolationError("need at least two non-skipped points")
    vals = series.values
    ok_pair = (~mask[:-1]) & (~mask[1:])
    inc = np.diff(vals)
    rises = np.where(ok_pair, np.clip(inc, 0.0, None), 0.0)
    return float(np.sum(rises))
