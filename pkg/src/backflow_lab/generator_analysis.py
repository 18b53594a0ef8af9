"""Exact extraction of time-local generators from propagator families,
canonical GKSL decomposition with time-dependent rates, and divisibility
tests.

The generator is recovered as G(t) = dPhi/dt(t) Phi(t)^{-1} with the time
derivative taken by 4th-order finite differences on the grid (one-sided
stencils at the ends).  Where Phi is singular or too ill-conditioned the
point is reported as a gap interval rather than extrapolated; downstream
consumers skip flagged intervals.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import linalg
from .errors import ContractViolationError, GeneratorSingularityError
from .propagation import PropagatorFamily, TclGenerator
from .states import TimeGrid

CONDITION_LIMIT = 1e8
RATE_TOLERANCE = 1e-7
EXTRACTION_TRACE_TOL = 1e-7
REASSEMBLY_TOL = 1e-8


@dataclass(frozen=True)
class SampledGenerator:
    """Time-local generator known only at grid points, with gap intervals
    where extraction was impossible."""

    grid: TimeGrid
    samples: np.ndarray
    kind: str
    dim: int
    gaps: tuple = ()

    def __post_init__(self):
        arr = np.ascontiguousarray(self.samples)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "gaps", tuple((float(a), float(b)) for a, b in self.gaps))

    @property
    def matrix_dim(self) -> int:
        return self.dim * self.dim if self.kind == "quantum" else self.dim

    def in_gap(self, t: float) -> bool:
        return any(a <= t <= b for a, b in self.gaps)

    def gap_mask(self) -> np.ndarray:
        """Boolean mask over grid points lying inside a gap interval."""
        ts = self.grid.points
        mask = np.zeros(ts.size, dtype=bool)
        for a, b in self.gaps:
            mask |= (ts >= a) & (ts <= b)
        return mask

    def interpolate(self, t: float) -> np.ndarray:
        """Cubic 4-point Lagrange interpolation between grid samples."""
        if self.in_gap(t):
            raise GeneratorSingularityError(
                f"generator undefined inside gap at t={t:g}", time=t
            )
        ts = self.grid.points
        if t < ts[0] or t > ts[-1]:
            raise ContractViolationError(f"t={t:g} outside the sampled range")
        j = int(np.searchsorted(ts, t) - 1)
        j = min(max(j, 0), ts.size - 2)
        lo = min(max(j - 1, 0), ts.size - 4)
        idx = np.arange(lo, lo + 4)
        out = np.zeros_like(self.samples[0])
        for k in idx:
            w = 1.0
            for m in idx:
                if m != k:
                    w *= (t - ts[m]) / (ts[k] - ts[m])
            out = out + w * self.samples[k]
        return out

    def as_tcl_generator(self) -> TclGenerator:
        return TclGenerator(dim=self.dim, kind=self.kind, evaluate=self.interpolate)


@dataclass(frozen=True)
class CanonicalGkslForm:
    """Canonical pieces of a trace-annihilating quantum generator:
    Hermitian traceless ``hamiltonian``, canonical ``rates`` (descending)
    and Hilbert-Schmidt-orthonormal traceless ``jump_ops``."""

    time: float
    hamiltonian: np.ndarray
    rates: np.ndarray
    jump_ops: np.ndarray  # shape (d^2 - 1, d, d)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def reassemble(self) -> np.ndarray:
        """Superoperator matrix rebuilt from the canonical pieces."""
        g = linalg.commutator_superop(self.hamiltonian)
        for rate, jump in zip(self.rates, self.jump_ops):
            g = g + rate * linalg.dissipator_superop(jump)
        return g


@dataclass(frozen=True)
class DivisibilityReport:
    divisible: bool
    min_rate: float
    first_violation_time: float | None
    rate_traces: np.ndarray
    grid: TimeGrid
    kind: str
    rate_tolerance: float
    gaps: tuple = ()

    def to_json_dict(self, rates_csv_path: str | None = None) -> dict:
        out = {
            "divisible": bool(self.divisible),
            "min_rate": float(self.min_rate),
            "first_violation_time": (
                None if self.first_violation_time is None else float(self.first_violation_time)
            ),
            "kind": self.kind,
            "rate_tolerance": float(self.rate_tolerance),
            "gaps": [[float(a), float(b)] for a, b in self.gaps],
        }
        if rates_csv_path is not None:
            out["rates_csv_path"] = rates_csv_path
        return out


def _derivative_4th(maps: np.ndarray, h: float) -> np.ndarray:
    """4th-order finite-difference time derivative of a stacked family."""
    n = maps.shape[0]
    if n < 5:
        raise ContractViolationError("need at least 5 grid points for 4th-order stencils")
    d = np.empty_like(maps)
    d[2:-2] = (maps[:-4] - 8 * maps[1:-3] + 8 * maps[3:-1] - maps[4:]) / (12 * h)
    d[0] = (-25 * maps[0] + 48 * maps[1] - 36 * maps[2] + 16 * maps[3] - 3 * maps[4]) / (12 * h)
    d[1] = (-3 * maps[0] - 10 * maps[1] + 18 * maps[2] - 6 * maps[3] + maps[4]) / (12 * h)
    d[-2] = (3 * maps[-1] + 10 * maps[-2] - 18 * maps[-3] + 6 * maps[-4] - maps[-5]) / (12 * h)
    d[-1] = (25 * maps[-1] - 48 * maps[-2] + 36 * maps[-3] - 16 * maps[-4] + 3 * maps[-5]) / (12 * h)
    return d


def _conservation_row(kind: str, dim: int) -> np.ndarray:
    return linalg.trace_row(dim) if kind == "quantum" else np.ones(dim)


def extract_tcl_generator(
    family: PropagatorFamily, condition_limit: float = CONDITION_LIMIT
) -> SampledGenerator:
    """Recover G(t) = dPhi/dt Phi^{-1} on the grid.

    Points where Phi is singular beyond ``condition_limit`` (or where the
    recovered sample fails trace annihilation, the symptom of a
    near-singular inversion) become gap intervals.  Raises
    :class:`GeneratorSingularityError` only if no point survives.
    """
    maps = np.asarray(family.maps)
    h = family.grid.dt
    ts = family.grid.points
    deriv = _derivative_4th(maps, h)
    n = maps.shape[0]
    u = _conservation_row(family.kind, family.dim)
    # batched conditioning check and inversion over the whole grid
    sv = np.linalg.svd(maps, compute_uv=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        conds = np.where(sv[:, -1] > 0, sv[:, 0] / sv[:, -1], np.inf)
    flagged = conds > condition_limit
    samples = np.zeros_like(maps)
    ok = ~flagged
    if np.any(ok):
        inv_ok = np.linalg.inv(maps[ok])
        g_ok = np.einsum("nab,nbc->nac", deriv[ok], inv_ok)
        defects = np.max(np.abs(np.einsum("a,nab->nb", u, g_ok)), axis=1)
        scales = np.maximum(1.0, np.max(np.abs(g_ok), axis=(1, 2)))
        bad = defects > EXTRACTION_TRACE_TOL * scales
        # project out the residual trace-row defect for downstream stability
        g_ok = g_ok - np.einsum("a,nb->nab", u, np.einsum("a,nab->nb", u, g_ok)) / float(u @ u)
        g_ok[bad] = 0.0
        samples[ok] = g_ok
        flagged[np.nonzero(ok)[0][bad]] = True
    if np.all(flagged):
        raise GeneratorSingularityError(
            f"propagator singular at every grid point (first t={ts[0]:g})", time=float(ts[0])
        )
    gaps = []
    i = 0
    while i < n:
        if flagged[i]:
            j = i
            while j + 1 < n and flagged[j + 1]:
                j += 1
            lo = ts[i] - (h / 2 if i > 0 else 0.0)
            hi = ts[j] + (h / 2 if j < n - 1 else 0.0)
            gaps.append((float(lo), float(hi)))
            i = j + 1
        else:
            i += 1
    return SampledGenerator(family.grid, samples, family.kind, family.dim, tuple(gaps))


@lru_cache(maxsize=8)
def gell_mann_basis(dim: int) -> np.ndarray:
    """Generalized Gell-Mann matrices: (d^2 - 1, d, d) Hermitian, traceless,
    HS-orthonormal.  Ordering: for each pair j < k the symmetric then the
    antisymmetric element, followed by the d - 1 diagonal elements."""
    mats = []
    for j in range(dim):
        for k in range(j + 1, dim):
            sym = np.zeros((dim, dim), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0 / np.sqrt(2.0)
            mats.append(sym)
            asym = np.zeros((dim, dim), dtype=complex)
            asym[j, k] = -1j / np.sqrt(2.0)
            asym[k, j] = 1j / np.sqrt(2.0)
            mats.append(asym)
    for l in range(1, dim):
        diag = np.zeros((dim, dim), dtype=complex)
        for j in range(l):
            diag[j, j] = 1.0
        diag[l, l] = -float(l)
        diag /= np.sqrt(l * (l + 1))
        mats.append(diag)
    out = np.array(mats)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=8)
def _full_basis(dim: int) -> np.ndarray:
    ident = np.eye(dim, dtype=complex) / np.sqrt(dim)
    return np.concatenate([ident[None], gell_mann_basis(dim)], axis=0)


def process_matrix(g: np.ndarray, dim: int) -> np.ndarray:
    """Expansion coefficients c with A(rho) = sum_{ab} c[a,b] F_a rho F_b
    over the HS-orthonormal basis {F_0 = I/sqrt(d), Gell-Mann...}."""
    basis = _full_basis(dim)
    m4 = np.asarray(g, dtype=complex).reshape(dim, dim, dim, dim)
    # c[A,B] = sum conj(F[B][c,a]) conj(F[A][d,e]) M[a,d,c,e]
    return np.einsum("Bca,Ade,adce->AB", basis.conj(), basis.conj(), m4, optimize=True)


def gksl_canonical_decompose(
    g, dim: int | None = None, time: float | None = None
) -> CanonicalGkslForm:
    """Canonical decomposition of a trace-annihilating generator.

    The generator is expanded over the traceless orthonormal basis; the
    eigendecomposition of the resulting Kossakowski matrix supplies the
    canonical rates (descending) and jump operators, and the remainder
    assembles into the Hamiltonian part.
    """
    from .states import SuperoperatorSample, trace_annihilation_defect

    if isinstance(g, SuperoperatorSample):
        mat = np.asarray(g.entries)
        dim = g.dim
        t = g.time if time is None else time
    else:
        mat = np.asarray(g, dtype=complex)
        if dim is None:
            dim = int(round(np.sqrt(mat.shape[0])))
        t = 0.0 if time is None else time
    scale = max(1.0, float(np.max(np.abs(mat))))
    if trace_annihilation_defect(mat, dim) > EXTRACTION_TRACE_TOL * scale:
        raise ContractViolationError("generator does not annihilate the trace")
    c = process_matrix(mat, dim)
    c = (c + c.conj().T) / 2.0
    basis = _full_basis(dim)
    chi = c[1:, 1:]
    rates, vecs = np.linalg.eigh(chi)
    rates = rates[::-1].real.copy()
    vecs = vecs[:, ::-1]
    jumps = np.einsum("ik,iab->kab", vecs, basis[1:])
    b_op = np.einsum("i,iab->ab", c[1:, 0], basis[1:]) / np.sqrt(dim)
    hamiltonian = 1j * (b_op - b_op.conj().T) / 2.0
    hamiltonian = (hamiltonian + hamiltonian.conj().T) / 2.0
    hamiltonian = hamiltonian - np.trace(hamiltonian) / dim * np.eye(dim)
    return CanonicalGkslForm(
        time=float(t), hamiltonian=hamiltonian, rates=rates, jump_ops=jumps
    )


def canonical_rates_on_grid(gen: SampledGenerator) -> np.ndarray:
    """Canonical rate vectors gamma_k(t) at every non-gap grid point.

    Returns shape (n, d^2 - 1); gap rows are NaN.  The per-point
    Kossakowski construction is batched over the grid.
    """
    if gen.kind != "quantum":
        raise ContractViolationError("canonical rates exist only for quantum generators")
    dim = gen.dim
    basis = _full_basis(dim)
    mask = gen.gap_mask()
    n = gen.grid.n
    m4 = np.asarray(gen.samples, dtype=complex).reshape(n, dim, dim, dim, dim)
    c = np.einsum("Bca,Ade,tadce->tAB", basis.conj(), basis.conj(), m4, optimize=True)
    chi = c[:, 1:, 1:]
    chi = (chi + chi.conj().transpose(0, 2, 1)) / 2.0
    rates = np.linalg.eigvalsh(chi)[:, ::-1].real
    rates[mask] = np.nan
    return rates


def check_cp_divisible(
    gen: SampledGenerator, rate_tolerance: float = RATE_TOLERANCE
) -> DivisibilityReport:
    """Divisibility via the sign of the canonical rates at every grid point."""
    rates = canonical_rates_on_grid(gen)
    return _report_from_traces(gen, rates, rate_tolerance)


def check_classical_divisible(
    gen: SampledGenerator, rate_tolerance: float = RATE_TOLERANCE
) -> DivisibilityReport:
    """Divisibility via the sign of the off-diagonal effective rates."""
    if gen.kind != "classical":
        raise ContractViolationError("classical divisibility needs a classical generator")
    n = gen.grid.n
    dim = gen.dim
    mask = ~np.eye(dim, dtype=bool)
    traces = np.asarray(gen.samples)[:, mask].real.copy()
    traces[gen.gap_mask()] = np.nan
    return _report_from_traces(gen, traces, rate_tolerance)


def _report_from_traces(gen, traces: np.ndarray, rate_tolerance: float) -> DivisibilityReport:
    n = traces.shape[0]
    valid = ~np.all(np.isnan(traces), axis=1)
    if not np.any(valid):
        raise GeneratorSingularityError("no usable grid points outside gaps")
    per_point = np.full(n, np.nan)
    per_point[valid] = np.nanmin(traces[valid], axis=1)
    min_rate = float(np.nanmin(per_point))
    violating = valid & (per_point < -rate_tolerance)
    first_violation = (
        float(gen.grid.points[np.argmax(violating)]) if np.any(violating) else None
    )
    return DivisibilityReport(
        divisible=not np.any(violating),
        min_rate=min_rate,
        first_violation_time=first_violation,
        rate_traces=traces,
        grid=gen.grid,
        kind=gen.kind,
        rate_tolerance=rate_tolerance,
        gaps=gen.gaps,
    )


def assemble_gksl(hamiltonian: np.ndarray, rates, jump_ops) -> np.ndarray:
    """Superoperator matrix of -i[H, .] + sum_k gamma_k D[L_k]."""
    g = linalg.commutator_superop(np.asarray(hamiltonian, dtype=complex))
    for rate, jump in zip(np.atleast_1d(rates), jump_ops):
        g = g + rate * linalg.dissipator_superop(np.asarray(jump, dtype=complex))
    return g
