"""Dense operator algebra and Lindblad steady states.

Density matrices are vectorized column-wise, ``vec(X)[i + d*j] = X[i, j]``,
so that ``vec(A X B) = (B^T kron A) vec(X)``.  Every superoperator helper
accepts stacked operators of shape ``(..., d, d)``; the scalar API is a
batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateSteadyState, DimensionMismatch, InvalidParameter, NumericalFailure

TRACE_TOL = 1e-12
HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
RESIDUAL_TOL = 1e-10
DEGENERACY_TOL = 1e-9

# status codes of a batched steady-state solve
OK = 0
DEGENERATE = 1
FAILED = 2


def dag(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def as_operator(m, name: str = "operator") -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
        raise DimensionMismatch(f"{name} must be a square matrix of dim >= 2, got shape {a.shape}")
    return a


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    return bool(np.max(np.abs(m - dag(m)), initial=0.0) <= tol)


def is_psd(m: np.ndarray, tol: float = PSD_TOL) -> bool:
    """True when the Hermitian part of ``m`` has no eigenvalue below ``-tol``."""
    m = np.asarray(m, dtype=complex)
    return bool(np.linalg.eigvalsh(0.5 * (m + dag(m))).min() >= -tol)


def vec(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    return np.swapaxes(m, -1, -2).reshape(*m.shape[:-2], -1)


def unvec(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    d = int(round(np.sqrt(v.shape[-1])))
    return np.swapaxes(v.reshape(*v.shape[:-1], d, d), -1, -2)


def _kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    da, db = a.shape[-1], b.shape[-1]
    out = np.einsum("...pr,...qs->...pqrs", a, b)
    return out.reshape(*out.shape[:-4], da * db, da * db)


@lru_cache(maxsize=None)
def _commutator_map(d: int) -> np.ndarray:
    # row (a*d + b) holds the superoperator of -i[E_ab, .] flattened
    eye = np.eye(d)
    out = np.empty((d * d, d**4), dtype=complex)
    for a in range(d):
        for b in range(d):
            e = np.zeros((d, d))
            e[a, b] = 1.0
            out[a * d + b] = (-1j * (np.kron(eye, e) - np.kron(e.T, eye))).ravel()
    return out


def commutator_superop(h: np.ndarray) -> np.ndarray:
    """Superoperator of ``rho -> -i[H, rho]``."""
    h = np.asarray(h, dtype=complex)
    d = h.shape[-1]
    flat = h.reshape(-1, d * d) @ _commutator_map(d)
    return flat.reshape(*h.shape[:-2], d * d, d * d)


def dissipator_superop(x: np.ndarray) -> np.ndarray:
    """Superoperator of ``rho -> X rho X^+ - {X^+ X, rho}/2``."""
    x = np.asarray(x, dtype=complex)
    eye = np.eye(x.shape[-1])
    xx = dag(x) @ x
    return _kron(np.conj(x), x) - 0.5 * _kron(eye, xx) - 0.5 * _kron(np.swapaxes(xx, -1, -2), eye)


def dissipator_apply(x, rho) -> np.ndarray:
    """Apply the dissipator D[X] to ``rho`` directly in operator form."""
    x = as_operator(x, "X")
    rho = as_operator(rho, "rho")
    if x.shape != rho.shape:
        raise DimensionMismatch(f"X has shape {x.shape} but rho has shape {rho.shape}")
    xd = dag(x)
    xx = xd @ x
    return x @ rho @ xd - 0.5 * (xx @ rho + rho @ xx)


def expectation(obs, rho) -> complex:
    o = as_operator(obs, "observable")
    r = as_operator(rho.matrix if isinstance(rho, DensityMatrix) else rho, "rho")
    if o.shape != r.shape:
        raise DimensionMismatch(f"observable has shape {o.shape} but rho has shape {r.shape}")
    return complex(np.trace(o @ r))


@dataclass(frozen=True)
class Liouvillian:
    """Generator acting on column-vectorized density matrices."""

    matrix: np.ndarray
    dim: int

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho))

    def trace_residual(self) -> float:
        """Largest entry of ``vec(1)^T L``; zero for a trace-preserving generator."""
        return float(np.max(np.abs(vec(np.eye(self.dim)) @ self.matrix)))


def liouvillian_stack(h: np.ndarray, operators: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Batched Liouvillians.

    Parameters
    ----------
    h : (N, d, d) Hamiltonians
    operators : (K, d, d) jump operators shared by the batch
    rates : (N, K) nonnegative rates
    """
    h = np.asarray(h, dtype=complex)
    ops = np.asarray(operators, dtype=complex)
    rates = np.asarray(rates, dtype=float)
    out = commutator_superop(h)
    if ops.shape[0]:
        d2 = out.shape[-1]
        diss = rates @ dissipator_superop(ops).reshape(ops.shape[0], d2 * d2)
        out = out + diss.reshape(-1, d2, d2)
    return out


def build_liouvillian(h, channels: Iterable[tuple[float, np.ndarray]]) -> Liouvillian:
    """Liouvillian of ``-i[H, rho] + sum_k rate_k D[X_k] rho``."""
    h = as_operator(h, "H")
    rates, ops = [], []
    for rate, op in channels:
        op = as_operator(op, "jump operator")
        if op.shape != h.shape:
            raise DimensionMismatch(f"jump operator has shape {op.shape}, H has shape {h.shape}")
        if not rate >= 0:
            raise InvalidParameter(f"rates must be nonnegative, got {rate}")
        rates.append(float(rate))
        ops.append(op)
    d = h.shape[0]
    ops_arr = np.array(ops, dtype=complex).reshape(len(ops), d, d)
    mat = liouvillian_stack(h[None], ops_arr, np.array(rates, dtype=float).reshape(1, -1))[0]
    return Liouvillian(mat, d)


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray
    residual: float = field(default=0.0, compare=False)

    def __post_init__(self):
        problems = density_violations(self.matrix)
        if problems:
            raise InvalidParameter("not a density matrix: " + "; ".join(problems))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace_error(self) -> float:
        return float(abs(np.trace(self.matrix) - 1.0))

    @property
    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - dag(self.matrix))))

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix).min())

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()

    def diagnostics(self) -> dict:
        return {
            "trace_error": self.trace_error,
            "hermiticity_error": self.hermiticity_error,
            "min_eigenvalue": self.min_eigenvalue,
            "residual": self.residual,
        }


def density_violations(m: np.ndarray) -> list[str]:
    m = as_operator(m, "rho")
    out = []
    if abs(np.trace(m) - 1.0) > TRACE_TOL:
        out.append(f"trace deviates from 1 by {abs(np.trace(m) - 1.0):.3g}")
    herm = float(np.max(np.abs(m - dag(m))))
    if herm > HERMITIAN_TOL:
        out.append(f"hermiticity deviation {herm:.3g}")
    else:
        lo = float(np.linalg.eigvalsh(m).min())
        if lo < -PSD_TOL:
            out.append(f"negative eigenvalue {lo:.3g}")
    return out


@dataclass
class SteadyStateBatch:
    """Result of :func:`solve_steady_states`.

    ``status`` holds ``OK``, ``DEGENERATE`` or ``FAILED`` per sample; ``rho`` is
    NaN wherever status is not ``OK``.
    """

    rho: np.ndarray
    status: np.ndarray
    residual: np.ndarray


def _blocks(pattern: np.ndarray) -> list[np.ndarray]:
    n, labels = connected_components(pattern | pattern.T, directed=False)
    return [np.flatnonzero(labels == c) for c in range(n)]


def _block_singular_values(subs: list[np.ndarray]):
    """Singular values of each block plus the smallest one per block.

    Eigenvalues of ``M^+ M`` are accurate to about ``1e-15 |M|^2``, so any
    eigenvalue above ``1e-12 |M|^2`` certifies a singular value far above the
    degeneracy threshold; only the remaining samples get a full SVD.
    """
    n = subs[0].shape[0]
    lam = [
        np.abs(m[:, :, 0]) ** 2 if m.shape[-1] == 1 else np.clip(np.linalg.eigvalsh(dag(m) @ m), 0.0, None)
        for m in subs
    ]
    lam_all = np.sort(np.concatenate(lam, axis=1), axis=1)
    unsure = lam_all[:, 1] <= 1e-12 * lam_all[:, -1]
    svals = [np.sqrt(v) for v in lam]
    if np.any(unsure):
        for k, m in enumerate(subs):
            svals[k][unsure] = np.linalg.svd(m[unsure], compute_uv=False)
    block_min = np.stack([v.min(axis=1) for v in svals], axis=1) if n else np.empty((0, len(subs)))
    return svals, block_min


def solve_steady_states(lstack: np.ndarray) -> SteadyStateBatch:
    """Unique stationary states of a stack of Liouvillians, shape (N, d^2, d^2).

    The shared sparsity pattern splits each generator into decoupled blocks
    (symmetry sectors). Singular values are collected block by block and a
    sample is degenerate when its two smallest ones are both below
    ``DEGENERACY_TOL`` times the largest. The stationary block is solved by LU
    after swapping one of its population rows (the one of smallest
    infinity-norm) for the trace constraint.
    """
    lstack = np.asarray(lstack, dtype=complex)
    if lstack.ndim == 2:
        lstack = lstack[None]
    n, d2, _ = lstack.shape
    d = int(round(np.sqrt(d2)))
    trace_row = vec(np.eye(d)).astype(complex)

    blocks = _blocks(np.any(lstack != 0, axis=0))
    subs = [lstack[:, idx][:, :, idx] for idx in blocks]
    svals, block_min = _block_singular_values(subs)
    s_all = np.sort(np.concatenate(svals, axis=1), axis=1)
    scale = s_all[:, -1]
    degenerate = s_all[:, 1] < DEGENERACY_TOL * scale
    if d2 == 1:
        degenerate[:] = False

    status = np.where(degenerate, DEGENERATE, OK)
    vecs = np.full((n, d2), np.nan, dtype=complex)
    null_block = np.argmin(block_min, axis=1)
    for b, idx in enumerate(blocks):
        sel = np.flatnonzero((null_block == b) & ~degenerate)
        if sel.size == 0:
            continue
        t = trace_row[idx]
        if not np.any(t != 0):
            status[sel] = FAILED
            continue
        sub = subs[b][sel]
        # only rows carrying weight in the trace functional (the left null
        # vector) are linearly dependent on the rest and may be swapped out
        norms = np.where(t != 0, np.max(np.abs(sub), axis=2), np.inf)
        row = np.argmin(norms, axis=1)
        sub[np.arange(sel.size), row, :] = t
        rhs = np.zeros((sel.size, idx.size, 1), dtype=complex)
        rhs[np.arange(sel.size), row, 0] = 1.0
        try:
            x = np.linalg.solve(sub, rhs)[..., 0]
        except np.linalg.LinAlgError:
            x = np.full((sel.size, idx.size), np.nan, dtype=complex)
            for i in range(sel.size):
                try:
                    x[i] = np.linalg.solve(sub[i], rhs[i])[:, 0]
                except np.linalg.LinAlgError:
                    pass
        full = np.zeros((sel.size, d2), dtype=complex)
        full[:, idx] = x
        vecs[sel] = full

    residual = np.max(np.abs(lstack @ vecs[..., None]), axis=(1, 2))
    lscale = np.maximum(1.0, scale)
    bad = (status == OK) & ~(residual < RESIDUAL_TOL * lscale)

    rho = unvec(vecs)
    rho = 0.5 * (rho + dag(rho))
    tr = np.real(np.trace(rho, axis1=1, axis2=2))
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = rho / tr[:, None, None]
    ok = (status == OK) & ~bad
    if np.any(ok):
        lo = np.full(n, -np.inf)
        lo[ok] = np.linalg.eigvalsh(rho[ok]).min(axis=1)
        bad |= ok & (lo < -PSD_TOL)
    status[bad] = FAILED
    rho[status != OK] = np.nan
    return SteadyStateBatch(rho=rho, status=status, residual=residual)


def steady_state(lv: Liouvillian) -> DensityMatrix:
    """Unique stationary state of ``lv``.

    Raises
    ------
    DegenerateSteadyState
        if the null space of the generator has dimension above one.
    NumericalFailure
        if the solution misses the residual or positivity checks.
    """
    res = solve_steady_states(lv.matrix[None])
    st = int(res.status[0])
    if st == DEGENERATE:
        raise DegenerateSteadyState("Liouvillian null space has dimension > 1")
    if st != OK:
        raise NumericalFailure(f"steady-state solve failed (residual {res.residual[0]:.3g})")
    return DensityMatrix(res.rho[0], residual=float(res.residual[0]))


def basis_projector(dim: int, i: int) -> np.ndarray:
    p = np.zeros((dim, dim), dtype=complex)
    p[i, i] = 1.0
    return p

