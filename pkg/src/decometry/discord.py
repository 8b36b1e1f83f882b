"""Discord as the least Fisher information over local dephasing bases on A.

The minimization over the unitary group uses multi-start Nelder-Mead in the
exponential chart ``U = U_start exp(i H(theta))``. For a qubit A the dephasing
basis is fixed by a Bloch axis, so a brute-force grid over the half sphere
gives an independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from decometry.channels import (
    DephasingChannel,
    KrausChannel,
    commutes_with_local_dephasing,
    local_dephase,
)
from decometry.coherence import RANK_TOL, qfi_affine, qfi_dephasing
from decometry.errors import ValidationError
from decometry.qstate import BipartiteState, _rng, as_density_matrix, as_unitary, random_unitary

MAX_DIM_A = 8


@dataclass(frozen=True)
class OptimizerConfig:
    num_starts: int = 16
    max_iters: int = 2000
    f_tol: float = 1e-9
    seed: int | None = 0

    def __post_init__(self):
        if self.num_starts < 1:
            raise ValidationError("num_starts must be at least 1")


@dataclass(frozen=True)
class DiscordResult:
    """Outcome of the basis minimization.

    ``per_start_values`` lists the identity start first, then the random
    starts, then the grid oracle value when it was run. ``best_start``
    indexes into it.
    """

    value: float
    argmin_basis: np.ndarray
    starts: int
    converged: bool
    per_start_values: tuple[float, ...]
    best_start: int = 0
    diagnostics: dict[str, float] = field(default_factory=dict)


@lru_cache(maxsize=None)
def hermitian_basis(d: int) -> np.ndarray:
    """``d*d`` Hermitian generators: identity plus generalized Gell-Mann matrices.

    The off-diagonal (symmetric, antisymmetric) pairs come first.
    """
    mats = []
    for j in range(d):
        for k in range(j + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[j, k] = s[k, j] = 1 / np.sqrt(2)
            a = np.zeros((d, d), dtype=complex)
            a[j, k], a[k, j] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            mats += [s, a]
    for l in range(1, d):
        m = np.zeros((d, d), dtype=complex)
        m[np.arange(l), np.arange(l)] = 1
        m[l, l] = -l
        mats.append(m / np.sqrt(l * (l + 1)))
    mats.append(np.eye(d, dtype=complex) / np.sqrt(d))
    out = np.stack(mats)
    out.setflags(write=False)
    return out


def unitary_from_params(theta: np.ndarray, d: int) -> np.ndarray:
    """``exp(i sum_k theta_k G_k)`` over the first ``len(theta)`` generators."""
    theta = np.asarray(theta, dtype=float)
    h = (theta @ hermitian_basis(d)[: len(theta)].reshape(len(theta), d * d)).reshape(d, d)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * w)) @ v.conj().T


def _objective(rho: np.ndarray, dims: tuple[int, int], p: float, U: np.ndarray,
               rank_tol: float = RANK_TOL) -> float:
    """Single-basis objective; same value as ``_objective_batch`` on ``U[None]``."""
    dA, dB = dims
    n = dA * dB
    W = (U[:, None, :, None] * np.eye(dB)[None, :, None, :]).reshape(n, n)
    r = W.conj().T @ rho @ W
    off = r * _off_block_mask(dA, dB)  # r - Delta_A(r)
    return qfi_affine(r - p * off, -off, rank_tol)[0]


@lru_cache(maxsize=64)
def _off_block_mask(dA: int, dB: int) -> np.ndarray:
    mask = 1 - np.kron(np.eye(dA), np.ones((dB, dB)))
    mask.setflags(write=False)
    return mask


def _objective_batch(rho: np.ndarray, dims: tuple[int, int], p: float, Us: np.ndarray,
                     rank_tol: float = RANK_TOL) -> np.ndarray:
    dA, dB = dims
    n = dA * dB
    Ws = (Us[:, :, None, :, None] * np.eye(dB)[None, None, :, None, :]).reshape(len(Us), n, n)
    r = np.swapaxes(Ws.conj(), -1, -2) @ rho @ Ws
    delta = local_dephase(r, dims)
    values, _ = qfi_affine((1 - p) * r + p * delta, delta - r, rank_tol)
    return values


def local_dephasing_qfi(rho_ab: BipartiteState, p: float, U=None) -> float:
    """Fisher information of ``rho_ab`` under dephasing of A in the basis ``U`` (columns)."""
    dA = rho_ab.dims[0]
    U = np.eye(dA, dtype=complex) if U is None else as_unitary(U, dA)
    if not 0 <= p <= 1:
        raise ValidationError(f"dephasing strength must lie in [0, 1], got {p}")
    return _objective(rho_ab.state, rho_ab.dims, p, U)


def qubit_axis_basis(theta, phi) -> np.ndarray:
    """Eigenbases of ``n . sigma`` for axes ``n(theta, phi)``, as a stack of unitaries."""
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    e = np.exp(1j * phi)
    U = np.empty(theta.shape + (2, 2), dtype=complex)
    U[..., 0, 0], U[..., 1, 0] = c, e * s
    U[..., 0, 1], U[..., 1, 1] = -s / e, c
    return U


def _axis(theta: float, phi: float) -> np.ndarray:
    return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


def qubit_axis_landscape(rho_ab: BipartiteState, p: float, n_theta: int = 61,
                         n_phi: int = 121):
    """Objective on the half-sphere grid ``theta in [0, pi/2]``, ``phi in [0, 2 pi)``.

    Returns:
        ``(thetas, phis, values)`` with ``values`` of shape ``(n_theta, n_phi)``.
    """
    if rho_ab.dims[0] != 2:
        raise ValidationError("the grid oracle needs a qubit on side A")
    thetas = np.linspace(0, np.pi / 2, n_theta)
    phis = np.linspace(0, 2 * np.pi, n_phi, endpoint=False)
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    Us = qubit_axis_basis(tt.ravel(), pp.ravel())
    values = _objective_batch(rho_ab.state, rho_ab.dims, p, Us)
    return thetas, phis, values.reshape(n_theta, n_phi)


def discord_qubitA_grid(rho_ab: BipartiteState, p: float, n_theta: int = 61,
                        n_phi: int = 121, rounds: int = 12):
    """Brute-force discord for a qubit A: grid minimum plus local bisection.

    Each refinement round halves the grid spacing and scans a 5 x 5 stencil
    around the incumbent.

    Returns:
        ``(value, axis)`` where ``axis`` is the unit Bloch vector of the
        optimal dephasing basis.
    """
    _check_p(p)
    thetas, phis, values = qubit_axis_landscape(rho_ab, p, n_theta, n_phi)
    i, j = np.unravel_index(np.argmin(values), values.shape)
    best = values[i, j]
    th, ph = thetas[i], phis[j]
    h_th = thetas[1] - thetas[0] if n_theta > 1 else np.pi / 2
    h_ph = phis[1] - phis[0] if n_phi > 1 else 2 * np.pi
    offsets = np.arange(-2, 3)
    for _ in range(rounds):
        h_th, h_ph = h_th / 2, h_ph / 2
        tt, pp = np.meshgrid(th + offsets * h_th, ph + offsets * h_ph, indexing="ij")
        vals = _objective_batch(rho_ab.state, rho_ab.dims, p,
                                qubit_axis_basis(tt.ravel(), pp.ravel()))
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, th, ph = vals[k], tt.ravel()[k], pp.ravel()[k]
    return float(best), _axis(th, ph)


def _check_p(p: float) -> None:
    if p == 0:
        raise ValidationError("p=0 unsupported: discord is only defined here for p in (0, 1]")
    if not 0 < p <= 1:
        raise ValidationError(f"dephasing strength must lie in (0, 1], got {p}")


def _local_search(f, d: int, U0: np.ndarray, cfg: OptimizerConfig):
    """Nelder-Mead in the chart around ``U0``, re-started with a smaller simplex until stalled.

    Only the ``d*d - d`` off-diagonal generators are searched: diagonal ones
    rephase the basis vectors and leave the dephasing channel unchanged.
    """
    n = d * d - d
    x0 = np.zeros(n)
    fun = lambda x: f(U0 @ unitary_from_params(x, d))
    best_x, best_f, ok, evals = x0, fun(x0), False, 0
    for step in (0.4, 0.04):
        simplex = np.vstack([best_x, best_x + step * np.eye(n)])
        res = minimize(fun, best_x, method="Nelder-Mead", options={
            "maxiter": cfg.max_iters, "maxfev": 2 * cfg.max_iters,
            "fatol": cfg.f_tol, "xatol": 1e-6, "initial_simplex": simplex,
        })
        evals += res.nfev
        improved = best_f - res.fun
        if res.fun <= best_f:
            best_x, best_f = res.x, res.fun
        ok = bool(res.success)
        if improved <= cfg.f_tol:
            break
    return U0 @ unitary_from_params(best_x, d), float(best_f), ok, evals


def discord(rho_ab: BipartiteState, p: float, cfg: OptimizerConfig | None = None,
            use_grid: bool = True) -> DiscordResult:
    """Minimum over A-side dephasing bases of the local-dephasing Fisher information.

    Runs the local search from the computational basis and from
    ``cfg.num_starts`` Haar-random bases. For a qubit A the grid oracle is
    also run (unless ``use_grid`` is false) and the smaller value wins. The
    result is an upper bound on the true minimum.
    """
    cfg = cfg or OptimizerConfig()
    _check_p(p)
    dA, dB = rho_ab.dims
    if dA > MAX_DIM_A:
        raise ValidationError(f"dA = {dA} exceeds the supported maximum {MAX_DIM_A}")
    rho = rho_ab.state

    def f(U):
        return _objective(rho, rho_ab.dims, p, U)

    rng = _rng(cfg.seed)
    starts = [np.eye(dA, dtype=complex)] + [random_unitary(dA, rng) for _ in range(cfg.num_starts)]
    results = [_local_search(f, dA, U0, cfg) for U0 in starts]
    values = [r[1] for r in results]
    k = int(np.argmin(values))
    basis, converged = results[k][0], results[k][2]
    diagnostics = {"evaluations": float(sum(r[3] for r in results))}
    if use_grid and dA == 2:
        g, axis = discord_qubitA_grid(rho_ab, p)
        values.append(g)
        diagnostics["grid_value"] = g
        if g < values[k]:
            k = len(values) - 1
            basis = qubit_axis_basis(*_angles(axis))
            converged = True
    value = values[k]
    if math.isinf(value):
        converged = False
    return DiscordResult(float(value), basis, len(starts), converged, tuple(values), k, diagnostics)


def _angles(axis: np.ndarray) -> tuple[float, float]:
    x, y, z = axis
    return float(np.arccos(np.clip(z, -1, 1))), float(np.arctan2(y, x))


@dataclass(frozen=True)
class ConversionResult:
    c_in: float
    d_out: float

    @property
    def slack(self) -> float:
        return self.c_in - self.d_out


def conversion_check(rho_a, sigma_b, e: KrausChannel, p: float,
                     cfg: OptimizerConfig | None = None) -> ConversionResult:
    """Coherence of ``rho_a`` against the discord of ``e(rho_a (x) sigma_b)``.

    ``sigma_b`` must be diagonal and ``e`` must commute with dephasing of A.
    The slack ``c_in - d_out`` is nonnegative for such inputs.
    """
    rho_a = as_density_matrix(rho_a)
    sigma_b = as_density_matrix(sigma_b)
    if np.max(np.abs(sigma_b - np.diag(np.diag(sigma_b)))) > 1e-12:
        raise ValidationError("sigma_B must be incoherent (diagonal)")
    dims = (rho_a.shape[0], sigma_b.shape[0])
    if not commutes_with_local_dephasing(e, dims):
        raise ValidationError("channel does not commute with dephasing on A")
    c_in = qfi_dephasing(rho_a, DephasingChannel(p)).value
    out = e(np.kron(rho_a, sigma_b))
    d_out = discord(BipartiteState((out + out.conj().T) / 2, dims), p, cfg).value
    return ConversionResult(c_in, d_out)
