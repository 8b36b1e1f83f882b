"""Coherence as quantum Fisher information of a state under dephasing.

``C_p(rho)`` is the QFI of the family ``p -> (1 - p) rho + p Delta(rho)``
evaluated at ``p``. Because the family is affine in ``p``, its derivative is
the constant ``Delta(rho) - rho`` and the QFI reduces to the spectral sum

    2 * sum_{ij} |<psi_i| (Delta(rho) - rho) |psi_j>|^2 / (lam_i + lam_j)

over the eigenpairs of the dephased state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from decometry.channels import DephasingChannel, dephase
from decometry.errors import DivergenceError, ValidationError
from decometry.qstate import BlochVector, _fidelity, as_density_matrix, as_unitary

RANK_TOL = 1e-10


@dataclass(frozen=True)
class MeasureResult:
    """A nonnegative measure value, ``inf`` on divergence.

    ``dropped_terms`` counts the eigenpair index pairs ``(i, j)`` excluded
    because ``lam_i + lam_j`` fell under the rank cutoff.
    """

    value: float
    dropped_terms: int = 0
    diagnostics: dict[str, float] = field(default_factory=dict)

    @property
    def divergent(self) -> bool:
        return math.isinf(self.value)

    def __float__(self) -> float:
        return float(self.value)


def qfi_affine(rho_p: np.ndarray, drho: np.ndarray, rank_tol: float = RANK_TOL):
    """QFI of a family with state ``rho_p`` and derivative ``drho``.

    Works on stacks of matrices (leading batch axes). Pairs with
    ``lam_i + lam_j <= rank_tol`` are left out of the sum; if any of them
    carries a squared matrix element above ``rank_tol`` the family changes
    rank at this point and the result is ``inf``.

    Returns:
        ``(values, dropped)`` arrays with the batch shape, or a
        ``(float, int)`` pair for a single matrix.
    """
    lam, vecs = np.linalg.eigh(rho_p)
    np.clip(lam, 0, None, out=lam)
    if lam.ndim == 1:
        return _qfi_single(lam, vecs, drho, rank_tol)
    d = np.swapaxes(vecs.conj(), -1, -2) @ drho @ vecs
    num = d.real**2 + d.imag**2
    den = lam[..., :, None] + lam[..., None, :]
    drop = den <= rank_tol
    den[drop] = np.inf
    values = 2 * (num / den).sum(axis=(-1, -2))
    if drop.any():
        diverges = (drop & (num > rank_tol)).any(axis=(-1, -2))
        values = np.where(diverges, np.inf, values)
    dropped = np.count_nonzero(drop, axis=(-1, -2))
    return values, dropped


def _qfi_single(lam, vecs, drho, rank_tol):
    # unbatched path; the optimizer calls this thousands of times
    d = vecs.conj().T @ drho @ vecs
    num = d.real**2 + d.imag**2
    den = lam[:, None] + lam[None, :]
    keep = den > rank_tol
    if keep.all():
        return float((num / den).sum()) * 2, 0
    dropped = int(keep.size - np.count_nonzero(keep))
    if (num[~keep] > rank_tol).any():
        return math.inf, dropped
    return float((num[keep] / den[keep]).sum()) * 2, dropped


def qfi_dephasing(rho, ch: DephasingChannel, rank_tol: float = RANK_TOL) -> MeasureResult:
    """Fisher information of ``rho`` under the dephasing channel ``ch`` at strength ``ch.p``.

    Examples:
        >>> from decometry.qstate import maximally_coherent
        >>> round(qfi_dephasing(maximally_coherent(2), DephasingChannel(0.5)).value, 12)
        1.333333333333
    """
    rho = as_density_matrix(rho)
    d = rho.shape[0]
    if ch.basis is not None:
        U = ch.unitary(d)
        rho = U.conj().T @ rho @ U
    delta = dephase(rho)
    drho = delta - rho
    rho_p = (1 - ch.p) * rho + ch.p * delta
    value, dropped = qfi_affine(rho_p, drho, rank_tol)
    return MeasureResult(
        float(value),
        int(dropped),
        {"p": float(ch.p), "min_eigenvalue": float(np.linalg.eigvalsh(rho_p)[0])},
    )


def coherence(rho, p: float, basis=None) -> float:
    """Shorthand for ``qfi_dephasing(rho, DephasingChannel(p, basis)).value``."""
    return qfi_dephasing(rho, DephasingChannel(p, basis)).value


def coherence_qubit_closed_form(v: BlochVector, p: float) -> float:
    """Qubit coherence from the Bloch vector ``(x, y, z)``.

    ``(x^2 + y^2) / (1 - (1 - p)^2 (x^2 + y^2) / (1 - z^2))``, with 0 for
    states on the z axis and ``inf`` when the denominator vanishes.
    """
    x, y, z = v
    r2 = x * x + y * y
    if r2 == 0:
        return 0.0
    den = 1 - (1 - p) ** 2 * r2 / (1 - z * z)
    if den <= 1e-14:
        return math.inf
    return r2 / den


def max_coherence(d: int, p: float) -> float:
    """Largest coherence attainable in dimension ``d``, reached by maximally coherent states."""
    if p == 0:
        return math.inf
    return (d - 1) / (p * (d - (d - 1) * p))


def _support_projector(rho: np.ndarray, tol: float) -> tuple[np.ndarray, int]:
    w, v = np.linalg.eigh(rho)
    cols = v[:, w > tol]
    return cols @ cols.conj().T, cols.shape[1]


def c0_is_finite(rho, U=None, tol: float = 1e-8) -> bool:
    """Whether the coherence at ``p = 0`` is finite, i.e. ``supp Delta(rho) == supp rho``.

    Since ``supp Delta(rho)`` always contains ``supp rho``, the supports
    agree iff the ranks agree and ``Delta(rho)`` has no weight outside the
    support of ``rho``.
    """
    rho = as_density_matrix(rho)
    if U is not None:
        U = as_unitary(U, rho.shape[0])
    delta = dephase(rho, U)
    proj, rank = _support_projector(rho, tol)
    _, rank_delta = _support_projector(delta, tol)
    q = np.eye(rho.shape[0]) - proj
    outside = np.linalg.norm(q @ delta @ q, 2)
    return rank == rank_delta and outside <= tol


def qfi_fd_oracle(rho, ch: DephasingChannel, eps: float = 1e-4) -> float:
    """Finite-difference QFI from the root fidelity between nearby dephased states.

    Uses ``8 (1 - F(rho_a, rho_b)) / eps^2`` with ``b - a = eps``, centred on
    ``p`` when the step fits inside ``[0, 1]`` and one-sided otherwise.

    Raises:
        DivergenceError: if the spectral QFI diverges at ``ch.p``.
    """
    rho = as_density_matrix(rho)
    if qfi_dephasing(rho, ch).divergent:
        raise DivergenceError(f"Fisher information diverges at p={ch.p}")
    p = ch.p
    if eps <= 0 or eps > 1:
        raise ValidationError(f"step must lie in (0, 1], got {eps}")
    if p - eps / 2 >= 0 and p + eps / 2 <= 1:
        a, b = p - eps / 2, p + eps / 2
    elif p + eps <= 1:
        a, b = p, p + eps
    else:
        a, b = p - eps, p
    d = rho.shape[0]
    U = ch.unitary(d)
    r = U.conj().T @ rho @ U
    delta = dephase(r)
    rho_a = (1 - a) * r + a * delta
    rho_b = (1 - b) * r + b * delta
    return 8 * (1 - _fidelity(rho_a, rho_b)) / eps**2


def p_from_time(t: float, T2: float) -> float:
    """Dephasing strength after time ``t`` for transverse relaxation time ``T2``."""
    if t < 0 or T2 <= 0:
        raise ValidationError("need t >= 0 and T2 > 0")
    return -math.expm1(-t / T2)


def crb_bound(F: float, mu: int) -> float:
    """Cramer-Rao lower bound ``1 / (mu F)`` on the variance of an unbiased estimator."""
    if mu < 1:
        raise ValidationError("mu must be a positive integer")
    if F <= 0:
        raise ValidationError("Fisher information must be positive")
    return 1 / (mu * F)
