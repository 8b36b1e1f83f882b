"""Density matrices, bipartite composition and seeded random ensembles.

States are plain complex ``numpy`` arrays. Functions that accept a state
validate it with :func:`as_density_matrix`; hot loops elsewhere in the
package work on raw arrays and skip validation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from decometry.errors import ValidationError

HERM_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
UNITARY_TOL = 1e-10
MAX_DIM = 64


class SpectralDecomposition(NamedTuple):
    """Eigenvalues sorted descending and matching eigenvectors as columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


class BlochVector(NamedTuple):
    x: float
    y: float
    z: float

    @property
    def r2(self) -> float:
        """Squared length of the transverse (x, y) component."""
        return self.x**2 + self.y**2


@dataclass(frozen=True)
class BipartiteState:
    """State of a system AB, stored A-major: index ``i * dB + j`` for ``|i>_A |j>_B``."""

    state: np.ndarray
    dims: tuple[int, int]

    def __post_init__(self):
        dA, dB = (int(d) for d in self.dims)
        if dA < 1 or dB < 1:
            raise ValidationError(f"subsystem dimensions must be positive, got {self.dims}")
        rho = as_density_matrix(self.state)
        if rho.shape[0] != dA * dB:
            raise ValidationError(
                f"dims {self.dims} do not match state dimension {rho.shape[0]}"
            )
        object.__setattr__(self, "state", rho)
        object.__setattr__(self, "dims", (dA, dB))

    @property
    def dim(self) -> int:
        return self.state.shape[0]


def as_density_matrix(rho, *, psd_tol: float = PSD_TOL) -> np.ndarray:
    """Validate ``rho`` as a density matrix and return it as a complex array.

    Raises:
        ValidationError: if ``rho`` is not square, not Hermitian, not unit
            trace, or has an eigenvalue below ``-psd_tol``.
    """
    if isinstance(rho, BipartiteState):
        return rho.state
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] == 0:
        raise ValidationError(f"density matrix must be square, got shape {rho.shape}")
    if rho.shape[0] > MAX_DIM:
        raise ValidationError(f"dimension {rho.shape[0]} exceeds the supported maximum {MAX_DIM}")
    if np.max(np.abs(rho - rho.conj().T)) > HERM_TOL:
        raise ValidationError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > TRACE_TOL:
        raise ValidationError(f"density matrix trace is {np.trace(rho).real!r}, expected 1")
    if np.linalg.eigvalsh(rho)[0] < -psd_tol:
        raise ValidationError("density matrix is not positive semidefinite")
    return rho


def is_unitary(u, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])) <= tol


def as_unitary(u, dim: int | None = None) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if not is_unitary(u):
        raise ValidationError("basis matrix is not unitary")
    if dim is not None and u.shape[0] != dim:
        raise ValidationError(f"unitary has dimension {u.shape[0]}, expected {dim}")
    return u


def spectral_decomposition(rho) -> SpectralDecomposition:
    """Eigendecomposition of a density matrix, eigenvalues sorted descending.

    Eigenvalues in ``[-1e-10, 0)`` are clamped to zero. Degenerate
    eigenspaces come back in whatever orthonormal basis LAPACK picks.
    """
    rho = as_density_matrix(rho)
    w, v = np.linalg.eigh(rho)
    w = np.where(w < 0, 0.0, w)
    return SpectralDecomposition(w[::-1].copy(), v[:, ::-1].copy())


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(a)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def fidelity(rho, sigma) -> float:
    """Root fidelity ``Tr sqrt(sqrt(rho) sigma sqrt(rho))``, in ``[0, 1]``.

    This is the square root of the Uhlmann-Jozsa fidelity.
    """
    rho = as_density_matrix(rho)
    sigma = as_density_matrix(sigma)
    if rho.shape != sigma.shape:
        raise ValidationError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    return _fidelity(rho, sigma)


def _fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    # nuclear norm of sqrt(rho) sqrt(sigma); avoids square roots of the
    # near-zero spectrum of sqrt(rho) sigma sqrt(rho) for low-rank inputs
    sv = np.linalg.svd(psd_sqrt(rho) @ psd_sqrt(sigma), compute_uv=False)
    return float(min(np.sum(sv), 1.0))


def tensor(rho_a, rho_b) -> BipartiteState:
    rho_a = as_density_matrix(rho_a)
    rho_b = as_density_matrix(rho_b)
    return BipartiteState(np.kron(rho_a, rho_b), (rho_a.shape[0], rho_b.shape[0]))


def partial_trace(rho_ab: BipartiteState, keep: str) -> np.ndarray:
    """Reduced state on subsystem ``keep`` (``"A"`` or ``"B"``)."""
    dA, dB = rho_ab.dims
    r = rho_ab.state.reshape(dA, dB, dA, dB)
    if keep == "A":
        return np.einsum("ijkj->ik", r)
    if keep == "B":
        return np.einsum("ijil->jl", r)
    raise ValidationError(f"keep must be 'A' or 'B', got {keep!r}")


def ket_to_dm(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def basis_state(d: int, i: int) -> np.ndarray:
    psi = np.zeros(d, dtype=complex)
    psi[i] = 1
    return ket_to_dm(psi)


def maximally_coherent(d: int, phases: Sequence[float] | None = None) -> np.ndarray:
    if phases is None:
        phases = np.zeros(d)
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (d,):
        raise ValidationError(f"need {d} phases, got {phases.shape}")
    return ket_to_dm(np.exp(1j * phases) / np.sqrt(d))


def maximally_entangled(d: int) -> BipartiteState:
    psi = np.eye(d, dtype=complex).ravel() / np.sqrt(d)
    return BipartiteState(ket_to_dm(psi), (d, d))


def cq_state(probs, basis_a, conditionals) -> BipartiteState:
    """Classical-quantum state ``sum_i p_i |a_i><a_i| (x) rho_{B|i}``.

    ``basis_a`` holds the local A basis vectors ``|a_i>`` as columns.
    """
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < 0) or abs(probs.sum() - 1) > TRACE_TOL:
        raise ValidationError("probabilities must be nonnegative and sum to 1")
    basis_a = as_unitary(basis_a, len(probs))
    if len(conditionals) != len(probs):
        raise ValidationError("need one conditional state per probability")
    conds = [as_density_matrix(c) for c in conditionals]
    dB = conds[0].shape[0]
    out = sum(
        p * np.kron(np.outer(basis_a[:, i], basis_a[:, i].conj()), c)
        for i, (p, c) in enumerate(zip(probs, conds))
    )
    return BipartiteState(out, (len(probs), dB))


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _ginibre(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_unitary(d: int, seed=None) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix with the phase fix."""
    rng = _rng(seed)
    q, r = np.linalg.qr(_ginibre(rng, (d, d)))
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def random_ket(d: int, seed=None) -> np.ndarray:
    v = _ginibre(_rng(seed), d)
    return v / np.linalg.norm(v)


def random_pure(d: int, seed=None) -> np.ndarray:
    return ket_to_dm(random_ket(d, seed))


def random_density(d: int, rank: int | None = None, seed=None) -> np.ndarray:
    """Random state ``G G^dag / Tr(G G^dag)`` with ``G`` a d x rank Ginibre matrix."""
    rank = d if rank is None else rank
    if not 1 <= rank <= d:
        raise ValidationError(f"rank must lie in [1, {d}], got {rank}")
    g = _ginibre(_rng(seed), (d, rank))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real


def random_bipartite(dA: int, dB: int, rank: int | None = None, seed=None) -> BipartiteState:
    return BipartiteState(random_density(dA * dB, rank, seed), (dA, dB))


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def bloch_from_qubit(rho) -> BlochVector:
    rho = as_density_matrix(rho)
    if rho.shape != (2, 2):
        raise ValidationError("Bloch representation needs a qubit state")
    off = rho[0, 1]
    return BlochVector(2 * off.real, -2 * off.imag, (rho[0, 0] - rho[1, 1]).real)


def qubit_from_bloch(v) -> np.ndarray:
    x, y, z = (float(c) for c in v)
    if x * x + y * y + z * z > 1 + 1e-12:
        raise ValidationError(f"Bloch vector {v} lies outside the unit ball")
    return 0.5 * np.array([[1 + z, x - 1j * y], [x + 1j * y, 1 - z]], dtype=complex)


def _matrix_to_json(m: np.ndarray) -> dict:
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def _matrix_from_json(obj) -> np.ndarray:
    try:
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed matrix entry: {exc}") from exc
    if re.shape != im.shape or re.ndim != 2:
        raise ValidationError("'re' and 'im' must be equally shaped 2-d arrays")
    return re + 1j * im


def state_to_json(rho) -> dict:
    if isinstance(rho, BipartiteState):
        out = {"dim": rho.dim, **_matrix_to_json(rho.state), "dims": list(rho.dims)}
        return out
    rho = np.asarray(rho, dtype=complex)
    return {"dim": rho.shape[0], **_matrix_to_json(rho)}


def state_from_json(obj):
    """Parse the ``{"dim", "re", "im"[, "dims"]}`` state format.

    Returns a :class:`BipartiteState` when ``dims`` is present, otherwise a
    validated density-matrix array.
    """
    if not isinstance(obj, dict) or "dim" not in obj:
        raise ValidationError("state file must be an object with 'dim', 're', 'im'")
    rho = _matrix_from_json(obj)
    if rho.shape != (obj["dim"], obj["dim"]):
        raise ValidationError(f"'dim' is {obj['dim']} but matrix has shape {rho.shape}")
    if "dims" in obj:
        return BipartiteState(rho, tuple(obj["dims"]))
    return as_density_matrix(rho)


def save_state(path, rho) -> None:
    Path(path).write_text(json.dumps(state_to_json(rho)))


def load_state(path):
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    return state_from_json(obj)


def load_unitary(path) -> np.ndarray:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    return as_unitary(_matrix_from_json(obj))
