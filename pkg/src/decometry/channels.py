"""Kraus-operator channels: dephasing, strictly incoherent operations and ECPOs."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Union

import numpy as np

from decometry.errors import ValidationError
from decometry.qstate import (
    MAX_DIM,
    PSD_TOL,
    BipartiteState,
    _ginibre,
    _matrix_from_json,
    _matrix_to_json,
    _rng,
    as_density_matrix,
    as_unitary,
    random_ket,
    random_unitary,
)

TP_TOL = 1e-10
BRANCH_TOL = 1e-14


@dataclass(frozen=True)
class KrausChannel:
    kraus: tuple[np.ndarray, ...]

    def __post_init__(self):
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ks:
            raise ValidationError("a channel needs at least one Kraus operator")
        shape = ks[0].shape
        if len(shape) != 2 or any(k.shape != shape for k in ks):
            raise ValidationError("Kraus operators must be equally shaped matrices")
        object.__setattr__(self, "kraus", ks)

    @property
    def dim_in(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def dim_out(self) -> int:
        return self.kraus[0].shape[0]

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.kraus)


@dataclass(frozen=True)
class DephasingChannel:
    """``rho -> (1 - p) rho + p Delta_U(rho)``, dephasing in the columns of ``basis``."""

    p: float
    basis: np.ndarray | None = None

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValidationError(f"dephasing strength must lie in [0, 1], got {self.p}")
        if self.basis is not None:
            object.__setattr__(self, "basis", as_unitary(self.basis))

    def unitary(self, d: int) -> np.ndarray:
        if self.basis is None:
            return np.eye(d, dtype=complex)
        if self.basis.shape[0] != d:
            raise ValidationError(f"basis has dimension {self.basis.shape[0]}, state has {d}")
        return self.basis


@dataclass(frozen=True)
class SIOSpec:
    """Strictly incoherent operation ``K_k = sum_i c[k, i] |f_k(i)><i|``."""

    perms: tuple[tuple[int, ...], ...]
    coeffs: np.ndarray

    def __post_init__(self):
        perms = tuple(tuple(int(x) for x in f) for f in self.perms)
        coeffs = np.asarray(self.coeffs, dtype=complex)
        d = len(perms[0]) if perms else 0
        if coeffs.shape != (len(perms), d):
            raise ValidationError(f"coeffs must have shape {(len(perms), d)}, got {coeffs.shape}")
        for f in perms:
            if sorted(f) != list(range(d)):
                raise ValidationError(f"{f} is not a permutation of range({d})")
        if np.max(np.abs(np.sum(np.abs(coeffs) ** 2, axis=0) - 1)) > TP_TOL:
            raise ValidationError("SIO coefficient columns are not normalized")
        object.__setattr__(self, "perms", perms)
        object.__setattr__(self, "coeffs", coeffs)


@dataclass(frozen=True)
class Semiclassical:
    """``rho -> sum_i Tr(M_i rho) |b_i><b_i|`` with ``b_i`` the columns of ``out_basis``."""

    povm: tuple[np.ndarray, ...]
    out_basis: np.ndarray | None = None


@dataclass(frozen=True)
class Isotropic:
    """``rho -> t U rho U^dag + (1 - t) I / d`` with ``t`` in ``[0, 1]``."""

    t: float
    U: np.ndarray | None = None


EcpoSpec = Union[Semiclassical, Isotropic]


def dephase(rho: np.ndarray, U=None) -> np.ndarray:
    """Full dephasing in the basis given by the columns of ``U`` (default: computational)."""
    rho = np.asarray(rho, dtype=complex)
    if U is None:
        return np.diag(np.diag(rho))
    U = np.asarray(U)
    r = U.conj().T @ rho @ U
    return (U * np.diag(r)) @ U.conj().T


def apply_dephasing(rho, ch: DephasingChannel) -> np.ndarray:
    rho = as_density_matrix(rho)
    U = None if ch.basis is None else ch.unitary(rho.shape[0])
    return (1 - ch.p) * rho + ch.p * dephase(rho, U)


@lru_cache(maxsize=64)
def _local_dephasing_mask(dA: int, dB: int) -> np.ndarray:
    mask = np.kron(np.eye(dA), np.ones((dB, dB)))
    mask.setflags(write=False)
    return mask


def local_dephase(rho: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    """Dephasing of subsystem A in its computational basis, identity on B."""
    return rho * _local_dephasing_mask(*dims)


def _check_channel_input(ch: KrausChannel, rho: np.ndarray) -> None:
    if rho.shape[0] != ch.dim_in:
        raise ValidationError(f"channel expects dimension {ch.dim_in}, state has {rho.shape[0]}")


def apply_kraus(rho, ch: KrausChannel) -> np.ndarray:
    rho = as_density_matrix(rho)
    _check_channel_input(ch, rho)
    return ch(rho)


def local_channel(ch: KrausChannel, dims: tuple[int, int], side: str) -> KrausChannel:
    """Extend ``ch`` by the identity on the other subsystem."""
    dA, dB = dims
    if side == "A":
        return KrausChannel(tuple(np.kron(k, np.eye(dB)) for k in ch.kraus))
    if side == "B":
        return KrausChannel(tuple(np.kron(np.eye(dA), k) for k in ch.kraus))
    raise ValidationError(f"side must be 'A' or 'B', got {side!r}")


def apply_local(rho_ab: BipartiteState, ch: KrausChannel, side: str) -> BipartiteState:
    dA, dB = rho_ab.dims
    expected = dA if side == "A" else dB
    if ch.dim_in != expected:
        raise ValidationError(f"channel acts on dimension {ch.dim_in}, subsystem {side} has {expected}")
    full = local_channel(ch, rho_ab.dims, side)
    dims = (ch.dim_out, dB) if side == "A" else (dA, ch.dim_out)
    out = full(rho_ab.state)
    return BipartiteState((out + out.conj().T) / 2, dims)


def measure_ensemble(rho, ch: KrausChannel) -> list[tuple[float, np.ndarray]]:
    """Selective measurement: one ``(p_k, sigma_k)`` pair per Kraus operator.

    Branches with probability below 1e-14 are dropped.
    """
    rho = as_density_matrix(rho)
    _check_channel_input(ch, rho)
    out = []
    for k in ch.kraus:
        s = k @ rho @ k.conj().T
        pk = np.trace(s).real
        if pk > BRANCH_TOL:
            s = s / pk
            out.append((float(pk), (s + s.conj().T) / 2))
    return out


def sio_to_kraus(s: SIOSpec) -> KrausChannel:
    d = s.coeffs.shape[1]
    ks = []
    for f, c in zip(s.perms, s.coeffs):
        k = np.zeros((d, d), dtype=complex)
        k[list(f), range(d)] = c
        ks.append(k)
    return KrausChannel(tuple(ks))


def random_sio(d: int, num_kraus: int | None = None, seed=None) -> SIOSpec:
    """Random SIO with uniformly drawn permutations and Haar coefficient columns."""
    rng = _rng(seed)
    n = d if num_kraus is None else num_kraus
    perms = tuple(tuple(rng.permutation(d)) for _ in range(n))
    coeffs = np.stack([random_ket(n, rng) for _ in range(d)], axis=1)
    return SIOSpec(perms, coeffs)


def controlled_permutation_channel(a_perms, b_perms, coeffs) -> KrausChannel:
    """Bipartite SIO ``K_k = sum_ij c[k, ij] |a_k(i), b_{k,i}(j)><ij|``.

    Args:
        a_perms: ``a_perms[k]`` permutes the A labels.
        b_perms: ``b_perms[k][i]`` permutes the B labels, controlled on A label ``i``.
        coeffs: array of shape ``(num_kraus, dA * dB)`` whose columns are unit vectors.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    n = len(a_perms)
    dA = len(a_perms[0])
    dB = len(b_perms[0][0])
    if coeffs.shape != (n, dA * dB):
        raise ValidationError(f"coeffs must have shape {(n, dA * dB)}, got {coeffs.shape}")
    if np.max(np.abs(np.sum(np.abs(coeffs) ** 2, axis=0) - 1)) > TP_TOL:
        raise ValidationError("coefficient columns are not normalized")
    ks = []
    for k in range(n):
        if sorted(a_perms[k]) != list(range(dA)):
            raise ValidationError(f"{a_perms[k]} is not a permutation of range({dA})")
        rows, cols = [], []
        for i in range(dA):
            b = b_perms[k][i]
            if sorted(b) != list(range(dB)):
                raise ValidationError(f"{b} is not a permutation of range({dB})")
            for j in range(dB):
                rows.append(a_perms[k][i] * dB + b[j])
                cols.append(i * dB + j)
        m = np.zeros((dA * dB, dA * dB), dtype=complex)
        m[rows, cols] = coeffs[k, cols]
        ks.append(m)
    return KrausChannel(tuple(ks))


def random_commuting_bipartite_sio(dA: int, dB: int, num_kraus: int | None = None,
                                   seed=None) -> KrausChannel:
    """Random controlled-permutation SIO on AB; commutes with dephasing on A."""
    if dA * dB > MAX_DIM:
        raise ValidationError(f"dA * dB = {dA * dB} exceeds {MAX_DIM}")
    rng = _rng(seed)
    n = dA * dB if num_kraus is None else num_kraus
    a_perms = [list(rng.permutation(dA)) for _ in range(n)]
    b_perms = [[list(rng.permutation(dB)) for _ in range(dA)] for _ in range(n)]
    coeffs = np.stack([random_ket(n, rng) for _ in range(dA * dB)], axis=1)
    return controlled_permutation_channel(a_perms, b_perms, coeffs)


def cnot() -> KrausChannel:
    return controlled_permutation_channel([[0, 1]], [[[0, 1], [1, 0]]], np.ones((1, 4)))


def unitary_channel(U) -> KrausChannel:
    return KrausChannel((np.asarray(U, dtype=complex),))


def identity_channel(d: int) -> KrausChannel:
    return unitary_channel(np.eye(d))


def phase_flip(p: float) -> KrausChannel:
    """Qubit channel ``(1 - p/2) rho + (p/2) Z rho Z``; equals the dephasing channel at ``p``."""
    z = np.diag([1.0, -1.0]).astype(complex)
    return KrausChannel((np.sqrt(1 - p / 2) * np.eye(2), np.sqrt(p / 2) * z))


def random_channel(d_in: int, d_out: int | None = None, num_kraus: int | None = None,
                   seed=None) -> KrausChannel:
    """Random CPTP map from Ginibre Kraus operators, normalized by ``S^{-1/2}``."""
    rng = _rng(seed)
    d_out = d_in if d_out is None else d_out
    n = d_in * d_out if num_kraus is None else num_kraus
    gs = _ginibre(rng, (n, d_out, d_in))
    s = np.einsum("kji,kjl->il", gs.conj(), gs)
    w, v = np.linalg.eigh(s)
    s_inv_half = (v / np.sqrt(w)) @ v.conj().T
    return KrausChannel(tuple(g @ s_inv_half for g in gs))


def ecpo_to_channel(e: EcpoSpec, d: int) -> KrausChannel:
    if isinstance(e, Isotropic):
        if not 0 <= e.t <= 1:
            raise ValidationError(f"isotropic ECPO needs t in [0, 1], got {e.t}")
        U = np.eye(d, dtype=complex) if e.U is None else as_unitary(e.U, d)
        ks = [np.sqrt(e.t) * U]
        c = np.sqrt((1 - e.t) / d)
        for i in range(d):
            for j in range(d):
                k = np.zeros((d, d), dtype=complex)
                k[i, j] = c
                ks.append(k)
        return KrausChannel(tuple(ks))
    if isinstance(e, Semiclassical):
        povm = [np.asarray(m, dtype=complex) for m in e.povm]
        if len(povm) > d:
            raise ValidationError(f"at most {d} effects fit into {d} output labels")
        for m in povm:
            if m.shape != (d, d) or np.linalg.eigvalsh((m + m.conj().T) / 2)[0] < -PSD_TOL:
                raise ValidationError("POVM effects must be PSD d x d matrices")
        if np.linalg.norm(sum(povm) - np.eye(d)) > TP_TOL:
            raise ValidationError("POVM effects do not sum to the identity")
        B = np.eye(d, dtype=complex) if e.out_basis is None else as_unitary(e.out_basis, d)
        ks = []
        for i, m in enumerate(povm):
            w, v = np.linalg.eigh((m + m.conj().T) / 2)
            root = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
            for r in range(d):
                ks.append(np.outer(B[:, i], root[r, :]))
        return KrausChannel(tuple(ks))
    raise ValidationError(f"unknown ECPO variant {type(e).__name__}")


def random_projective_povm(d: int, seed=None) -> tuple[np.ndarray, ...]:
    V = random_unitary(d, seed)
    return tuple(np.outer(V[:, i], V[:, i].conj()) for i in range(d))


LinearMap = Union[KrausChannel, Callable[[np.ndarray], np.ndarray]]


def choi_matrix(ch: LinearMap, dim_in: int | None = None) -> np.ndarray:
    """Choi matrix ``sum_jk E(|j><k|) (x) |j><k|`` (output factor first).

    ``ch`` may be a :class:`KrausChannel` or any linear map on matrices, in
    which case ``dim_in`` is required.
    """
    if isinstance(ch, KrausChannel):
        dim_in = ch.dim_in
    elif dim_in is None:
        raise ValidationError("dim_in is required for a bare linear map")
    blocks = []
    for j in range(dim_in):
        for k in range(dim_in):
            e = np.zeros((dim_in, dim_in), dtype=complex)
            e[j, k] = 1
            blocks.append(np.kron(np.asarray(ch(e)), e))
    return sum(blocks)


def is_cptp(ch: LinearMap, dim_in: int | None = None, tol: float = TP_TOL) -> bool:
    """Choi matrix Hermitian PSD (>= -tol) and trace preserving (to tol)."""
    if isinstance(ch, KrausChannel):
        dim_in = ch.dim_in
        tp = sum(k.conj().T @ k for k in ch.kraus)
        if np.linalg.norm(tp - np.eye(dim_in)) > tol:
            return False
    choi = choi_matrix(ch, dim_in)
    if np.linalg.norm(choi - choi.conj().T) > tol:
        return False
    dim_out = choi.shape[0] // dim_in
    reduced = np.einsum("ajak->jk", choi.reshape(dim_out, dim_in, dim_out, dim_in))
    if np.linalg.norm(reduced - np.eye(dim_in)) > tol:
        return False
    return bool(np.linalg.eigvalsh(choi)[0] >= -tol)


def kraus_from_choi(choi: np.ndarray, dim_in: int, tol: float = 1e-12) -> KrausChannel:
    """Kraus operators from a PSD Choi matrix in the :func:`choi_matrix` ordering."""
    dim_out = choi.shape[0] // dim_in
    w, v = np.linalg.eigh(choi)
    if w[0] < -PSD_TOL:
        raise ValidationError("Choi matrix is not positive semidefinite")
    ks = [np.sqrt(lam) * v[:, i].reshape(dim_out, dim_in) for i, lam in enumerate(w) if lam > tol]
    return KrausChannel(tuple(ks))


def commutes_with_local_dephasing(ch: KrausChannel, dims: tuple[int, int],
                                  tol: float = 1e-10) -> bool:
    """Exact check of ``E o (Delta_A (x) id) == (Delta_A (x) id) o E`` on all matrix units."""
    n = dims[0] * dims[1]
    if ch.dim_in != n or ch.dim_out != n:
        return False
    for j in range(n):
        for k in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[j, k] = 1
            lhs = ch(local_dephase(e, dims))
            rhs = local_dephase(ch(e), dims)
            if np.max(np.abs(lhs - rhs)) > tol:
                return False
    return True


def channel_to_json(ch: KrausChannel) -> dict:
    return {
        "dim_in": ch.dim_in,
        "dim_out": ch.dim_out,
        "kraus": [_matrix_to_json(k) for k in ch.kraus],
    }


def channel_from_json(obj) -> KrausChannel:
    try:
        ks = tuple(_matrix_from_json(k) for k in obj["kraus"])
        dim_in, dim_out = obj["dim_in"], obj["dim_out"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed channel: {exc}") from exc
    ch = KrausChannel(ks)
    if (ch.dim_in, ch.dim_out) != (dim_in, dim_out):
        raise ValidationError("declared dimensions disagree with the Kraus operators")
    return ch


def save_channel(path, ch: KrausChannel) -> None:
    Path(path).write_text(json.dumps(channel_to_json(ch)))


def load_channel(path) -> KrausChannel:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    return channel_from_json(obj)
