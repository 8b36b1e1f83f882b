"""Monte-Carlo maximum-likelihood estimation of the dephasing strength."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from decometry.channels import TP_TOL, dephase
from decometry.errors import ValidationError
from decometry.qstate import PSD_TOL, as_density_matrix, as_unitary

SLOPE_TOL = 1e-12


@dataclass(frozen=True)
class EstimationRun:
    p_true: float
    mu: int
    trials: int
    povm: tuple[np.ndarray, ...]
    estimates: np.ndarray
    variance: float
    informative: bool

    @property
    def mean(self) -> float:
        return float(np.mean(self.estimates))

    @property
    def standard_error(self) -> float:
        return float(np.std(self.estimates, ddof=1) / np.sqrt(self.trials))


def _check_povm(povm, d: int) -> tuple[np.ndarray, ...]:
    effects = tuple(np.asarray(m, dtype=complex) for m in povm)
    for m in effects:
        if m.shape != (d, d) or np.linalg.eigvalsh((m + m.conj().T) / 2)[0] < -PSD_TOL:
            raise ValidationError("POVM effects must be PSD matrices of the state's dimension")
    if np.linalg.norm(sum(effects) - np.eye(d)) > TP_TOL:
        raise ValidationError("POVM effects do not sum to the identity")
    return effects


def outcome_model(rho, U, povm) -> tuple[np.ndarray, np.ndarray]:
    """Born probabilities as affine functions of p: ``P_i(p) = a_i + b_i p``."""
    rho = as_density_matrix(rho)
    effects = _check_povm(povm, rho.shape[0])
    U = None if U is None else as_unitary(U, rho.shape[0])
    drho = dephase(rho, U) - rho
    a = np.array([np.trace(m @ rho).real for m in effects])
    b = np.array([np.trace(m @ drho).real for m in effects])
    return a, b


def mle(counts: np.ndarray, a: np.ndarray, b: np.ndarray, tol: float = 1e-8) -> float:
    """Maximize the multinomial log-likelihood over p in [0, 1].

    Probabilities are affine in p, so the log-likelihood is concave and a
    bounded scalar search finds the maximum.
    """
    used = counts > 0

    def nll(p):
        probs = a[used] + b[used] * p
        if np.any(probs <= 0):
            return np.inf
        return -np.sum(counts[used] * np.log(probs))

    res = minimize_scalar(nll, bounds=(0.0, 1.0), method="bounded", options={"xatol": tol})
    return float(res.x)


def simulate_estimation(rho, U, p_true: float, mu: int, trials: int, povm,
                        seed: int = 0) -> EstimationRun:
    """Estimate ``p_true`` from ``mu`` measured copies per trial, ``trials`` times.

    Trial ``k`` draws its outcomes from a generator seeded with ``(seed, k)``,
    so runs are reproducible and independent of evaluation order. A run is
    uninformative when no outcome probability depends on p; its estimates
    are then meaningless and reported as NaN.
    """
    if not 0 < p_true < 1:
        raise ValidationError(f"p_true must lie in (0, 1), got {p_true}")
    if mu < 1 or trials < 2:
        raise ValidationError("need mu >= 1 and at least two trials")
    rho = as_density_matrix(rho)
    effects = _check_povm(povm, rho.shape[0])
    a, b = outcome_model(rho, U, effects)
    informative = bool(np.any(np.abs(b) > SLOPE_TOL))
    probs = np.clip(a + b * p_true, 0, None)
    probs = probs / probs.sum()
    estimates = np.full(trials, np.nan)
    if informative:
        for k in range(trials):
            rng = np.random.default_rng([seed, k])
            counts = rng.multinomial(mu, probs)
            estimates[k] = mle(counts, a, b)
        variance = float(np.var(estimates, ddof=1))
    else:
        variance = float("nan")
    return EstimationRun(p_true, mu, trials, effects, estimates, variance, informative)
