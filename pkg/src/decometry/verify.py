"""Randomized property batteries for the coherence and discord measures.

Each check returns a :class:`PropertyReport` whose ``worst_slack`` is the
smallest margin ``allowed - observed`` seen over all samples; a negative
slack is a violation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from decometry.channels import (
    DephasingChannel,
    Isotropic,
    Semiclassical,
    apply_local,
    cnot,
    dephase,
    ecpo_to_channel,
    identity_channel,
    measure_ensemble,
    random_channel,
    random_commuting_bipartite_sio,
    random_projective_povm,
    random_sio,
    sio_to_kraus,
)
from decometry.coherence import (
    c0_is_finite,
    coherence,
    coherence_qubit_closed_form,
    crb_bound,
    max_coherence,
)
from decometry.discord import (
    OptimizerConfig,
    conversion_check,
    discord,
    discord_qubitA_grid,
    local_dephasing_qfi,
)
from decometry.estimation import outcome_model, simulate_estimation
from decometry.qstate import (
    BipartiteState,
    basis_state,
    bloch_from_qubit,
    cq_state,
    ket_to_dm,
    maximally_coherent,
    maximally_entangled,
    random_bipartite,
    random_density,
    random_ket,
    random_pure,
    random_unitary,
)

P_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))


@dataclass
class PropertyReport:
    name: str
    checked: int = 0
    violations: int = 0
    worst_slack: float = math.inf
    notes: list[str] = field(default_factory=list)

    def record(self, slack: float, note: str = "") -> None:
        self.checked += 1
        if not slack >= 0:
            self.violations += 1
            if note and len(self.notes) < 5:
                self.notes.append(note)
        self.worst_slack = min(self.worst_slack, slack)

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.violations == 0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: checked={self.checked} violations={self.violations} "
                f"worst_slack={self.worst_slack:.3e}")


def _random_p(rng) -> float:
    return float(rng.uniform(0.05, 1.0))


def _random_state(rng, d: int | None = None) -> np.ndarray:
    d = int(rng.integers(2, 5)) if d is None else d
    return random_density(d, int(rng.integers(1, d + 1)), rng)


# coherence ------------------------------------------------------------------

def check_faithfulness(samples: int, seed: int = 0) -> PropertyReport:
    """Zero coherence exactly for states left unchanged by dephasing."""
    rng = np.random.default_rng(seed)
    rep = PropertyReport("C1 faithfulness")
    for k in range(samples + samples // 4):
        if k < samples:
            rho = _random_state(rng)
        else:
            d = int(rng.integers(2, 5))
            rho = np.diag(rng.dirichlet(np.ones(d))).astype(complex)
        p = _random_p(rng)
        value = coherence(rho, p)
        incoherent = np.linalg.norm(dephase(rho) - rho) <= 1e-9
        agree = (value <= 1e-12) == incoherent
        rep.record(1.0 if agree else -1.0, f"value={value:.3e} incoherent={incoherent}")
    return rep


def check_sio_monotonicity(samples: int, seed: int = 0, tol: float = 1e-8):
    """Deterministic and selective (ensemble) monotonicity under random SIOs."""
    rng = np.random.default_rng(seed)
    det = PropertyReport("C2 SIO monotonicity")
    ens = PropertyReport("C2 ensemble monotonicity")
    for _ in range(samples):
        rho = _random_state(rng)
        d = rho.shape[0]
        ch = sio_to_kraus(random_sio(d, seed=rng))
        p = _random_p(rng)
        before = coherence(rho, p)
        after = coherence(ch(rho), p)
        det.record(before + tol - after, f"C={before:.6g} C(E)={after:.6g} p={p:.3f}")
        avg = sum(pk * coherence(s, p) for pk, s in measure_ensemble(rho, ch))
        ens.record(before + tol - avg, f"C={before:.6g} avg={avg:.6g} p={p:.3f}")
    return det, ens


def check_convexity(samples: int, seed: int = 0, tol: float = 1e-8) -> PropertyReport:
    rng = np.random.default_rng(seed)
    rep = PropertyReport("C3 convexity")
    for _ in range(samples):
        d = int(rng.integers(2, 5))
        states = [_random_state(rng, d) for _ in range(3)]
        q = rng.dirichlet(np.ones(3))
        p = _random_p(rng)
        mixed = sum(qk * s for qk, s in zip(q, states))
        lhs = coherence(mixed, p)
        rhs = sum(qk * coherence(s, p) for qk, s in zip(q, states))
        rep.record(rhs + tol - lhs, f"lhs={lhs:.6g} rhs={rhs:.6g}")
    return rep


def check_qubit_closed_form(samples: int, seed: int = 0, tol: float = 1e-8) -> PropertyReport:
    rng = np.random.default_rng(seed)
    rep = PropertyReport("qubit closed form")
    for _ in range(samples):
        rho = random_density(2, int(rng.integers(1, 3)), rng)
        v = bloch_from_qubit(rho)
        for p in P_GRID:
            err = abs(coherence(rho, p) - coherence_qubit_closed_form(v, p))
            rep.record(tol - err, f"err={err:.3e} p={p}")
    return rep


def check_extremality(samples: int, seed: int = 0, tol: float = 1e-8) -> PropertyReport:
    """Random pure states never beat, and maximally coherent states attain, the maximum."""
    rng = np.random.default_rng(seed)
    rep = PropertyReport("maximal coherence")
    for _ in range(samples):
        d = int(rng.integers(2, 5))
        p = float(rng.choice(P_GRID))
        bound = max_coherence(d, p)
        rep.record(bound + tol - coherence(random_pure(d, rng), p))
        top = coherence(maximally_coherent(d, rng.uniform(0, 2 * np.pi, d)), p)
        rep.record(tol - abs(top - bound), f"d={d} p={p} value={top:.12g}")
    return rep


def check_basis_covariance(samples: int, seed: int = 0, tol: float = 1e-10) -> PropertyReport:
    rng = np.random.default_rng(seed)
    rep = PropertyReport("basis covariance")
    for _ in range(samples):
        rho = _random_state(rng)
        U = random_unitary(rho.shape[0], rng)
        p = _random_p(rng)
        a = coherence(rho, p, U)
        b = coherence(U.conj().T @ rho @ U, p)
        rep.record(tol * max(1.0, abs(b)) - abs(a - b), f"{a!r} vs {b!r}")
    return rep


def check_no_pure_distillation(samples: int, seed: int = 0) -> PropertyReport:
    """SIO branches of full-rank states keep a finite ``C_0`` and are never coherent pure states."""
    rng = np.random.default_rng(seed)
    rep = PropertyReport("no pure-state distillation")
    for _ in range(samples):
        d = int(rng.integers(2, 5))
        rho = random_density(d, d, rng)
        if not c0_is_finite(rho):
            continue
        ch = sio_to_kraus(random_sio(d, seed=rng))
        ok = True
        for _, sigma in measure_ensemble(rho, ch):
            pure = np.trace(sigma @ sigma).real > 1 - 1e-9
            coherent = np.linalg.norm(dephase(sigma) - sigma) > 1e-9
            ok &= c0_is_finite(sigma) and not (pure and coherent)
        rep.record(1.0 if ok else -1.0)
    return rep


def coherence_suite(samples: int = 200, seed: int = 0) -> list[PropertyReport]:
    det, ens = check_sio_monotonicity(samples, seed + 1)
    return [
        check_faithfulness(samples, seed),
        det,
        ens,
        check_convexity(samples, seed + 2),
        check_qubit_closed_form(samples, seed + 3),
        check_extremality(samples, seed + 4),
        check_basis_covariance(samples, seed + 5),
        check_no_pure_distillation(samples, seed + 6),
    ]


# discord --------------------------------------------------------------------

# Every battery state below has a qubit A, so discord() also runs the grid
# oracle and a handful of random starts is enough. The optimizer-only
# comparison against the grid keeps the full default configuration.
BATTERY_CONFIG = OptimizerConfig(num_starts=4, seed=0)

def random_cq(rng, dA: int = 2, dB: int = 2) -> BipartiteState:
    probs = rng.dirichlet(np.ones(dA))
    conds = [random_density(dB, int(rng.integers(1, dB + 1)), rng) for _ in range(dA)]
    return cq_state(probs, random_unitary(dA, rng), conds)


def check_discord_faithfulness(samples: int, seed: int = 0, cfg: OptimizerConfig | None = None):
    """Zero on random CQ states; clearly positive on full-rank states the grid calls discordant."""
    rng = np.random.default_rng(seed)
    cfg = cfg or BATTERY_CONFIG
    zero = PropertyReport("D1 vanishes on CQ states")
    pos = PropertyReport("D1 positive off CQ states")
    for k in range(samples):
        dB = 2 + k % 2
        value = discord(random_cq(rng, 2, dB), _random_p(rng), cfg).value
        zero.record(1e-7 - value, f"value={value:.3e}")
    while pos.checked < samples:
        state = random_bipartite(2, 2, seed=rng)
        p = _random_p(rng)
        if discord_qubitA_grid(state, p)[0] <= 1e-3:
            continue
        value = discord(state, p, cfg).value
        pos.record(value - 1e-3, f"value={value:.3e}")
    return zero, pos


def check_discord_monotonicity(samples: int, seed: int = 0, cfg: OptimizerConfig | None = None):
    """B-side channels, A-side ECPOs and local unitaries on shared random states."""
    rng = np.random.default_rng(seed)
    cfg = cfg or BATTERY_CONFIG
    d2 = PropertyReport("D2 B-side monotonicity")
    d4 = PropertyReport("D4 isotropic ECPO monotonicity")
    d4s = PropertyReport("D4 semiclassical ECPO destroys discord")
    lu = PropertyReport("local unitary invariance")
    sanity = PropertyReport("optimizer sanity")
    for k in range(samples):
        dB = 2 + k % 2
        state = random_bipartite(2, dB, int(rng.integers(1, 2 * dB + 1)), rng)
        p = _random_p(rng)
        base = discord(state, p, cfg)
        sanity.record(min(base.per_start_values) - base.value)
        sanity.record(0.0 if base.starts == cfg.num_starts + 1 else -1.0)
        value = base.value

        after = discord(apply_local(state, random_channel(dB, seed=rng), "B"), p, cfg).value
        d2.record(value + 1e-5 - after, f"{after:.8g} > {value:.8g}")

        U = random_unitary(2, rng)
        for t in (0.0, 0.3, 0.7, 1.0):
            iso = ecpo_to_channel(Isotropic(t, U), 2)
            after = discord(apply_local(state, iso, "A"), p, cfg).value
            d4.record(value + 1e-5 - after, f"t={t}: {after:.8g} > {value:.8g}")
        semi = ecpo_to_channel(Semiclassical(random_projective_povm(2, rng), random_unitary(2, rng)), 2)
        after = discord(apply_local(state, semi, "A"), p, cfg).value
        d4s.record(1e-7 - after, f"value={after:.3e}")

        W = np.kron(random_unitary(2, rng), random_unitary(dB, rng))
        rotated = BipartiteState(W @ state.state @ W.conj().T, state.dims)
        after = discord(rotated, p, cfg).value
        lu.record(1e-5 - abs(after - value), f"{after:.10g} vs {value:.10g}")
    return d2, d4, d4s, lu, sanity


def check_pure_extremality(samples: int, seed: int = 0, cfg: OptimizerConfig | None = None):
    rng = np.random.default_rng(seed)
    cfg = cfg or BATTERY_CONFIG
    rep = PropertyReport("D3 pure states bounded by Bell state")
    for _ in range(samples):
        p = _random_p(rng)
        bell = discord(maximally_entangled(2), p, cfg).value
        value = discord(BipartiteState(ket_to_dm(random_ket(4, rng)), (2, 2)), p, cfg).value
        rep.record(bell + 1e-6 - value, f"{value:.10g} > {bell:.10g}")
    return rep


def check_transfer_identity(samples: int = 20, seed: int = 0) -> PropertyReport:
    """On maximally entangled states the objective does not depend on the basis."""
    rng = np.random.default_rng(seed)
    rep = PropertyReport("basis independence on maximally entangled states")
    for d in (2, 3):
        state = maximally_entangled(d)
        p = _random_p(rng)
        ref = local_dephasing_qfi(state, p)
        vals = [local_dephasing_qfi(state, p, random_unitary(d, rng)) for _ in range(samples)]
        rep.record(1e-8 - (max(vals + [ref]) - min(vals + [ref])))
    return rep


def check_grid_agreement(samples: int, seed: int = 0, cfg: OptimizerConfig | None = None,
                         tol: float = 1e-5) -> PropertyReport:
    """Optimizer alone versus the brute-force grid on random two-qubit states."""
    rng = np.random.default_rng(seed)
    rep = PropertyReport("optimizer vs grid oracle")
    for _ in range(samples):
        state = random_bipartite(2, 2, int(rng.integers(1, 5)), rng)
        p = _random_p(rng)
        opt = discord(state, p, cfg, use_grid=False).value
        grid, _ = discord_qubitA_grid(state, p)
        rep.record(tol - abs(opt - grid), f"opt={opt:.10g} grid={grid:.10g} p={p:.3f}")
    return rep


def discord_suite(samples: int = 50, seed: int = 0,
                  cfg: OptimizerConfig | None = None) -> list[PropertyReport]:
    zero, pos = check_discord_faithfulness(min(samples, 30), seed, cfg)
    return [
        zero,
        pos,
        *check_discord_monotonicity(samples, seed + 1, cfg),
        check_pure_extremality(samples, seed + 2, cfg),
        check_transfer_identity(20, seed + 3),
        check_grid_agreement(samples, seed + 4, cfg),
    ]


# conversion -----------------------------------------------------------------

def check_conversion(samples: int, seed: int = 0, cfg: OptimizerConfig | None = None):
    rng = np.random.default_rng(seed)
    rep = PropertyReport("coherence bounds created discord")
    for k in range(samples):
        dA = 3 if k % 5 == 4 else 2
        dB = int(rng.integers(2, 4))
        rho_a = random_density(dA, int(rng.integers(1, dA + 1)), rng)
        sigma_b = np.diag(rng.dirichlet(np.ones(dB))).astype(complex)
        e = random_commuting_bipartite_sio(dA, dB, seed=rng)
        res = conversion_check(rho_a, sigma_b, e, _random_p(rng), cfg)
        rep.record(res.slack + 1e-6, f"C_in={res.c_in:.8g} D_out={res.d_out:.8g}")
    sat = PropertyReport("CNOT saturates the conversion bound")
    res = conversion_check(maximally_coherent(2), basis_state(2, 0), cnot(), 0.5, cfg)
    sat.record(1e-5 - abs(res.slack), f"slack={res.slack:.3e}")
    ident = PropertyReport("identity coupling creates no discord")
    res = conversion_check(maximally_coherent(2), basis_state(2, 0), identity_channel(4), 0.5, cfg)
    ident.record(1e-7 - res.d_out, f"D_out={res.d_out:.3e}")
    return [rep, sat, ident]


def conversion_suite(samples: int = 100, seed: int = 0,
                     cfg: OptimizerConfig | None = None) -> list[PropertyReport]:
    return check_conversion(samples, seed, cfg)


# estimation -----------------------------------------------------------------

PLUS_MINUS_POVM = (
    np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex),
    np.array([[0.5, -0.5], [-0.5, 0.5]], dtype=complex),
)


def classical_fisher(a: np.ndarray, b: np.ndarray, p: float) -> float:
    probs = a + b * p
    used = probs > 0
    return float(np.sum(b[used] ** 2 / probs[used]))


def check_cramer_rao(samples: int, seed: int = 0, mu: int = 10**4, trials: int = 200):
    """Variance stays above 0.8 x the bound; estimates unbiased within 3 standard errors.

    Runs whose outcome statistics cannot resolve p to within 0.05 are skipped,
    since the estimator then piles up on the boundary of [0, 1].
    """
    rng = np.random.default_rng(seed)
    crb = PropertyReport("variance respects the Cramer-Rao bound")
    bias = PropertyReport("estimates in [0, 1], mean within 3 SE")
    attempts = 0
    while crb.checked < samples and attempts < 20 * samples:
        attempts += 1
        rho = random_density(2, int(rng.integers(1, 3)), rng)
        povm = random_projective_povm(2, rng)
        p_true = float(rng.uniform(0.2, 0.8))
        a, b = outcome_model(rho, None, povm)
        fc = classical_fisher(a, b, p_true)
        if fc == 0 or 1 / np.sqrt(mu * fc) > 0.05:
            continue
        run = simulate_estimation(rho, None, p_true, mu, trials, povm, seed=int(rng.integers(2**31)))
        F = coherence(rho, p_true)
        crb.record(run.variance - 0.8 * crb_bound(F, mu), f"var={run.variance:.3e} F={F:.4g}")
        inside = bool(np.all((run.estimates >= 0) & (run.estimates <= 1)))
        z = abs(run.mean - p_true) / run.standard_error
        bias.record(3 - z if inside else -1.0, f"z={z:.2f}")
    return crb, bias


def plus_state_run(mu: int = 10**4, trials: int = 200, seed: int = 0):
    return simulate_estimation(maximally_coherent(2), None, 0.5, mu, trials, PLUS_MINUS_POVM, seed)


def check_plus_state_band(seed: int = 0) -> PropertyReport:
    """The |+> probe with the X measurement sits in [0.8, 1.3] x the bound."""
    rep = PropertyReport("|+> variance within [0.8, 1.3] x bound")
    run = plus_state_run(seed=seed)
    ratio = run.variance / crb_bound(coherence(maximally_coherent(2), 0.5), run.mu)
    rep.record(min(ratio - 0.8, 1.3 - ratio), f"ratio={ratio:.4f}")
    return rep


def estimation_suite(samples: int = 20, seed: int = 0) -> list[PropertyReport]:
    return [check_plus_state_band(seed), *check_cramer_rao(samples, seed + 1)]


SUITES = {
    "coherence": coherence_suite,
    "discord": discord_suite,
    "conversion": conversion_suite,
    "estimation": estimation_suite,
}


def run_suite(name: str, samples: int, seed: int = 0) -> list[PropertyReport]:
    if name == "all":
        return [r for key in SUITES for r in SUITES[key](samples, seed)]
    return SUITES[name](samples, seed)
