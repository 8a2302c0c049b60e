"""Experiment drivers shared by the command line and the acceptance tests.

Each driver takes an ``ExperimentConfig`` and returns an ``ExperimentResult``
holding data tables and named checks.  Randomness is drawn from generators
seeded by the config seed and a fixed per-experiment offset.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .basis import GridSpec, HermiteBasis, PotentialSpec, momentum_matrix, position_matrix
from .chain import boundary_coupling, hamiltonian
from .config import ExperimentConfig, potential
from .dynamics import dyson_unitary, lr_experiment, lr_truncation_drift
from .entropy import (
    lsc_check,
    mixing_sequence,
    monotonicity_check,
    peierls_bogoliubov_check,
    pinsker_gap,
    uniqueness_bound_experiment,
)
from .gibbs import (
    PositiveMultiplier,
    ProductTerm,
    gibbs_factorization,
    gibbs_state,
    perturbed_gibbs,
    sandwich_check,
    spectral,
)
from .kernel import eigensum_kernel, kernel_shift_ratio_check, mehler_kernel, trotter_kernel
from .kms import (
    boundary_residual,
    cauchy_riemann_residual,
    invariance_check,
    kms_function,
    kms_pair,
    regularity_experiment,
    three_lines_check,
)
from .operators import LabeledOperator, opnorm
from .resolvent import (
    EXACT_RELATIONS,
    RELATIONS,
    ResolventSample,
    SymplecticVector,
    relation_residuals,
    resolvent,
    weyl_residual,
)

__all__ = ["Table", "Check", "ExperimentResult", "EXPERIMENTS", "run_experiment"]


@dataclass
class Table:
    name: str
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def add(self, *row) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} entries, table {self.name} has {len(self.columns)} columns")
        self.rows.append(tuple(row))

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


@dataclass
class Check:
    name: str
    value: float
    bound: float
    relation: str  # "<=", ">=" or "<"
    passed: bool

    @classmethod
    def at_most(cls, name: str, value: float, bound: float) -> "Check":
        return cls(name, float(value), float(bound), "<=", bool(value <= bound))

    @classmethod
    def at_least(cls, name: str, value: float, bound: float) -> "Check":
        return cls(name, float(value), float(bound), ">=", bool(value >= bound))

    @classmethod
    def below(cls, name: str, value: float, bound: float) -> "Check":
        return cls(name, float(value), float(bound), "<", bool(value < bound))


@dataclass
class ExperimentResult:
    name: str
    tables: list[Table] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def table(self, name: str) -> Table:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)


def _rng(cfg: ExperimentConfig, offset: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, offset])


def _random_hermitian(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (a + a.conj().T) / (2.0 * math.sqrt(n))


def _random_density(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def _ladder(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values[:-1], values[1:]))


# ---------------------------------------------------------------------------


def run_spectrum(cfg: ExperimentConfig) -> ExperimentResult:
    sec = cfg["spectrum"]
    chain = cfg.chain("spectrum")
    res = ExperimentResult("spectrum")
    basis = chain.basis
    x = position_matrix(basis).matrix
    p = momentum_matrix(basis).matrix
    h = (p @ p + basis.omega**2 * (x @ x)).real
    # the top level of x^2 and p^2 feels the truncation; the rest is exact
    err = float(np.abs(np.diag(h)[:-1] - basis.energies[:-1]).max())
    off = float(np.abs(h[:-1, :-1] - np.diag(np.diag(h)[:-1])).max())

    ham = hamiltonian(chain)
    levels = min(sec["levels"], chain.total_dim)
    E = np.linalg.eigvalsh(ham.H.matrix)[:levels]
    E_free = np.linalg.eigvalsh(ham.H_free.matrix)[:levels]
    E_h = np.sort(np.diag(ham.H_h.matrix))[:levels]
    tab = Table("levels", ("level", "E", "E_free", "E_harmonic"))
    for i in range(levels):
        tab.add(i, E[i], E_free[i], E_h[i])
    res.tables.append(tab)
    n_sites = len(chain.sites)
    res.checks += [
        Check.at_most("harmonic_diagonal_error", err, sec["tol"]),
        Check.at_most("harmonic_offdiagonal_error", off, sec["tol"]),
        Check.at_most("harmonic_ground_error", abs(E_h[0] - n_sites * basis.omega), sec["tol"]),
        Check.at_most(
            "hamiltonian_hermitian_error", float(np.abs(ham.H.matrix - ham.H.matrix.conj().T).max()), sec["tol"]
        ),
    ]
    return res


def run_gibbs(cfg: ExperimentConfig) -> ExperimentResult:
    sec = cfg["gibbs"]
    big = cfg.chain("gibbs", L=sec["L_big"])
    rep = gibbs_factorization(big, sec["L"], samples=sec["samples"], seed=cfg.seed)
    res = ExperimentResult("gibbs")
    tab = Table("factorization", ("L", "L_big", "site_dim", "beta", "trace_distance", "gibbs_condition"))
    tab.add(sec["L"], sec["L_big"], big.site_dim, big.beta, rep.trace_distance, rep.gibbs_condition)
    res.tables.append(tab)
    res.checks += [
        Check.at_most("trace_distance", rep.trace_distance, sec["tol"]),
        Check.at_most("gibbs_condition", rep.gibbs_condition, sec["tol"]),
    ]
    return res


def sandwich_multipliers(sites: Sequence[int], count: int, rng: np.random.Generator) -> list[PositiveMultiplier]:
    """Distinct positive multiplication operators built from random nonnegative bumps."""
    out = []
    for k in range(count):
        terms = []
        for _ in range(1 + k % 2):
            chosen = sorted(rng.choice(sites, size=rng.integers(1, len(sites) + 1), replace=False))
            factors = tuple(
                (int(s), PotentialSpec.bump(rng.uniform(0.2, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(0.5, 1.5)))
                for s in chosen
            )
            terms.append(ProductTerm(factors))
        out.append(PositiveMultiplier(tuple(terms), constant=float(rng.uniform(0.0, 0.5))))
    return out


def run_sandwich(cfg: ExperimentConfig) -> ExperimentResult:
    sec = cfg["sandwich"]
    small = cfg.chain("sandwich")
    big = cfg.chain("sandwich", L=sec["L_big"])
    Fs = sandwich_multipliers(small.sites, sec["multipliers"], _rng(cfg, 3))
    res = ExperimentResult("sandwich")
    tab = Table(
        "ratios",
        ("F", "state_small", "state_big", "state_ratio", "trace_ratio", "state_envelope", "trace_envelope", "tolerance"),
    )
    ok_state = ok_trace = True
    for i, F in enumerate(Fs):
        r = sandwich_check(small, big, F)
        tab.add(i, r.state_small, r.state_big, r.state_ratio, r.trace_ratio, r.state_envelope, r.trace_envelope, r.tolerance)
        ok_state &= 1 / r.state_envelope * (1 - r.tolerance) <= r.state_ratio <= r.state_envelope * (1 + r.tolerance)
        ok_trace &= 1 / r.trace_envelope * (1 - r.tolerance) <= r.trace_ratio <= r.trace_envelope * (1 + r.tolerance)
    res.tables.append(tab)
    res.checks += [
        Check.at_least("state_ratio_in_envelope", float(ok_state), 1.0),
        Check.at_least("trace_ratio_in_envelope", float(ok_trace), 1.0),
        Check.at_least("distinct_multipliers", len(set(Fs)), sec["multipliers"]),
    ]
    return res


def run_kernel(cfg: ExperimentConfig) -> ExperimentResult:
    sec = cfg["kernel"]
    omega = cfg["chain"]["omega"]
    res = ExperimentResult("kernel")
    basis = HermiteBasis(sec["dim"], omega)
    grid = GridSpec(sec["x_min"], sec["x_max"], sec["points"])
    x = grid.nodes
    mtab = Table("mehler", ("beta", "max_abs_error", "max_rel_error"))
    worst = 0.0
    for beta in sec["betas"]:
        exact = mehler_kernel(beta, omega, x[:, None], x[None, :])
        approx = eigensum_kernel(basis, beta, grid).values
        diff = float(np.abs(exact - approx).max())
        rel = diff / float(np.abs(exact).max())
        mtab.add(beta, diff, rel)
        worst = max(worst, rel)
    res.tables.append(mtab)
    res.checks.append(Check.at_most("mehler_max_rel_error", worst, sec["mehler_tol"]))

    V = potential(sec["trotter_V"])
    tgrid = GridSpec(sec["trotter_x_min"], sec["trotter_x_max"], sec["trotter_points"])
    beta = sec["trotter_beta"]
    oracle = eigensum_kernel(basis, beta, tgrid, V=V).values
    scale = float(np.abs(oracle).max())
    ttab = Table("trotter", ("m", "max_rel_error", "order"))
    errs = []
    for m in sec["trotter_steps"]:
        k = trotter_kernel(beta, m, omega, V=V, grid=tgrid).values
        errs.append(float(np.abs(k - oracle).max()) / scale)
    orders = [math.nan] + [math.log2(a / b) for a, b in zip(errs[:-1], errs[1:])]
    for m, e, o in zip(sec["trotter_steps"], errs, orders):
        ttab.add(m, e, o)
    res.tables.append(ttab)
    fit = float(np.polyfit(np.log(sec["trotter_steps"]), np.log(errs), 1)[0])
    res.checks += [
        Check.at_least("trotter_order_min", min(orders[1:]), sec["order_min"]),
        Check.at_most("trotter_order_max", max(orders[1:]), sec["order_max"]),
        Check.at_least("trotter_fit_order", -fit, sec["order_min"]),
        Check.at_most("trotter_fit_order_upper", -fit, sec["order_max"]),
    ]

    stab = Table("shift_ratio", ("t", "max_deviation", "envelope", "amplification", "points"))
    ok = True
    for t in sec["shift_t"]:
        r = kernel_shift_ratio_check(cfg["chain"]["beta"], t, omega, V=potential(cfg["chain"]["V"]), m=sec["shift_steps"])
        stab.add(t, r.max_deviation, r.envelope, r.amplification, r.points)
        ok &= r.passed
    res.tables.append(stab)
    res.checks.append(Check.at_least("shift_ratio_within_envelope", float(ok), 1.0))
    return res


def _lr_operators(sec: dict) -> Callable:
    def make(chain):
        Q = resolvent(chain, sec["lam"], SymplecticVector.delta(sec["q_site"]))
        R = resolvent(chain, sec["lam"], SymplecticVector.delta(sec["r_site"], 1j))
        return Q, R

    return make


def run_lr(cfg: ExperimentConfig) -> ExperimentResult:
    sec = cfg["lr"]
    chain = cfg.chain("lr")
    make = _lr_operators(sec)
    Q, R = make(chain)
    t = np.linspace(-sec["t_max"], sec["t_max"], sec["points"])
    drift = lr_truncation_drift(chain, make, sec["drift_t"], increment=sec["drift_increment"])
    tol = sec["drift_factor"] * drift
    rep = lr_experiment(chain, Q.support, R.support, Q, R, t, truncation_tol=tol)
    free = chain.with_(phi=PotentialSpec())
    Qf, Rf = make(free)
    control = lr_experiment(free, Qf.support, Rf.support, Qf, Rf, t)
    res = ExperimentResult("lr")
    tab = Table("curve", ("t", "g", "envelope", "g_decoupled"))
    for row in zip(t, rep.g, rep.envelope, control.g):
        tab.add(*row)
    res.tables.append(tab)
    res.checks += [
        Check.at_most("lr_max_excess", rep.max_excess, tol),
        Check.at_most("decoupled_control", float(control.g.max()), sec["control_tol"]),
    ]
    return res


def run_dyson(cfg: ExperimentConfig) -> ExperimentResult:
    sec = cfg["dyson"]
    chain = cfg.chain("dyson", L=1)
    ham = hamiltonian(chain)
    sdH = spectral(ham.H)
    sdh = spectral(ham.H_h)
    res = ExperimentResult("dyson")
    tab = Table("series", ("t", "order", "error", "tail_bound", "quadrature_error"))
    worst = -math.inf
    for t in sec["times"]:
        exact = sdH.apply(lambda E: np.exp(1j * t * E)) @ sdh.apply(lambda E: np.exp(-1j * t * E))
        for order in sec["orders"]:
            d = dyson_unitary(ham.H_h, ham.upsilon, t, order, nodes=sec["nodes"], quad_budget=sec["quad_budget"])
            err = opnorm(d.matrix - exact, hermitian=False)
            tab.add(t, order, err, d.tail_bound, d.quadrature_error)
            worst = max(worst, err - d.tail_bound)
    res.tables.append(tab)
    res.checks.append(Check.at_most("error_minus_tail", worst, sec["quad_budget"]))
    return res


def run_kms(cfg: ExperimentConfig) -> ExperimentResult:
    sec = cfg["kms"]
    chain = cfg.chain("kms")
    H = hamiltonian(chain).H
    rng = _rng(cfg, 6)
    n = chain.total_dim
    t = np.linspace(-sec["t_max"], sec["t_max"], sec["points"])
    res = ExperimentResult("kms")
    tab = Table("boundary", ("beta", "pair", "t", "re_F", "im_F", "boundary_residual"))
    worst_b = worst_i = 0.0
    cr = lines = None
    for beta in sec["betas"]:
        state = gibbs_state(H, beta)
        for k in range(sec["pairs"]):
            Q = LabeledOperator(chain.sites, _random_hermitian(rng, n), chain.site_dim)
            R = LabeledOperator(chain.sites, _random_hermitian(rng, n), chain.site_dim)
            pair = kms_pair(state, Q, R)
            F = kms_function(pair, t)
            for ti, Fi in zip(t, F):
                b = boundary_residual(state, Q, R, [ti])
                worst_b = max(worst_b, b)
                tab.add(beta, k, ti, Fi.real, Fi.imag, b)
            worst_i = max(worst_i, invariance_check(state, H, Q, t))
            if cr is None:
                ys = np.linspace(0.0, beta, 9)
                cr = cauchy_riemann_residual(pair, t[::8], ys)
                lines = three_lines_check(pair, t, ys)
    res.tables.append(tab)
    # positive control: a state that is not a function of H is not invariant
    w = np.linalg.eigh(_random_hermitian(rng, n))[1]
    rho_ctl = (w * np.linspace(1.0, 2.0, n)) @ w.conj().T
    rho_ctl /= np.trace(rho_ctl).real
    Qc = LabeledOperator(chain.sites, _random_hermitian(rng, n), chain.site_dim)
    control = invariance_check(rho_ctl, H, Qc, t)
    res.checks += [
        Check.at_most("boundary_residual", worst_b, sec["boundary_tol"]),
        Check.at_most("invariance_residual", worst_i, sec["invariance_tol"]),
        Check.at_most("cauchy_riemann_residual", cr, sec["boundary_tol"]),
        Check.at_most("three_lines_excess", lines[0] - lines[1], sec["boundary_tol"]),
        Check.at_least("noninvariant_control", control, 1e3 * sec["invariance_tol"]),
    ]
    return res


def run_regularity(cfg: ExperimentConfig) -> ExperimentResult:
    sec = cfg["regularity"]
    vols = sorted(sec["volumes"])
    chain = cfg.chain("regularity", L=vols[0])
    rep = regularity_experiment(
        chain, volumes=vols, t_max=sec["t_max"], points=sec["points"], deltas=sec["deltas"], Q=potential(sec["Q"])
    )
    res = ExperimentResult("regularity")
    cols = ["delta"] + [f"modulus_L{L}" for L in vols] + [f"bound_L{L}" for L in vols] + ["transfer"]
    tab = Table("moduli", tuple(cols))
    for i, d in enumerate(rep.deltas):
        tab.add(d, *[rep.moduli[L][i] for L in vols], *[rep.bounds[L][i] for L in vols], rep.transfer[i])
    res.tables.append(tab)
    for L in vols:
        res.checks.append(Check.at_most(f"modulus_over_bound_L{L}", float(np.max(rep.moduli[L] / rep.bounds[L])), 1.0))
    for L in vols[1:]:
        res.checks.append(Check.at_most(f"modulus_over_transfer_L{L}", float(np.max(rep.moduli[L] / rep.transfer)), 1.0))
    res.checks.append(Check.below("c_small_below_c_large", rep.c_small, rep.c_large))
    return res


def run_entropy(cfg: ExperimentConfig) -> ExperimentResult:
    sec = cfg["entropy"]
    small = cfg.chain("entropy")
    big = cfg.chain("entropy", L=sec["L_big"])
    u = uniqueness_bound_experiment(small, big)
    res = ExperimentResult("entropy")
    utab = Table("uniqueness", ("relative_entropy", "full_relative_entropy", "energy_gap", "bound", "tolerance"))
    utab.add(u.relative_entropy, u.full_relative_entropy, u.energy_gap, u.bound, u.slack)
    res.tables.append(utab)

    rng = _rng(cfg, 8)
    pb = Table("peierls_bogoliubov", ("trial", "beta", "lhs", "rhs"))
    pb_ok = 0
    for k in range(sec["pb_trials"]):
        H = _random_hermitian(rng, sec["pb_dim"]) * 4.0
        W = _random_hermitian(rng, sec["pb_dim"])
        beta = float(rng.uniform(0.1, 2.0))
        r = peierls_bogoliubov_check(H, W, beta)
        pb.add(k, beta, r.lhs, r.rhs)
        pb_ok += r.passed
    res.tables.append(pb)

    d = sec["monotonicity_site_dim"]
    mono = Table("monotonicity", ("trial", "full", "restricted", "pinsker_entropy", "pinsker_bound"))
    mono_ok = pinsker_ok = 0
    for k in range(sec["monotonicity_trials"]):
        r1 = LabeledOperator((0, 1), _random_density(rng, d * d), d)
        r2 = LabeledOperator((0, 1), _random_density(rng, d * d), d)
        m = monotonicity_check(r1, r2, (0,))
        s, half_sq = pinsker_gap(r1, r2)
        mono.add(k, m.full, m.restricted, s, half_sq)
        mono_ok += m.passed
        pinsker_ok += s >= half_sq - 1e-12
    res.tables.append(mono)
    s, half_sq = pinsker_gap(
        perturbed_gibbs(big, boundary_coupling(big, sec["L"])).rho, gibbs_state(hamiltonian(big).H, big.beta).rho
    )
    pinsker_ok += s >= half_sq - 1e-12
    rho = _random_density(rng, d * d)
    sig = _random_density(rng, d * d)
    lsc = lsc_check(mixing_sequence(rho, 48), [sig] * 48, rho, sig)
    lsc_both = lsc_check(mixing_sequence(rho, 48), mixing_sequence(sig, 48), rho, sig)
    res.checks += [
        Check.at_most("uniqueness_relative_entropy", u.relative_entropy, u.bound + u.slack),
        Check.at_most("entropy_chain_order", float(not u.passed), 0.0),
        Check.at_least("peierls_bogoliubov_passed", pb_ok, sec["pb_trials"]),
        Check.at_least("monotonicity_passed", mono_ok, sec["monotonicity_trials"]),
        Check.at_least("pinsker_passed", pinsker_ok, sec["monotonicity_trials"] + 1),
        Check.at_most("lower_semicontinuity_gap", lsc.limit - lsc.liminf, 1e-6),
        Check.at_most("lower_semicontinuity_gap_joint", lsc_both.limit - lsc_both.liminf, 1e-6),
    ]
    return res


def resolvent_samples(count: int, rng: np.random.Generator) -> list[ResolventSample]:
    out = []
    for _ in range(count):
        lam, mu = rng.choice([-1.0, 1.0], 2) * rng.uniform(0.5, 2.0, 2)
        nu = float(rng.uniform(0.5, 2.0))
        a, b = rng.uniform(0.3, 1.0, 2) * np.exp(2j * np.pi * rng.uniform(size=2))
        out.append(ResolventSample(float(lam), float(mu), nu, SymplecticVector.delta(0, a), SymplecticVector.delta(0, b)))
    return out


def run_resolvent(cfg: ExperimentConfig) -> ExperimentResult:
    sec = cfg["resolvent"]
    omega = cfg["chain"]["omega"]
    samples = resolvent_samples(sec["samples"], _rng(cfg, 9))
    res = ExperimentResult("resolvent")
    tab = Table("residuals", ("site_dim",) + RELATIONS + ("weyl",))
    per_dim = []
    for d in sec["dims"]:
        basis = HermiteBasis(d, omega)
        r = relation_residuals(basis, samples)
        w = max(weyl_residual(basis, s.f, s.g) for s in samples)
        per_dim.append({**r, "weyl": w})
        tab.add(d, *[r[name] for name in RELATIONS], w)
    res.tables.append(tab)
    for name in EXACT_RELATIONS:
        res.checks.append(Check.at_most(f"{name}_residual", max(p[name] for p in per_dim), sec["exact_tol"]))
    for name in RELATIONS + ("weyl",):
        if name in EXACT_RELATIONS:
            continue
        series = [p[name] for p in per_dim]
        res.checks.append(Check.at_least(f"{name}_decreasing", float(_ladder(series)), 1.0))
    return res


EXPERIMENTS: dict[str, Callable[[ExperimentConfig], ExperimentResult]] = {
    "spectrum": run_spectrum,
    "gibbs": run_gibbs,
    "sandwich": run_sandwich,
    "kernel": run_kernel,
    "lr": run_lr,
    "dyson": run_dyson,
    "kms": run_kms,
    "regularity": run_regularity,
    "entropy": run_entropy,
    "resolvent": run_resolvent,
}


def run_experiment(name: str, cfg: ExperimentConfig) -> ExperimentResult:
    start = time.perf_counter()
    res = EXPERIMENTS[name](cfg)
    res.elapsed = time.perf_counter() - start
    return res
