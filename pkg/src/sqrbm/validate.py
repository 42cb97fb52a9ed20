"""Oracle-equivalence and estimator checks, shared by the CLI and the tests.

Every check returns a CheckResult with a max error, a tolerance, and a case
count, so the CLI can print one pass/fail line per check and the acceptance
tests can assert on the same numbers. Seeds are frozen: the statistical
checks (shot unbiasedness, chain convergence) are Monte Carlo and would
otherwise flake at the stated confidence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exact import (
    bayes_hidden_given_visible,
    bayes_visible_given_hidden,
    channel_conditional,
    exact_nll,
    exact_nll_gradient,
    oracle_visible_marginal,
)
from .model import (
    CLASSICAL_POOL,
    QUANTUM_POOL,
    HiddenOutcome,
    ModelParams,
    bit_table,
    hidden_conditional,
    visible_conditional_weights,
    visible_marginal,
)
from .sampling import BasisTables, RngStream, _step_block, init_chains
from .training import classical_cd_update, generalized_cd_update, nll_shot_update


@dataclass
class CheckResult:
    name: str
    cases: int
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return np.isfinite(self.max_error) and self.max_error <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: max error {self.max_error:.3e} "
                f"<= {self.tolerance:g} over {self.cases} cases"
                if self.passed else
                f"{status} {self.name}: max error {self.max_error:.3e} "
                f"> {self.tolerance:g} over {self.cases} cases")


def random_params(rng: RngStream, n: int, m: int, pool, beta: float = 1.0,
                  scale: float = 0.8) -> ModelParams:
    npool = len(pool)
    return ModelParams(n=n, m=m, pool=tuple(pool),
                       a=rng.normal(0.0, scale, size=n),
                       b=rng.normal(0.0, scale, size=(npool, m)),
                       w=rng.normal(0.0, scale, size=(npool, n, m)),
                       beta=beta)


def _small_model_set(seed: int, count: int = 108):
    """>=100 models covering n,m <= 3, both pools, beta in {0.5, 1, 2}."""
    rng = RngStream(seed)
    shapes = [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1), (1, 3), (3, 2), (2, 3), (3, 3)]
    models = []
    i = 0
    while len(models) < count:
        n, m = shapes[i % len(shapes)]
        pool = (CLASSICAL_POOL, QUANTUM_POOL)[(i // len(shapes)) % 2]
        beta = (0.5, 1.0, 2.0)[i % 3]
        models.append(random_params(rng.spawn(i), n, m, pool, beta))
        i += 1
    return models


def check_channel_equivalence(seed: int = 7, count: int = 108) -> CheckResult:
    """Measure-and-reprepare channel vs Bayes conditionals, both directions."""
    worst = 0.0
    cases = 0
    for params in _small_model_set(seed, count):
        for basis in params.pool:
            for v in bit_table(params.n):
                got = channel_conditional(params, v=v, basis=basis)
                ref = bayes_hidden_given_visible(params, v, basis)
                worst = max(worst, float(np.abs(got - ref).max()))
                cases += 1
            for h_bits in bit_table(params.m):
                h = HiddenOutcome(basis=basis, bits=h_bits)
                got = channel_conditional(params, h=h)
                ref = bayes_visible_given_hidden(params, h)
                worst = max(worst, float(np.abs(got - ref).max()))
                cases += 1
    return CheckResult("channel-vs-bayes", cases, worst, 1e-10)


def check_closed_forms(seed: int = 7, count: int = 108) -> CheckResult:
    """Closed-form marginal and conditionals vs the dense oracle."""
    worst = 0.0
    cases = 0
    for params in _small_model_set(seed, count):
        p = visible_marginal(params)
        worst = max(worst, float(np.abs(p - oracle_visible_marginal(params)).max()))
        cases += 1
        for basis in params.pool:
            for v in bit_table(params.n):
                got = hidden_conditional(params, v, basis)
                full = bayes_hidden_given_visible(params, v, basis)
                marg1 = full.reshape((2,) * params.m)
                for j in range(params.m):
                    axes = tuple(ax for ax in range(params.m) if ax != params.m - 1 - j)
                    per_unit = marg1.sum(axis=axes) if axes else marg1
                    worst = max(worst, float(np.abs(got[j] - per_unit).max()))
                cases += 1
            for h_bits in bit_table(params.m):
                h = HiddenOutcome(basis=basis, bits=h_bits)
                weights = visible_conditional_weights(params, h)
                got = weights / weights.sum()
                ref = bayes_visible_given_hidden(params, h)
                worst = max(worst, float(np.abs(got - ref).max()))
                cases += 1
    return CheckResult("closed-forms-vs-oracle", cases, worst, 1e-10)


def check_gradient(seed: int = 13, count: int = 60, step: float = 1e-5) -> CheckResult:
    """exact_nll_gradient vs central finite differences of exact_nll."""
    rng = RngStream(seed)
    shapes = [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1), (1, 3), (4, 1), (1, 4), (3, 2), (2, 3)]
    worst = 0.0
    for i in range(count):
        n, m = shapes[i % len(shapes)]
        pool = (CLASSICAL_POOL, QUANTUM_POOL)[i % 2]
        beta = (0.5, 1.0, 2.0)[i % 3]
        params = random_params(rng.spawn(i), n, m, pool, beta, scale=0.6)
        q = rng.spawn(1000 + i).dirichlet(np.ones(1 << n))
        grad = exact_nll_gradient(params, q)
        theta = params.flat()
        fd = np.empty_like(theta)
        for idx in range(theta.size):
            plus, minus = theta.copy(), theta.copy()
            plus[idx] += step
            minus[idx] -= step
            fd[idx] = (exact_nll(params.with_flat(plus), q)
                       - exact_nll(params.with_flat(minus), q)) / (2 * step)
        worst = max(worst, float(np.abs(grad - fd).max()))
    return CheckResult("gradient-vs-finite-diff", count, worst, 1e-6)


def check_shot_unbiasedness(seed: int = 17, estimates: int = 10_000) -> CheckResult:
    """Mean of single-shot estimates vs the exact gradient, in standard errors."""
    rng = RngStream(seed)
    params = random_params(rng.spawn(0), 2, 1, QUANTUM_POOL, scale=0.7)
    q = rng.spawn(1).dirichlet(np.ones(4))
    exact = exact_nll_gradient(params, q)
    draws = np.empty((estimates, exact.size))
    for i in range(estimates):
        draws[i] = nll_shot_update(params, q, 1, rng.spawn(100 + i)).flat()
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / np.sqrt(estimates)
    dev = np.abs(mean - exact)
    z = np.where(se > 0, dev / np.where(se > 0, se, 1.0),
                 np.where(dev > 0, np.inf, 0.0))
    return CheckResult("shot-estimator-unbiased", exact.size, float(z.max()), 3.0)


def check_logistic_reduction(seed: int = 19, count: int = 200) -> CheckResult:
    """Z-pool hidden conditionals equal the logistic form 1/(1+exp(-2*beta*c))."""
    rng = RngStream(seed)
    worst = 0.0
    for i in range(count):
        n = 1 + i % 4
        m = 1 + (i // 4) % 4
        beta = (0.5, 1.0, 2.0)[i % 3]
        params = random_params(rng.spawn(i), n, m, CLASSICAL_POOL, beta, scale=1.2)
        for v in bit_table(n):
            spins = 1.0 - 2.0 * v.astype(np.float64)
            c = params.b[0] + spins @ params.w[0]
            sigma = 1.0 / (1.0 + np.exp(-2.0 * beta * c))
            table = hidden_conditional(params, v, "Z")
            worst = max(worst, float(np.abs(table[:, 1] - sigma).max()))
    return CheckResult("classical-reduction-logistic", count, worst, 1e-12)


def check_classical_cd_match(seed: int = 23, count: int = 40) -> CheckResult:
    """Generalized CD on pool {Z} is draw-for-draw the classical update."""
    rng = RngStream(seed)
    worst = 0.0
    for i in range(count):
        n = 2 + i % 3
        m = 1 + i % 3
        params = random_params(rng.spawn(i), n, m, CLASSICAL_POOL, scale=0.8)
        batch = (rng.spawn(1000 + i).random((6, n)) < 0.5).astype(np.uint8)
        streams = [RngStream(seed + 1, (i, branch)) for branch in (0, 0)]
        chain_streams = [RngStream(seed + 2, (i, branch)) for branch in (0, 0)]
        results = []
        for update, stream, chain_stream in zip(
                (generalized_cd_update, classical_cd_update), streams, chain_streams):
            chains = init_chains(params, batch, 5, chain_stream)
            est = update(params, batch, chains, 3, stream)
            results.append((est.flat(), chains.v_idx.copy(), chains.h_bits.copy()))
        worst = max(worst, float(np.abs(results[0][0] - results[1][0]).max()))
        if not (np.array_equal(results[0][1], results[1][1])
                and np.array_equal(results[0][2], results[1][2])):
            worst = max(worst, np.inf)
    return CheckResult("classical-reduction-cd", count, worst, 0.0)


def check_chain_convergence(seed: int = 29, chains: int = 10_000,
                            k: int = 200) -> CheckResult:
    """Total variation between the k-step chain marginal and the exact one.

    Parameter scale 0.6 keeps the conditionals soft enough that 200 sweeps
    dominate the mixing time (at scale 1.0 the classical case needs ~2000
    sweeps to reach the same accuracy, which checks mixing speed, not
    correctness).
    """
    rng = RngStream(seed)
    cases = [(3, 3, QUANTUM_POOL), (4, 2, QUANTUM_POOL),
             (2, 4, QUANTUM_POOL), (4, 2, CLASSICAL_POOL)]
    worst = 0.0
    for i, (n, m, pool) in enumerate(cases):
        params = random_params(rng.spawn(i), n, m, pool, scale=0.6)
        exact = visible_marginal(params)
        per_basis = chains // len(pool)
        finals = []
        for b, basis in enumerate(params.pool):
            stream = rng.spawn(100 + 10 * i + b)
            tables = BasisTables.build(params, basis)
            v_idx = stream.integers(0, 1 << n, size=per_basis)
            h_bits = (stream.random((per_basis, m)) < tables.p_hidden1[v_idx]).astype(np.uint8)
            for _ in range(k):
                v_idx, h_bits = _step_block(tables, h_bits, stream)
            finals.append(v_idx)
        v_all = np.concatenate(finals)
        emp = np.bincount(v_all, minlength=1 << n) / len(v_all)
        worst = max(worst, 0.5 * float(np.abs(emp - exact).sum()))
    return CheckResult("chain-convergence", len(cases), worst, 0.02)


ALL_CHECKS = (
    check_channel_equivalence,
    check_closed_forms,
    check_gradient,
    check_shot_unbiasedness,
    check_logistic_reduction,
    check_classical_cd_match,
    check_chain_convergence,
)

# the report names the checks print, for selecting a subset by name
CHECKS_BY_NAME = {
    "channel-vs-bayes": check_channel_equivalence,
    "closed-forms-vs-oracle": check_closed_forms,
    "gradient-vs-finite-diff": check_gradient,
    "shot-estimator-unbiased": check_shot_unbiasedness,
    "classical-reduction-logistic": check_logistic_reduction,
    "classical-reduction-cd": check_classical_cd_match,
    "chain-convergence": check_chain_convergence,
}


def run_validation(checks=ALL_CHECKS) -> list[CheckResult]:
    return [check() for check in checks]
