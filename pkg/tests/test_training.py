import numpy as np
import pytest

from sqrbm.datasets import Dataset
from sqrbm.exact import exact_nll_gradient
from sqrbm.experiments import SampleLedger, run_single
from sqrbm.model import (
    CLASSICAL_POOL,
    QUANTUM_POOL,
    ModelParams,
    bit_table,
    visible_marginal,
)
from sqrbm.sampling import RngStream, init_chains
from sqrbm.training import (
    AdamState,
    GradientEstimate,
    TrainConfig,
    _phase_statistics,
    adam_step,
    generalized_cd_update,
    initialize_params,
    learning_rate,
    nll_shot_update,
    shot_cost,
)
from sqrbm.validate import random_params


def make_estimate(params, value):
    flat = np.full(params.flat().size, value)
    npool = len(params.pool)
    a, b, w = np.split(flat, np.cumsum([params.n, npool * params.m])[:2])
    return GradientEstimate(da=a, db=b.reshape(npool, params.m),
                            dw=w.reshape(npool, params.n, params.m))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(iterations=0)
    with pytest.raises(ValueError):
        TrainConfig(trainer="sgd")
    with pytest.raises(ValueError):
        TrainConfig(cd_steps=0)
    with pytest.raises(ValueError):
        TrainConfig(eta_start=1e-4, eta_end=1e-2)
    with pytest.raises(ValueError):
        TrainConfig(eta_end=0.0)
    with pytest.raises(ValueError):
        TrainConfig(statistics="parity")
    with pytest.raises(ValueError):
        TrainConfig(grad_clamp=0.0)


def test_learning_rate_schedule_endpoints():
    config = TrainConfig(iterations=5000, eta_start=0.01, eta_end=1e-4)
    assert learning_rate(0, config) == pytest.approx(0.01, abs=1e-15)
    assert learning_rate(1, config) == pytest.approx(0.01, rel=1e-3)
    assert learning_rate(5000, config) == pytest.approx(1e-4, abs=1e-12)
    assert learning_rate(9000, config) == 1e-4  # floor holds past T


def test_adam_first_step_identity():
    params = ModelParams.zeros(2, 1, QUANTUM_POOL)
    config = TrainConfig(iterations=100, eta_start=0.01, eta_end=0.01)
    state = AdamState.for_params(params)
    estimate = make_estimate(params, 0.03)
    updated = adam_step(params, estimate, state, config)
    step = params.flat() - updated.flat()
    expected = 0.01 * 0.03 / (0.03 + config.adam_eps)
    assert np.abs(step - expected).max() <= 1e-12
    assert state.t == 1


def test_adam_zero_gradient_is_identity():
    params = random_params(RngStream(1), 2, 2, QUANTUM_POOL)
    state = AdamState.for_params(params)
    updated = adam_step(params, make_estimate(params, 0.0), state, TrainConfig())
    assert np.array_equal(updated.flat(), params.flat())


def test_adam_clamps_raw_estimate():
    params = ModelParams.zeros(2, 1, QUANTUM_POOL)
    config = TrainConfig()
    big = adam_step(params, make_estimate(params, 0.2), AdamState.for_params(params), config)
    capped = adam_step(params, make_estimate(params, 0.05), AdamState.for_params(params), config)
    assert np.array_equal(big.flat(), capped.flat())


def test_initialize_params_bias_matches_marginals():
    # with zero couplings, p(v_i = 1) = 1 / (1 + exp(2*beta*a_i)); the bias
    # init inverts that at the clipped empirical frequency
    data = np.array([[1, 1, 0], [1, 0, 0], [1, 1, 0], [1, 0, 1]], dtype=np.uint8)
    config = TrainConfig(init_scale=10.0)
    params = initialize_params(3, 2, QUANTUM_POOL, data, config, RngStream(2))
    zero_w = ModelParams(n=3, m=2, pool=QUANTUM_POOL, a=params.a,
                         b=np.zeros((3, 2)), w=np.zeros((3, 3, 2)))
    p = visible_marginal(zero_w)
    bits = bit_table(3).astype(np.float64)
    model_freq = p @ bits
    clipped = np.clip(data.mean(axis=0), 0.5 / 4, 1 - 0.5 / 4)
    assert np.abs(model_freq - clipped).max() <= 1e-6
    assert np.array_equal(params.b, np.zeros((3, 2)))
    assert params.w.std() > 0


def test_phase_statistics_conventions():
    v = np.array([[1]], dtype=np.uint8)
    h = np.array([[1]], dtype=np.uint8)
    v0 = np.array([[0]], dtype=np.uint8)
    h0 = np.array([[0]], dtype=np.uint8)

    pos = _phase_statistics(v, h, "bit")
    neg = _phase_statistics(v0, h0, "bit")
    deltas = [p - q for p, q in zip(pos, neg)]
    assert all(np.allclose(d, 1.0) for d in deltas)

    pos = _phase_statistics(v, h, "eigenvalue")
    neg = _phase_statistics(v0, h0, "eigenvalue")
    da, db, dw = (p - q for p, q in zip(pos, neg))
    assert np.allclose(da, -2.0) and np.allclose(db, -2.0) and np.allclose(dw, 0.0)


def test_cd_fixed_point_gives_zero_estimate():
    # saturated fields make every conditional deterministic (tanh(50) == 1.0
    # in float64), so data and model phases produce identical bitstrings and
    # the estimate vanishes exactly
    n, m = 3, 2
    params = ModelParams(n=n, m=m, pool=CLASSICAL_POOL, a=np.full(n, 50.0),
                         b=np.full((1, m), 50.0), w=np.zeros((1, n, m)))
    batch = np.ones((4, n), dtype=np.uint8)
    chains = init_chains(params, batch, 3, RngStream(3))
    for statistics in ("eigenvalue", "bit"):
        estimate = generalized_cd_update(params, batch, chains, 2, RngStream(4),
                                         statistics=statistics)
        assert np.abs(estimate.flat()).max() == 0.0


def test_cd_pinned_visible_zeroes_bias_estimate():
    # a three-basis field cannot pin any single-basis hidden conditional, but
    # a saturated visible bias still pins v in every phase, so the visible
    # component of the estimate is exactly zero
    n, m = 3, 2
    params = ModelParams(n=n, m=m, pool=QUANTUM_POOL, a=np.full(n, 50.0),
                         b=np.full((3, m), 50.0), w=np.zeros((3, n, m)))
    batch = np.ones((4, n), dtype=np.uint8)
    chains = init_chains(params, batch, 3, RngStream(3))
    estimate = generalized_cd_update(params, batch, chains, 2, RngStream(4))
    assert np.abs(estimate.da).max() == 0.0


def test_cd_ledger_and_samples_consumed():
    params = random_params(RngStream(5), 3, 2, QUANTUM_POOL)
    batch = bit_table(3)[[0, 3, 5]]

    # default estimator draws one hidden sample per data row per basis for
    # the positive phase, plus the chain steps
    ledger = SampleLedger()
    chains = init_chains(params, batch, 4, RngStream(6))
    estimate = generalized_cd_update(params, batch, chains, 7, RngStream(7), ledger)
    assert ledger.quantum == 3 * 7 * 4
    assert ledger.classical == 3 * (3 + 7 * 4)
    assert estimate.samples_consumed == ledger.quantum
    assert chains.age == 7

    # conditional-mean estimator: hidden values are closed forms, so only
    # the chain steps touch the ledger
    ledger = SampleLedger()
    chains = init_chains(params, batch, 4, RngStream(6))
    estimate = generalized_cd_update(params, batch, chains, 7, RngStream(7), ledger,
                                     estimator="rao-blackwell")
    assert ledger.quantum == 3 * 7 * 4
    assert ledger.classical == 3 * 7 * 4
    assert estimate.samples_consumed == ledger.quantum

    reset = generalized_cd_update(params, batch, None, 2, RngStream(8))
    assert reset.samples_consumed == 3 * 2 * 3


def test_cd_visible_accumulation_modes():
    params = random_params(RngStream(9), 2, 1, QUANTUM_POOL)
    batch = bit_table(2)[[1, 2]]
    per_basis = generalized_cd_update(params, batch, None, 2, RngStream(10),
                                      visible_accumulation="per-basis")
    mean = generalized_cd_update(params, batch, None, 2, RngStream(10),
                                 visible_accumulation="mean")
    assert np.abs(per_basis.da / 3.0 - mean.da).max() <= 1e-15
    assert np.array_equal(per_basis.db, mean.db)


def test_nll_shot_ledger_and_support():
    params = random_params(RngStream(11), 3, 1, QUANTUM_POOL)
    q = np.zeros(8)
    q[[1, 5, 6]] = 1 / 3
    ledger = SampleLedger()
    estimate = nll_shot_update(params, q, 4, RngStream(12), ledger)
    assert ledger.quantum == 3 * (3 + 1) * 4
    assert estimate.samples_consumed == ledger.quantum
    assert shot_cost(params, 3, 4) == ledger.quantum
    with pytest.raises(ValueError):
        nll_shot_update(params, np.zeros(8), 1, RngStream(13))
    with pytest.raises(ValueError):
        nll_shot_update(params, q, 0, RngStream(13))


def test_nll_estimator_mean_matches_exact_gradient():
    params = random_params(RngStream(14), 2, 1, QUANTUM_POOL, scale=0.7)
    q = RngStream(15).dirichlet(np.ones(4))
    exact = exact_nll_gradient(params, q)
    calls = 24
    draws = np.empty((calls, exact.size))
    for i in range(calls):
        draws[i] = nll_shot_update(params, q, 20000, RngStream(16, (i,))).flat()
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / np.sqrt(calls)
    z = np.abs(mean - exact) / np.where(se > 0, se, 1.0)
    z[se == 0] = np.where(np.abs(mean - exact)[se == 0] > 0, np.inf, 0.0)
    assert z.max() <= 3.5


def _exact_bitwise_cd_expectation(params, batch, statistics):
    """E[generalized_cd_update] with stationary negative phase, given batch."""
    from sqrbm.model import hidden_conditional

    p = visible_marginal(params)
    bits = bit_table(params.n).astype(np.float64)
    values = bits if statistics == "bit" else 1.0 - 2.0 * bits
    npool = len(params.pool)
    da = np.zeros(params.n)
    db = np.zeros((npool, params.m))
    dw = np.zeros((npool, params.n, params.m))
    vb = batch.astype(np.float64) if statistics == "bit" else 1.0 - 2.0 * batch
    for pi, basis in enumerate(params.pool):
        cond1 = np.stack([hidden_conditional(params, bit_table(params.n)[x], basis)[:, 1]
                          for x in range(1 << params.n)])  # (2^n, m) p(h=1|v)
        h_val = cond1 if statistics == "bit" else 1.0 - 2.0 * cond1
        batch_idx = batch.astype(np.int64) @ (1 << np.arange(params.n, dtype=np.int64))
        pos_v = vb.mean(axis=0)
        pos_h = h_val[batch_idx].mean(axis=0)
        pos_vh = np.einsum("bi,bj->ij", vb, h_val[batch_idx]) / len(batch)
        neg_v = p @ values
        neg_h = p @ h_val
        neg_vh = np.einsum("v,vi,vj->ij", p, values, h_val)
        da += pos_v - neg_v
        db[pi] = pos_h - neg_h
        dw[pi] = pos_vh - neg_vh
    return np.concatenate([da, db.ravel(), dw.ravel()])


@pytest.mark.slow
@pytest.mark.parametrize("statistics", ["bit", "eigenvalue"])
def test_cd_infinity_matches_stationary_statistics(statistics):
    # long chains (k=200) make the negative-phase endpoint stationary, so the
    # mean bitstring update equals data statistics minus model statistics in
    # either value convention; 100 calls x 1000 fresh chains bound the Monte
    # Carlo error
    params = random_params(RngStream(17), 2, 2, QUANTUM_POOL, scale=0.5)
    q = RngStream(18).dirichlet(np.full(4, 2.0))
    picks = RngStream(19).gen.choice(4, size=1000, p=q / q.sum())
    batch = bit_table(2)[picks]
    expected = _exact_bitwise_cd_expectation(params, batch, statistics)
    calls = 100
    draws = np.empty((calls, expected.size))
    for i in range(calls):
        draws[i] = generalized_cd_update(params, batch, None, 200, RngStream(20, (i,)),
                                         statistics=statistics,
                                         estimator="bitstring").flat()
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / np.sqrt(calls)
    z = np.abs(mean - expected) / np.where(se > 0, se, 1.0)
    z[se == 0] = np.where(np.abs(mean - expected)[se == 0] > 0, np.inf, 0.0)
    assert z.max() <= 3.5


@pytest.mark.slow
def test_cd_rao_blackwell_matches_stationary_statistics():
    # chains drawn directly from the stationary joint keep every one of the k
    # averaged steps stationary, so the conditional-mean update has the same
    # expectation as the bitstring one: data minus model statistics
    from sqrbm.sampling import BasisTables, ChainSet

    params = random_params(RngStream(17), 2, 2, QUANTUM_POOL, scale=0.5)
    q = RngStream(18).dirichlet(np.full(4, 2.0))
    picks = RngStream(19).gen.choice(4, size=1000, p=q / q.sum())
    batch = bit_table(2)[picks]
    expected = _exact_bitwise_cd_expectation(params, batch, "eigenvalue")
    p = visible_marginal(params)
    p = p / p.sum()
    tables = [BasisTables.build(params, basis) for basis in params.pool]
    count = 1000
    calls = 100
    draws = np.empty((calls, expected.size))
    for i in range(calls):
        rng = RngStream(22, (i,))
        v_idx = np.stack([rng.gen.choice(4, size=count, p=p) for _ in params.pool])
        h_bits = np.stack([
            (rng.random((count, params.m)) < t.p_hidden1[v_idx[pi]]).astype(np.uint8)
            for pi, t in enumerate(tables)])
        chains = ChainSet(pool=params.pool, v_idx=v_idx, h_bits=h_bits)
        draws[i] = generalized_cd_update(params, batch, chains, 5, rng,
                                         estimator="rao-blackwell").flat()
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / np.sqrt(calls)
    z = np.abs(mean - expected) / np.where(se > 0, se, 1.0)
    z[se == 0] = np.where(np.abs(mean - expected)[se == 0] > 0, np.inf, 0.0)
    assert z.max() <= 3.5


@pytest.mark.slow
def test_two_mode_target_kl_descent():
    patterns = np.array([[0, 1, 0, 1], [1, 0, 1, 0]], dtype=np.uint8)
    target = np.zeros(16)
    target[[0b1010, 0b0101]] = 0.5
    dataset = Dataset(name="two-mode", n=4,
                      samples=np.repeat(patterns, 6, axis=0),
                      exact_target=target, meta={})
    config = TrainConfig(iterations=2000, trainer="cd", cd_steps=10, chains=10,
                         eta_start=0.01, eta_end=1e-3, init_scale=10.0,
                         eval_every=500)
    wins = 0
    for seed in range(10):
        record = run_single("sqrbm", 1, dataset, config, RngStream(21, (seed,)))
        if record.final_kl <= 0.5 * record.rows[0].kl:
            wins += 1
    assert wins >= 8
