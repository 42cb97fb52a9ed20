import pickle

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqrbm.experiments import SampleLedger
from sqrbm.model import (
    CLASSICAL_POOL,
    QUANTUM_POOL,
    HiddenOutcome,
    ModelParams,
    bit_table,
    index_from_bits,
    log_visible_conditional,
)
from sqrbm.sampling import (
    BasisTables,
    ChainState,
    RngStream,
    _step_block,
    gibbs_chain,
    init_chains,
    sample_hidden,
    sample_visible,
)
from sqrbm.validate import random_params


def test_rng_replay_and_independence():
    a = RngStream(42, (1, 2))
    b = RngStream(42, (1, 2))
    assert np.array_equal(a.random(10), b.random(10))
    assert np.array_equal(a.integers(0, 100, size=5), b.integers(0, 100, size=5))
    c = RngStream(42, (1, 3))
    assert not np.array_equal(RngStream(42, (1, 2)).random(10), c.random(10))
    child = a.spawn(7)
    assert child.seed == 42 and child.path == (1, 2, 7)


def test_rng_pickle_resumes_mid_stream():
    stream = RngStream(9)
    stream.random(100)
    clone = pickle.loads(pickle.dumps(stream))
    assert np.array_equal(stream.random(20), clone.random(20))


@given(st.integers(0, 10**6), st.integers(1, 3), st.integers(1, 3))
@settings(max_examples=25)
def test_basis_tables_match_log_conditional(seed, n, m):
    params = random_params(RngStream(seed), n, m, QUANTUM_POOL)
    rng = RngStream(seed + 1)
    for basis in params.pool:
        tables = BasisTables.build(params, basis)
        h_bits = (rng.random(m) < 0.5).astype(np.uint8)
        expected = log_visible_conditional(params, HiddenOutcome(basis=basis, bits=h_bits))
        got = tables.log_base + h_bits.astype(np.float64) @ tables.log_flip.T
        assert np.abs(got - expected).max() <= 1e-10
        assert tables.p_hidden1.shape == (1 << n, m)
        assert (tables.p_hidden1 >= 0).all() and (tables.p_hidden1 <= 1).all()


def test_step_block_ledger_counts():
    params = random_params(RngStream(3), 2, 2, QUANTUM_POOL)
    tables = BasisTables.build(params, "X")
    ledger = SampleLedger()
    h = np.zeros((7, 2), dtype=np.uint8)
    _step_block(tables, h, RngStream(4), ledger)
    assert ledger.quantum == 7 and ledger.classical == 7


def test_pinned_model_is_deterministic():
    # b = +50 pins every hidden bit to 1; a = +50 pins every visible bit to 1
    n, m = 3, 2
    params = ModelParams(n=n, m=m, pool=CLASSICAL_POOL,
                         a=np.full(n, 50.0), b=np.full((1, m), 50.0),
                         w=np.zeros((1, n, m)))
    rng = RngStream(5)
    h = sample_hidden(params, [1, 1, 1], "Z", rng)
    assert h.basis == "Z" and h.bits.tolist() == [1, 1]
    v = sample_visible(params, h, rng)
    assert v.tolist() == [1, 1, 1]
    state = gibbs_chain(params, ChainState(v=np.zeros(n, dtype=np.uint8),
                                           h=HiddenOutcome(basis="Z", bits=[0, 0])),
                        k=3, rng=rng)
    assert state.v.tolist() == [1, 1, 1]
    assert state.h.bits.tolist() == [1, 1]
    assert state.age == 3


def test_gibbs_chain_ledger_and_age():
    params = random_params(RngStream(6), 2, 1, QUANTUM_POOL)
    ledger = SampleLedger()
    state = ChainState(v=np.array([0, 1], dtype=np.uint8),
                       h=HiddenOutcome(basis="Y", bits=[0]))
    out = gibbs_chain(params, state, k=5, rng=RngStream(7), ledger=ledger)
    assert out.age == 5
    assert ledger.quantum == 5 and ledger.classical == 5
    # same stream, same start: the trajectory is replayable
    again = gibbs_chain(params, state, k=5, rng=RngStream(7))
    assert np.array_equal(again.v, out.v)
    assert np.array_equal(again.h.bits, out.h.bits)


def test_init_chains_layout():
    params = random_params(RngStream(8), 3, 2, QUANTUM_POOL)
    data = bit_table(3)[[1, 4, 6]]
    chains = init_chains(params, data, 5, RngStream(9))
    assert chains.pool == QUANTUM_POOL
    assert chains.v_idx.shape == (3, 5)
    assert chains.h_bits.shape == (3, 5, 2)
    data_ints = {index_from_bits(row) for row in data}
    assert set(chains.v_idx.ravel().tolist()) <= data_ints
    states = chains.states(3)
    assert len(states) == 15
    assert {s.h.basis for s in states} == set(QUANTUM_POOL)
