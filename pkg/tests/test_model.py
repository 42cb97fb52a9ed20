import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqrbm.model import (
    CLASSICAL_POOL,
    QUANTUM_POOL,
    CapacityError,
    EffectiveField,
    HiddenOutcome,
    ModelParams,
    basis_weight,
    bit_table,
    bits_from_index,
    checkpoint_roundtrip_exact,
    effective_field,
    hidden_conditional,
    index_from_bits,
    load_checkpoint,
    save_checkpoint,
    spin_table,
    spins,
    visible_conditional_weights,
    visible_marginal,
)
from sqrbm.sampling import RngStream
from sqrbm.validate import random_params

pools = st.sampled_from([CLASSICAL_POOL, QUANTUM_POOL])
small_models = st.builds(
    lambda seed, n, m, pool, beta: random_params(RngStream(seed), n, m, pool, beta),
    seed=st.integers(0, 10**6), n=st.integers(1, 4), m=st.integers(1, 3),
    pool=pools, beta=st.sampled_from([0.5, 1.0, 2.0]))


def test_bit_helpers_roundtrip():
    for n in (1, 3, 6):
        for idx in range(1 << n):
            assert index_from_bits(bits_from_index(idx, n)) == idx
    table = bit_table(4)
    assert table.shape == (16, 4) and table.dtype == np.uint8
    assert np.array_equal(table[13], bits_from_index(13, 4))
    assert np.array_equal(spin_table(3), 1.0 - 2.0 * bit_table(3))
    assert spins([0, 1]).tolist() == [1.0, -1.0]


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(n=0, m=1, pool=CLASSICAL_POOL, a=np.zeros(0),
                    b=np.zeros((1, 1)), w=np.zeros((1, 0, 1)))
    with pytest.raises(ValueError):
        ModelParams(n=1, m=1, pool=("X",), a=np.zeros(1),
                    b=np.zeros((1, 1)), w=np.zeros((1, 1, 1)))
    with pytest.raises(ValueError):
        ModelParams(n=1, m=1, pool=CLASSICAL_POOL, a=np.zeros(2),
                    b=np.zeros((1, 1)), w=np.zeros((1, 1, 1)))
    with pytest.raises(ValueError):
        ModelParams.zeros(1, 1, CLASSICAL_POOL, beta=0.0)
    with pytest.raises(ValueError):
        ModelParams(n=1, m=1, pool=CLASSICAL_POOL, a=np.array([np.nan]),
                    b=np.zeros((1, 1)), w=np.zeros((1, 1, 1)))


@given(small_models)
def test_flat_roundtrip(params):
    again = params.with_flat(params.flat())
    assert np.array_equal(again.a, params.a)
    assert np.array_equal(again.b, params.b)
    assert np.array_equal(again.w, params.w)
    assert params.flat().size == params.n + len(params.pool) * params.m * (1 + params.n)


@given(small_models, st.integers(0, 10**6))
def test_field_sign_flip_and_norm(params, vseed):
    v = (RngStream(vseed).random(params.n) < 0.5).astype(np.uint8)
    for j in range(params.m):
        low = effective_field(params, v, j, 0)
        high = effective_field(params, v, j, 1)
        assert np.array_equal(high.components, -low.components)
        assert low.norm == high.norm
        assert abs(low.norm - np.linalg.norm(low.components)) <= 1e-12


def test_field_examples():
    zero = ModelParams.zeros(2, 2, QUANTUM_POOL)
    assert np.array_equal(effective_field(zero, [0, 1], 1, 0).components, np.zeros(3))

    params = ModelParams(n=1, m=1, pool=CLASSICAL_POOL, a=np.zeros(1),
                         b=np.array([[0.5]]), w=np.array([[[0.25]]]))
    assert effective_field(params, [0], 0, 0).component("Z") == pytest.approx(0.75)
    assert effective_field(params, [0], 0, 1).component("Z") == pytest.approx(-0.75)
    for basis in ("X", "Y"):
        assert effective_field(params, [0], 0, 0).component(basis) == 0.0


def test_field_input_checks():
    params = ModelParams.zeros(2, 1, CLASSICAL_POOL)
    with pytest.raises(ValueError):
        effective_field(params, [0, 1, 0], 0, 0)
    with pytest.raises(ValueError):
        effective_field(params, [0, 1], 1, 0)
    with pytest.raises(ValueError):
        effective_field(params, [0, 1], 0, 2)


def test_basis_weight_examples():
    assert basis_weight(EffectiveField(), "Z") == pytest.approx(1.0)
    t = 0.7
    phi = EffectiveField(components=np.array([0.0, 0.0, t]))
    assert basis_weight(phi, "Z") == pytest.approx(math.exp(-t), abs=1e-12)
    assert basis_weight(phi, "X") == pytest.approx(math.cosh(t), abs=1e-12)


@given(st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5)),
       st.sampled_from(["X", "Y", "Z"]))
def test_basis_weight_positive_and_pair_sum(components, basis):
    phi = EffectiveField(components=np.asarray(components))
    flipped = EffectiveField(components=-phi.components)
    d0 = basis_weight(phi, basis)
    d1 = basis_weight(flipped, basis)
    assert d0 > 0 and d1 > 0
    assert d0 + d1 == pytest.approx(2.0 * math.cosh(phi.norm), rel=1e-12)


@given(small_models, st.integers(0, 10**6))
def test_hidden_conditional_rows(params, vseed):
    v = (RngStream(vseed).random(params.n) < 0.5).astype(np.uint8)
    for basis in params.pool:
        table = hidden_conditional(params, v, basis)
        assert table.shape == (params.m, 2)
        assert (table >= 0).all()
        assert np.abs(table.sum(axis=1) - 1.0).max() <= 1e-12


def test_hidden_conditional_uniform_and_errors():
    zero = ModelParams.zeros(3, 2, CLASSICAL_POOL)
    assert np.allclose(hidden_conditional(zero, [0, 1, 0], "Z"), 0.5)
    with pytest.raises(ValueError):
        hidden_conditional(zero, [0, 1, 0], "X")


def test_visible_weights_zero_coupling():
    rng = RngStream(3)
    a = rng.normal(size=3)
    params = ModelParams(n=3, m=2, pool=CLASSICAL_POOL, a=a,
                         b=np.zeros((1, 2)), w=np.zeros((1, 3, 2)), beta=1.3)
    h = HiddenOutcome(basis="Z", bits=[0, 1])
    weights = visible_conditional_weights(params, h)
    assert (weights > 0).all()
    expected = np.exp(-1.3 * (spin_table(3) @ a))
    ratio = weights / expected
    assert np.abs(ratio / ratio[0] - 1.0).max() <= 1e-12

    uniform = visible_conditional_weights(ModelParams.zeros(3, 2, QUANTUM_POOL),
                                          HiddenOutcome(basis="Y", bits=[1, 0]))
    assert np.abs(uniform / uniform[0] - 1.0).max() <= 1e-12


@given(small_models)
def test_visible_marginal_normalized(params):
    p = visible_marginal(params)
    assert p.shape == (1 << params.n,)
    assert (p > 0).all()
    assert abs(p.sum() - 1.0) <= 1e-12


def test_visible_marginal_uniform_and_pool_equivalence():
    assert np.allclose(visible_marginal(ModelParams.zeros(3, 2, QUANTUM_POOL)), 1 / 8)

    classical = random_params(RngStream(11), 3, 2, CLASSICAL_POOL)
    b = np.zeros((3, 2))
    w = np.zeros((3, 3, 2))
    b[2] = classical.b[0]
    w[2] = classical.w[0]
    padded = ModelParams(n=3, m=2, pool=QUANTUM_POOL, a=classical.a, b=b, w=w)
    assert np.abs(visible_marginal(padded) - visible_marginal(classical)).max() <= 1e-14


def test_capacity_guard():
    big = ModelParams.zeros(25, 1, CLASSICAL_POOL)
    with pytest.raises(CapacityError):
        visible_marginal(big)
    with pytest.raises(CapacityError):
        visible_conditional_weights(big, HiddenOutcome(basis="Z", bits=[0]))


@given(small_models)
def test_checkpoint_roundtrip(tmp_path_factory, params):
    path = tmp_path_factory.mktemp("ckpt") / "model.txt"
    assert checkpoint_roundtrip_exact(params, path)
    loaded = load_checkpoint(path)
    assert loaded.pool == params.pool
    assert loaded.beta == params.beta
    assert np.array_equal(loaded.a, params.a)
    assert np.array_equal(loaded.b, params.b)
    assert np.array_equal(loaded.w, params.w)


def test_checkpoint_rejects_junk(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("not a checkpoint\n")
    with pytest.raises(ValueError):
        load_checkpoint(path)

    params = ModelParams.zeros(1, 1, CLASSICAL_POOL)
    good = tmp_path / "good.txt"
    save_checkpoint(params, good)
    truncated = "\n".join(good.read_text().splitlines()[:-1])
    (tmp_path / "short.txt").write_text(truncated + "\n")
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "short.txt")
