"""Seeded streams, conditional draws, and block Gibbs chains.

The conditional structure factorizes: hidden units are independent given the
visible register (per-unit Bernoulli draws) and the visible register given a
hidden outcome is a categorical over all 2^n bitstrings. A chain alternates
the two. One chain step costs one fresh thermal-register sample in the
accounting model, so ledgers count one quantum sample per visible draw and
one classical sample per hidden draw.

Randomness comes from Philox (counter-based) generators keyed by
(seed, stream path); identical keys give identical draw sequences on any
platform, which is what makes whole runs replayable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    HiddenOutcome,
    ModelParams,
    _require,
    _unit_fields,
    bit_table,
    hidden_conditional,
    log_visible_conditional,
    spin_table,
    spins,
)


@dataclass
class RngStream:
    """A named, replayable random stream.

    The (seed, path) pair fully determines every draw. spawn(i) derives an
    independent child stream; children never collide with the parent or with
    siblings of different index.
    """

    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.gen = np.random.Generator(np.random.Philox(seq))

    def spawn(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.path + (index,))

    # pass-throughs for the draws the package uses
    def random(self, size=None):
        return self.gen.random(size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size=size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def multinomial(self, n, pvals):
        return self.gen.multinomial(n, pvals)

    def dirichlet(self, alpha):
        return self.gen.dirichlet(alpha)

    def binomial(self, n, p):
        return self.gen.binomial(n, p)

    def __getstate__(self):
        return {"seed": self.seed, "path": self.path, "state": self.gen.bit_generator.state}

    def __setstate__(self, state):
        self.seed, self.path = state["seed"], state["path"]
        seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.gen = np.random.Generator(np.random.Philox(seq))
        self.gen.bit_generator.state = state["state"]


@dataclass
class ChainState:
    """One Gibbs chain: current visible bits, hidden outcome, and step count."""

    v: np.ndarray
    h: HiddenOutcome
    age: int = 0

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=np.uint8)
        _require(self.v.ndim == 1, "v must be a flat bit vector")
        _require(bool(np.isin(self.v, (0, 1)).all()), "v must be 0/1")
        _require(self.age >= 0, "age must be nonnegative")


@dataclass
class BasisTables:
    """Per-(params, basis) lookup tables over all 2^n visible bitstrings.

    log_base[v] = log p̃(v | all h_j = 0) and log_flip[v, j] is the change
    from flipping h_j to 1, so log p̃(v|h) = log_base[v] + h · log_flip[v].
    p_hidden1[v, j] = p(h_j = 1 | v). Built once per parameter snapshot and
    shared across chains; params must not change while the table is in use.
    """

    basis: str
    n: int
    m: int
    log_base: np.ndarray
    log_flip: np.ndarray
    p_hidden1: np.ndarray

    @classmethod
    def build(cls, params: ModelParams, basis: str) -> "BasisTables":
        p = params.basis_index(basis)
        sv = spin_table(params.n)
        c = _unit_fields(params, sv)                 # (2^n, m, npool)
        r = np.linalg.norm(c, axis=-1)
        rho = np.clip(np.where(r > 0, c[..., p] / np.where(r > 0, r, 1.0), 0.0), -1.0, 1.0)
        x = params.beta * r
        e2x = np.exp(-2.0 * x)
        log_d0 = x + np.log((1.0 - rho) / 2.0 + (1.0 + rho) / 2.0 * e2x)
        log_d1 = x + np.log((1.0 + rho) / 2.0 + (1.0 - rho) / 2.0 * e2x)
        log_vis = -params.beta * (sv @ params.a)
        return cls(basis=basis, n=params.n, m=params.m,
                   log_base=log_vis + log_d0.sum(axis=1),
                   log_flip=log_d1 - log_d0,
                   p_hidden1=(1.0 + rho * np.tanh(x)) / 2.0)


def _step_block(tables: BasisTables, h_bits: np.ndarray, rng: RngStream,
                ledger=None) -> tuple[np.ndarray, np.ndarray]:
    """One v-then-h Gibbs step for a block of chains; h_bits is (C, m)."""
    log_w = tables.log_base[None, :] + h_bits.astype(np.float64) @ tables.log_flip.T
    w = np.exp(log_w - log_w.max(axis=1, keepdims=True))
    cum = np.cumsum(w, axis=1)
    u = rng.random(len(h_bits)) * cum[:, -1]
    v_idx = (cum < u[:, None]).sum(axis=1)
    h_new = (rng.random(h_bits.shape) < tables.p_hidden1[v_idx]).astype(np.uint8)
    if ledger is not None:
        ledger.add_quantum(len(h_bits))
        ledger.add_classical(len(h_bits))
    return v_idx, h_new


def sample_hidden(params: ModelParams, v, basis: str, rng: RngStream,
                  ledger=None) -> HiddenOutcome:
    """Draw the hidden register given visible bits; classical cost only."""
    probs = hidden_conditional(params, v, basis)
    bits = (rng.random(params.m) < probs[:, 1]).astype(np.uint8)
    if ledger is not None:
        ledger.add_classical(1)
    return HiddenOutcome(basis=basis, bits=bits)


def sample_visible(params: ModelParams, h: HiddenOutcome, rng: RngStream,
                   ledger=None) -> np.ndarray:
    """Draw visible bits given a hidden outcome; one quantum sample."""
    log_w = log_visible_conditional(params, h)
    w = np.exp(log_w - log_w.max())
    cum = np.cumsum(w)
    idx = int((cum < rng.random() * cum[-1]).sum())
    if ledger is not None:
        ledger.add_quantum(1)
    return bit_table(params.n)[idx].copy()


def gibbs_chain(params: ModelParams, state: ChainState, k: int, rng: RngStream,
                ledger=None) -> ChainState:
    """Advance one chain k alternating steps (visible draw, then hidden draw)."""
    _require(k >= 1, "k must be at least 1")
    _require(state.v.shape == (params.n,), f"chain visible register must have {params.n} bits")
    _require(state.h.bits.shape == (params.m,), f"chain hidden register must have {params.m} bits")
    tables = BasisTables.build(params, state.h.basis)
    h_bits = state.h.bits[None, :]
    v_idx = None
    for _ in range(k):
        v_idx, h_bits = _step_block(tables, h_bits, rng, ledger)
    return ChainState(v=bit_table(params.n)[v_idx[0]].copy(),
                      h=HiddenOutcome(basis=state.h.basis, bits=h_bits[0]),
                      age=state.age + k)


@dataclass
class ChainSet:
    """Persistent negative-phase chains, one block per pool basis.

    v_idx[p] holds the integer encodings of the visible registers of the
    chains running in basis pool[p]; h_bits[p] the matching hidden bits.
    """

    pool: tuple[str, ...]
    v_idx: np.ndarray   # (npool, C) int64
    h_bits: np.ndarray  # (npool, C, m) uint8
    age: int = 0

    @property
    def chains(self) -> int:
        return self.v_idx.shape[1]

    def states(self, n: int) -> list[ChainState]:
        bt = bit_table(n)
        out = []
        for p, basis in enumerate(self.pool):
            for c in range(self.chains):
                out.append(ChainState(v=bt[self.v_idx[p, c]].copy(),
                                      h=HiddenOutcome(basis=basis, bits=self.h_bits[p, c].copy()),
                                      age=self.age))
        return out


def init_chains(params: ModelParams, data_bits: np.ndarray, count: int,
                rng: RngStream) -> ChainSet:
    """Start persistent chains at random data rows with conditioned hidden bits."""
    data_bits = np.asarray(data_bits, dtype=np.uint8)
    _require(data_bits.ndim == 2 and data_bits.shape[1] == params.n,
             "data must be (N, n) bits")
    npool = len(params.pool)
    rows = rng.integers(0, len(data_bits), size=(npool, count))
    v_bits = data_bits[rows]                                   # (npool, C, n)
    v_idx = v_bits.astype(np.int64) @ (1 << np.arange(params.n, dtype=np.int64))
    h_bits = np.zeros((npool, count, params.m), dtype=np.uint8)
    for p, basis in enumerate(params.pool):
        tables = BasisTables.build(params, basis)
        h_bits[p] = (rng.random((count, params.m)) < tables.p_hidden1[v_idx[p]]).astype(np.uint8)
    return ChainSet(pool=params.pool, v_idx=v_idx, h_bits=h_bits)
