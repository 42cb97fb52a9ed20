"""Dense brute-force oracle for small models.

Everything here works on the full 2^(n+m)-dimensional operator algebra:
build the energy operator from Pauli words, exponentiate it by
eigendecomposition, and read probabilities off projectors. Deliberately
independent of the factorized closed forms in model.py so the two can be
checked against each other; the only shared code is parameter bookkeeping
and bit tables.

Guards: dense ops refuse n+m > 12 qubits (a 4096x4096 complex matrix).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .model import (
    BASES,
    CapacityError,
    HiddenOutcome,
    ModelParams,
    _require,
    bit_table,
)

MAX_DENSE_QUBITS = 12

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# Orthonormal eigenvectors of each Pauli; column s has eigenvalue (-1)^s.
_BASIS_VECTORS = {
    "X": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "Y": np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2),
    "Z": np.eye(2, dtype=complex),
}


@dataclass(frozen=True)
class HamiltonianTerm:
    """One Pauli word of the energy operator.

    word[q] is the single-qubit operator on qubit q; qubits 0..n-1 are the
    visible register, n..n+m-1 the hidden one. slot names the parameter the
    coefficient came from, in flat-vector order.
    """

    word: str
    coefficient: float
    slot: tuple


def _check_dense(n_qubits: int) -> None:
    if n_qubits > MAX_DENSE_QUBITS:
        raise CapacityError(
            f"dense oracle limited to {MAX_DENSE_QUBITS} qubits, got {n_qubits}")


def dense_pauli_string(word: str, n: int, m: int) -> np.ndarray:
    """Dense matrix of a Pauli word under the joint index v*2^m + h.

    Visible bit i sits at joint bit m+i, hidden bit j at joint bit j, and
    bit 0 of each register integer is its least significant bit; the kron
    chain therefore runs visible n-1..0 then hidden m-1..0.
    """
    _require(len(word) == n + m, "word length must be n+m")
    _check_dense(n + m)
    chain = [_PAULI[word[i]] for i in range(n - 1, -1, -1)]
    chain += [_PAULI[word[n + j]] for j in range(m - 1, -1, -1)]
    return reduce(np.kron, chain)


def hamiltonian_terms(params: ModelParams) -> list[HamiltonianTerm]:
    """All terms, ordered exactly like ModelParams.flat()."""
    n, m = params.n, params.m
    ident = ["I"] * (n + m)
    terms = []
    for i in range(n):
        word = ident.copy()
        word[i] = "Z"
        terms.append(HamiltonianTerm("".join(word), float(params.a[i]), ("a", i)))
    for p, basis in enumerate(params.pool):
        for j in range(m):
            word = ident.copy()
            word[n + j] = basis
            terms.append(HamiltonianTerm("".join(word), float(params.b[p, j]),
                                         ("b", basis, j)))
    for p, basis in enumerate(params.pool):
        for i in range(n):
            for j in range(m):
                word = ident.copy()
                word[i] = "Z"
                word[n + j] = basis
                terms.append(HamiltonianTerm("".join(word), float(params.w[p, i, j]),
                                             ("w", basis, i, j)))
    return terms


def build_hamiltonian(params: ModelParams) -> np.ndarray:
    """Dense Hermitian energy operator on 2^(n+m) dimensions."""
    _check_dense(params.n + params.m)
    dim = 1 << (params.n + params.m)
    h = np.zeros((dim, dim), dtype=complex)
    for term in hamiltonian_terms(params):
        if term.coefficient != 0.0:
            h += term.coefficient * dense_pauli_string(term.word, params.n, params.m)
    return h


def gibbs_state(hamiltonian: np.ndarray, beta: float) -> np.ndarray:
    """exp(-beta*H)/Tr[...] by eigendecomposition with spectral shift."""
    _require(beta > 0, "beta must be positive")
    evals, vecs = np.linalg.eigh(hamiltonian)
    weights = np.exp(-beta * (evals - evals.min()))  # shift: no overflow
    rho = (vecs * weights) @ vecs.conj().T
    return rho / weights.sum()


def thermal_state(params: ModelParams) -> np.ndarray:
    return gibbs_state(build_hamiltonian(params), params.beta)


def _half_propagator(params: ModelParams) -> np.ndarray:
    """exp(-beta*H/2), spectrally shifted (harmless: it cancels on normalization)."""
    h = build_hamiltonian(params)
    evals, vecs = np.linalg.eigh(h)
    weights = np.exp(-0.5 * params.beta * (evals - evals.min()))
    return (vecs * weights) @ vecs.conj().T


def _hidden_state_vector(h: HiddenOutcome) -> np.ndarray:
    vec = np.array([1.0 + 0j])
    for j in range(len(h.bits) - 1, -1, -1):
        vec = np.kron(vec, _BASIS_VECTORS[h.basis][:, h.bits[j]])
    return vec


def oracle_visible_marginal(params: ModelParams) -> np.ndarray:
    """p(v) from diagonal blocks of the dense thermal state."""
    rho = thermal_state(params)
    diag = rho.diagonal().real
    return diag.reshape(1 << params.n, 1 << params.m).sum(axis=1)


def oracle_joint_distribution(params: ModelParams, basis: str) -> np.ndarray:
    """(2^n, 2^m) table of p(v, h) when visible is read in Z, hidden in `basis`."""
    _require(basis in params.pool, f"basis {basis!r} not in pool")
    rho = thermal_state(params)
    dv, dh = 1 << params.n, 1 << params.m
    blocks = rho.reshape(dv, dh, dv, dh)
    # unitary mapping hidden basis outcomes -> computational: columns are outcome vectors
    u = np.array([1.0 + 0j]).reshape(1, 1)
    for _ in range(params.m):
        u = np.kron(u, _BASIS_VECTORS[basis])
    # p(v, h) = <h|_P blocks[v,:,v,:] |h>_P
    joint = np.einsum("ah,vab,bh->vh", u.conj(), blocks[np.arange(dv), :, np.arange(dv), :], u)
    return joint.real


def channel_conditional(params: ModelParams, *, v=None, h: HiddenOutcome | None = None,
                        basis: str | None = None) -> np.ndarray:
    """Conditional distribution via the two-sided imaginary-time map.

    The map sends a reference state X to
        exp(-beta*H/2) X exp(-beta*H/2) / trace,
    and conditionals are measurements of the result:

    * hidden given visible: pass v (bits) and basis; the reference is
      |v><v| tensor I/2^m and the hidden register is read in `basis`;
      returns a distribution over 2^m outcomes.
    * visible given hidden: pass h; the reference is I/2^n tensor
      |h><h| in h.basis, and the visible register is read in Z;
      returns a distribution over 2^n outcomes.
    """
    _require((v is None) != (h is None), "pass exactly one of v, h")
    _check_dense(params.n + params.m)
    e = _half_propagator(params)
    dv, dh = 1 << params.n, 1 << params.m

    if v is not None:
        _require(basis is not None and basis in params.pool,
                 "hidden direction needs a basis from the pool")
        v = np.asarray(v)
        _require(v.shape == (params.n,), f"v must have {params.n} bits")
        vidx = int(v @ (1 << np.arange(params.n)))
        cols = vidx * dh + np.arange(dh)
        g = e[:, cols] @ e[cols, :] / dh  # E (|v><v| ⊗ I/2^m) E
        g /= np.trace(g).real
        reduced = np.einsum("vavb->ab", g.reshape(dv, dh, dv, dh))
        u = np.array([1.0 + 0j]).reshape(1, 1)
        for _ in range(params.m):
            u = np.kron(u, _BASIS_VECTORS[basis])
        probs = np.einsum("ah,ab,bh->h", u.conj(), reduced, u).real
    else:
        uvec = _hidden_state_vector(h)
        _require(uvec.shape == (dh,), f"h must have {params.m} bits")
        _require(h.basis in params.pool, f"basis {h.basis!r} not in pool")
        # columns of E restricted to |v'> ⊗ |h>_P for every v'
        block = e.reshape(dv * dh, dv, dh) @ uvec  # (dim, dv)
        g = block @ block.conj().T / dv
        g /= np.trace(g).real
        probs = np.einsum("vava->v", g.reshape(dv, dh, dv, dh)).real

    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def bayes_hidden_given_visible(params: ModelParams, v, basis: str) -> np.ndarray:
    """Reference conditional p(h|v) straight from the dense joint table."""
    v = np.asarray(v)
    vidx = int(v @ (1 << np.arange(params.n)))
    joint = oracle_joint_distribution(params, basis)
    row = joint[vidx]
    return row / row.sum()


def bayes_visible_given_hidden(params: ModelParams, h: HiddenOutcome) -> np.ndarray:
    """Reference conditional p(v|h) straight from the dense joint table."""
    hidx = int(np.asarray(h.bits) @ (1 << np.arange(params.m)))
    joint = oracle_joint_distribution(params, h.basis)
    col = joint[:, hidx]
    return col / col.sum()


def exact_nll(params: ModelParams, q: np.ndarray) -> float:
    """-sum_v q(v) log p(v) with p from the dense oracle."""
    q = np.asarray(q, dtype=np.float64)
    _require(q.shape == (1 << params.n,), "q must cover all visible bitstrings")
    _require(abs(q.sum() - 1.0) < 1e-9 and (q >= 0).all(), "q must be a distribution")
    p = oracle_visible_marginal(params)
    supp = q > 0
    return float(-(q[supp] * np.log(p[supp])).sum())


def exact_nll_gradient(params: ModelParams, q: np.ndarray) -> np.ndarray:
    """d(NLL)/d(theta) in ModelParams.flat() order.

    For each term H_i the derivative is
        beta * ( sum_v q(v) Tr[Pi_v rho H_i]/p(v) - Tr[rho H_i] ),
    the projected expectations normalized per visible outcome. Valid because
    every Pi_v commutes with H, which collapses the Duhamel integral.
    """
    q = np.asarray(q, dtype=np.float64)
    dv, dh = 1 << params.n, 1 << params.m
    _require(q.shape == (dv,), "q must cover all visible bitstrings")
    rho = thermal_state(params)
    p = rho.diagonal().real.reshape(dv, dh).sum(axis=1)
    supp = np.flatnonzero(q > 0)
    terms = hamiltonian_terms(params)
    grad = np.empty(len(terms))
    for k, term in enumerate(terms):
        op = dense_pauli_string(term.word, params.n, params.m)
        d = (rho @ op).diagonal().real.reshape(dv, dh).sum(axis=1)  # Tr[Pi_v rho H_i]
        model_term = d.sum()
        data_term = float((q[supp] * d[supp] / p[supp]).sum())
        grad[k] = params.beta * (data_term - model_term)
    return grad
