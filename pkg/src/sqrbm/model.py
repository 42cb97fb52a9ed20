"""Core model: parameters and closed-form distributions.

A model has n visible units (always measured in the Z basis) and m hidden
units. The hidden units carry an operator pool: ("Z",) for the classical
machine, ("X", "Y", "Z") for the semi-quantum one. The energy operator is

    H = sum_i a_i Z_i
      + sum_{P in pool} sum_j b[P]_j P_{n+j}
      + sum_{P in pool} sum_{i,j} w[P]_{ij} Z_i P_{n+j}

and the model distribution is the visible-register marginal of the thermal
state exp(-beta*H)/Z. Because every visible operator is Z-diagonal, H is
block diagonal over visible bitstrings and each hidden unit sees a
single-qubit field; everything in this module exploits that structure, so
nothing here needs a 2^(n+m)-dimensional matrix.

Bits map to spins as spin = (-1)^bit, i.e. bit 0 -> +1, bit 1 -> -1 (the
Z eigenvalues). Bit index 0 is the least significant bit of the integer
encoding of a bitstring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

# Fixed basis order; iteration over a pool is always in this order.
BASES = ("X", "Y", "Z")
CLASSICAL_POOL = ("Z",)
QUANTUM_POOL = ("X", "Y", "Z")

# Enumeration ops materialize 2^n-length vectors; refuse beyond this.
MAX_ENUM_BITS = 24


class CapacityError(RuntimeError):
    """Requested an exhaustive computation beyond the supported size."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


# ---------------------------------------------------------------------------
# bit/index helpers

_BIT_TABLES: dict[int, np.ndarray] = {}
_SPIN_TABLES: dict[int, np.ndarray] = {}


def bits_from_index(index: int, n: int) -> np.ndarray:
    """Length-n 0/1 array for an integer; bit 0 is the LSB."""
    _require(0 <= index < (1 << n), f"index {index} out of range for {n} bits")
    return (index >> np.arange(n)) & 1


def index_from_bits(bits: np.ndarray) -> int:
    bits = np.asarray(bits)
    return int(bits @ (1 << np.arange(bits.shape[-1], dtype=np.int64)))


def bit_table(n: int) -> np.ndarray:
    """(2^n, n) uint8 table of all bitstrings, row index = integer encoding."""
    if n > MAX_ENUM_BITS:
        raise CapacityError(f"enumeration over {n} bits exceeds guard of {MAX_ENUM_BITS}")
    if n not in _BIT_TABLES:
        idx = np.arange(1 << n, dtype=np.int64)
        _BIT_TABLES[n] = ((idx[:, None] >> np.arange(n)) & 1).astype(np.uint8)
    return _BIT_TABLES[n]


def spin_table(n: int) -> np.ndarray:
    """(2^n, n) float table of (-1)^bit spins."""
    if n not in _SPIN_TABLES:
        _SPIN_TABLES[n] = 1.0 - 2.0 * bit_table(n).astype(np.float64)
    return _SPIN_TABLES[n]


def spins(bits) -> np.ndarray:
    """(-1)^bit as float array, any shape."""
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


# ---------------------------------------------------------------------------
# parameters


@dataclass
class ModelParams:
    """All couplings of one machine.

    a: (n,) visible biases; b: (npool, m) hidden biases; w: (npool, n, m)
    couplings. Rows of b/w follow the pool's basis order. Treated as
    immutable; training builds new instances.
    """

    n: int
    m: int
    pool: tuple[str, ...]
    a: np.ndarray
    b: np.ndarray
    w: np.ndarray
    beta: float = 1.0

    def __post_init__(self):
        _require(self.n >= 1 and self.m >= 1, "need at least one unit on each side")
        pool = tuple(self.pool)
        _require(pool in (CLASSICAL_POOL, QUANTUM_POOL),
                 f"pool must be {CLASSICAL_POOL} or {QUANTUM_POOL}, got {pool}")
        self.pool = pool
        self.a = np.asarray(self.a, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.w = np.asarray(self.w, dtype=np.float64)
        k = len(pool)
        _require(self.a.shape == (self.n,), f"a must have shape ({self.n},)")
        _require(self.b.shape == (k, self.m), f"b must have shape ({k}, {self.m})")
        _require(self.w.shape == (k, self.n, self.m), f"w must have shape ({k}, {self.n}, {self.m})")
        _require(self.beta > 0, "beta must be positive")
        for name, arr in (("a", self.a), ("b", self.b), ("w", self.w)):
            _require(bool(np.isfinite(arr).all()), f"{name} contains non-finite entries")

    @classmethod
    def zeros(cls, n: int, m: int, pool: tuple[str, ...], beta: float = 1.0) -> "ModelParams":
        k = len(tuple(pool))
        return cls(n=n, m=m, pool=tuple(pool), a=np.zeros(n),
                   b=np.zeros((k, m)), w=np.zeros((k, n, m)), beta=beta)

    def basis_index(self, basis: str) -> int:
        _require(basis in self.pool, f"basis {basis!r} not in pool {self.pool}")
        return self.pool.index(basis)

    def copy(self) -> "ModelParams":
        return replace(self, a=self.a.copy(), b=self.b.copy(), w=self.w.copy())

    def flat(self) -> np.ndarray:
        """Parameter vector in the canonical order a, b, w (row-major)."""
        return np.concatenate([self.a, self.b.ravel(), self.w.ravel()])

    def with_flat(self, theta: np.ndarray) -> "ModelParams":
        theta = np.asarray(theta, dtype=np.float64)
        k = len(self.pool)
        sizes = (self.n, k * self.m, k * self.n * self.m)
        _require(theta.shape == (sum(sizes),), "flat vector has wrong length")
        a, b, w = np.split(theta, np.cumsum(sizes)[:-1])
        return replace(self, a=a.copy(), b=b.reshape(k, self.m).copy(),
                       w=w.reshape(k, self.n, self.m).copy())


@dataclass
class HiddenOutcome:
    """One hidden-register measurement record: which basis, which bits."""

    basis: str
    bits: np.ndarray

    def __post_init__(self):
        _require(self.basis in BASES, f"unknown basis {self.basis!r}")
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        _require(self.bits.ndim == 1, "bits must be a flat vector")
        _require(bool(np.isin(self.bits, (0, 1)).all()), "bits must be 0/1")


@dataclass
class EffectiveField:
    """Per-hidden-unit field 3-vector, ordered (X, Y, Z); absent pool axes are 0."""

    components: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.components = np.asarray(self.components, dtype=np.float64)
        _require(self.components.shape == (3,), "field must be a 3-vector")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.components))

    def component(self, basis: str) -> float:
        return float(self.components[BASES.index(basis)])


# ---------------------------------------------------------------------------
# closed forms
#
# Given a visible bitstring v, hidden unit j sees the single-qubit operator
# sum_P c[P] P with c[P] = b[P]_j + sum_i (-1)^{v_i} w[P]_{ij}. The field for
# outcome bit h_j is phi[P] = (-1)^{h_j} c[P]; its norm r is outcome-
# independent. The thermal weight of outcome (j, h_j) in basis P is
#     D = cosh(x) - (phi[P]/r) sinh(x),   x = beta * r,
# and summing over h_j gives 2 cosh(x) regardless of the basis.


def _unit_fields(params: ModelParams, vspin: np.ndarray) -> np.ndarray:
    """c[..., j, p] for visible spin rows; shape (..., m, npool)."""
    return np.einsum("...i,pij->...jp", vspin, params.w) + params.b.T


def effective_field(params: ModelParams, v, j: int, h_j: int) -> EffectiveField:
    """Field 3-vector of hidden unit j given visible bits v and outcome bit h_j."""
    _require(0 <= j < params.m, f"hidden index {j} out of range")
    _require(h_j in (0, 1), "h_j must be 0 or 1")
    v = np.asarray(v)
    _require(v.shape == (params.n,), f"v must have {params.n} bits")
    c = _unit_fields(params, spins(v))[j]  # (npool,)
    comp = np.zeros(3)
    for p, basis in enumerate(params.pool):
        comp[BASES.index(basis)] = c[p]
    return EffectiveField(components=(-1.0) ** h_j * comp)


def _sinhc(x: np.ndarray) -> np.ndarray:
    """sinh(x)/x with the x=0 limit filled in."""
    x = np.asarray(x, dtype=np.float64)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x * x / 6.0, np.sinh(safe) / safe)


def basis_weight(phi: EffectiveField, basis: str) -> float:
    """Thermal weight cosh|phi| - phi_P * sinh|phi|/|phi| of one outcome.

    Strictly positive whenever |phi_P| < |phi| and equal to exp(-phi_P)
    when phi has only the P component.
    """
    _require(basis in BASES, f"unknown basis {basis!r}")
    r = phi.norm
    return float(np.cosh(r) - phi.component(basis) * _sinhc(r))


def _log_joint_weight_terms(params: ModelParams, vspin: np.ndarray, basis: str,
                            hsign: np.ndarray) -> np.ndarray:
    """log D summed over hidden units, for rows of visible spins.

    hsign is (-1)^{h_j}, shape (m,). Stable for any field size via
    log D = x + log((1-rho)/2 + (1+rho)/2 * exp(-2x)), rho = phi_P/r in [-1,1].
    """
    p = params.basis_index(basis)
    c = _unit_fields(params, vspin)          # (..., m, npool)
    r = np.linalg.norm(c, axis=-1)           # (..., m)
    with np.errstate(invalid="ignore"):
        rho = np.where(r > 0, c[..., p] / np.where(r > 0, r, 1.0), 0.0)
    # |c_P| <= r mathematically; clip the ulp-level excess so log() stays finite
    rho = np.clip(rho * hsign, -1.0, 1.0)
    x = params.beta * r
    log_d = x + np.log((1.0 - rho) / 2.0 + (1.0 + rho) / 2.0 * np.exp(-2.0 * x))
    return log_d.sum(axis=-1)


def hidden_conditional(params: ModelParams, v, basis: str) -> np.ndarray:
    """(m, 2) table of p(h_j = 0 | v) and p(h_j = 1 | v) in the given basis.

    Factorizes over hidden units. Each unit's law is
    p(h_j = s | v) = (1 - (-1)^s rho_j tanh(beta r_j)) / 2 with
    rho_j = c_j[P]/r_j, which is overflow-free for any field size.
    """
    v = np.asarray(v)
    _require(v.shape == (params.n,), f"v must have {params.n} bits")
    p = params.basis_index(basis)
    c = _unit_fields(params, spins(v))       # (m, npool)
    r = np.linalg.norm(c, axis=-1)
    rho = np.clip(np.where(r > 0, c[:, p] / np.where(r > 0, r, 1.0), 0.0), -1.0, 1.0)
    t = rho * np.tanh(params.beta * r)
    out = np.empty((params.m, 2))
    out[:, 0] = (1.0 - t) / 2.0
    out[:, 1] = (1.0 + t) / 2.0
    return out


def log_visible_conditional(params: ModelParams, h: HiddenOutcome) -> np.ndarray:
    """Unnormalized log-weights over all 2^n visible bitstrings given h."""
    _require(h.bits.shape == (params.m,), f"h must have {params.m} bits")
    sv = spin_table(params.n)
    hsign = spins(h.bits)
    log_w = -params.beta * (sv @ params.a)
    log_w += _log_joint_weight_terms(params, sv, h.basis, hsign)
    return log_w


def visible_conditional_weights(params: ModelParams, h: HiddenOutcome) -> np.ndarray:
    """Strictly positive weight vector over visible bitstrings, w(v) ∝ p(v | h).

    Scaled so the largest weight is 1 (any common scale is immaterial);
    normalize to get the conditional distribution.
    """
    log_w = log_visible_conditional(params, h)
    return np.exp(log_w - log_w.max())


def log_visible_marginal(params: ModelParams) -> np.ndarray:
    """Normalized log p(v) over all 2^n visible bitstrings."""
    sv = spin_table(params.n)
    c = _unit_fields(params, sv)                    # (2^n, m, npool)
    x = params.beta * np.linalg.norm(c, axis=-1)    # (2^n, m)
    # log sum_{h_j} D = log(2 cosh x) = x + log1p(exp(-2x)), per hidden unit
    log_p = -params.beta * (sv @ params.a) + (x + np.log1p(np.exp(-2.0 * x))).sum(axis=1)
    log_p -= log_p.max()
    return log_p - np.log(np.exp(log_p).sum())


def visible_marginal(params: ModelParams) -> np.ndarray:
    """Model distribution over visible bitstrings; sums to 1."""
    p = np.exp(log_visible_marginal(params))
    return p / p.sum()


# ---------------------------------------------------------------------------
# checkpoint format
#
# Plain text, self-describing:
#   sqrbm-model v1
#   n <int> / m <int> / pool <XYZ|Z> / beta <float>
#   params
#   one decimal per line, 17 significant digits, order a then b then w
#   (row-major), exact round-trip.

_FORMAT_TAG = "sqrbm-model v1"


def _fmt(x: float) -> str:
    return format(float(x), ".17e")


def save_checkpoint(params: ModelParams, path) -> None:
    lines = [_FORMAT_TAG,
             f"n {params.n}",
             f"m {params.m}",
             f"pool {''.join(params.pool)}",
             f"beta {_fmt(params.beta)}",
             "params"]
    lines.extend(_fmt(x) for x in params.flat())
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> ModelParams:
    lines = Path(path).read_text().splitlines()
    _require(bool(lines) and lines[0] == _FORMAT_TAG,
             f"not a {_FORMAT_TAG} checkpoint: {path}")
    header: dict[str, str] = {}
    i = 1
    while i < len(lines) and lines[i] != "params":
        key, _, val = lines[i].partition(" ")
        header[key] = val
        i += 1
    _require(i < len(lines), "missing params section")
    for key in ("n", "m", "pool", "beta"):
        _require(key in header, f"missing header field {key!r}")
    n, m = int(header["n"]), int(header["m"])
    pool = tuple(header["pool"])
    beta = float(header["beta"])
    values = np.array([float(s) for s in lines[i + 1:] if s.strip()])
    k = len(pool)
    expected = n + k * m + k * n * m
    _require(values.size == expected,
             f"expected {expected} parameter values, found {values.size}")
    return ModelParams.zeros(n, m, pool, beta=beta).with_flat(values)


def checkpoint_roundtrip_exact(params: ModelParams, path) -> bool:
    """Convenience check: save then load reproduces every float bit-exactly."""
    save_checkpoint(params, path)
    back = load_checkpoint(path)
    return (np.array_equal(params.flat(), back.flat())
            and math.isclose(back.beta, params.beta, rel_tol=0, abs_tol=0)
            and back.pool == params.pool)
