"""Benchmark targets: 3x3 bars-and-stripes and a discretized Gaussian.

Grids flatten row-major with bit index 0 as the integer LSB, so cell (r, c)
of a 3x3 grid is bit 3r + c. Integer-valued targets encode the value in
binary over n bits, bit 0 least significant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import _require, bit_table
from .sampling import RngStream


@dataclass
class Dataset:
    """Training samples plus (when known) the exact generating distribution."""

    name: str
    n: int
    samples: np.ndarray                      # (N, n) uint8
    exact_target: np.ndarray | None = None   # (2^n,) probabilities
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.uint8)
        _require(self.samples.ndim == 2 and self.samples.shape[1] == self.n,
                 f"samples must be (N, {self.n})")
        _require(len(self.samples) >= 1, "dataset must contain samples")
        if self.exact_target is not None:
            self.exact_target = np.asarray(self.exact_target, dtype=np.float64)
            _require(self.exact_target.shape == (1 << self.n,),
                     "exact target must cover all bitstrings")
            _require(abs(self.exact_target.sum() - 1.0) < 1e-9,
                     "exact target must be normalized")

    def empirical(self) -> np.ndarray:
        return empirical_distribution(self.samples, self.n)

    def support_size(self) -> int:
        return int((self.empirical() > 0).sum())


def empirical_distribution(samples: np.ndarray, n: int) -> np.ndarray:
    """Relative frequency of each of the 2^n bitstrings among the samples."""
    samples = np.asarray(samples, dtype=np.int64)
    _require(samples.ndim == 2 and samples.shape[1] == n, f"samples must be (N, {n})")
    idx = samples @ (1 << np.arange(n, dtype=np.int64))
    counts = np.bincount(idx, minlength=1 << n).astype(np.float64)
    return counts / counts.sum()


def bas_patterns(size: int = 3) -> np.ndarray:
    """All bars-and-stripes grids except the all-off and all-on ones.

    Bars switch whole columns, stripes whole rows; the two uniform grids
    belong to both families and are dropped entirely, leaving
    2*(2^size - 2) patterns (12 at size 3). Rows sorted by integer encoding.
    """
    pats = set()
    for mask in range(1, (1 << size) - 1):
        onoff = (mask >> np.arange(size)) & 1
        bars = np.repeat(onoff[None, :], size, axis=0)     # constant columns
        stripes = np.repeat(onoff[:, None], size, axis=1)  # constant rows
        for grid in (bars, stripes):
            pats.add(tuple(grid.reshape(-1).tolist()))
    arr = np.array(sorted(pats, key=lambda bits: sum(b << i for i, b in enumerate(bits))),
                   dtype=np.uint8)
    return arr


def gen_bas(size: int = 3) -> Dataset:
    """Bars-and-stripes: the pattern set itself is the (full-batch) sample set,
    and the exact target is uniform over it."""
    pats = bas_patterns(size)
    n = size * size
    target = np.zeros(1 << n)
    idx = pats.astype(np.int64) @ (1 << np.arange(n, dtype=np.int64))
    target[idx] = 1.0 / len(pats)
    return Dataset(name=f"bas{size}", n=n, samples=pats, exact_target=target,
                   meta={"size": size, "patterns": len(pats)})


def gen_gaussian(bins: int = 512, mu: float = 255.5, sigma: float = 32.0,
                 count: int = 10000, seed: int = 0) -> Dataset:
    """Gaussian profile over integer bins, binary-encoded, with iid draws.

    The exact target is the normalized density exp(-(x-mu)^2/(2 sigma^2)) on
    x in {0..bins-1}; samples are `count` inverse-CDF draws from it.
    """
    _require(bins >= 2 and (bins & (bins - 1)) == 0, "bins must be a power of two")
    n = bins.bit_length() - 1
    x = np.arange(bins, dtype=np.float64)
    target = np.exp(-((x - mu) ** 2) / (2.0 * sigma ** 2))
    target /= target.sum()
    rng = RngStream(seed, path=(9,))  # dataset stream, distinct from training streams
    u = rng.random(count)
    values = np.searchsorted(np.cumsum(target), u, side="right")
    samples = bit_table(n)[values]
    return Dataset(name=f"gaussian{bins}", n=n, samples=samples, exact_target=target,
                   meta={"bins": bins, "mu": mu, "sigma": sigma, "count": count,
                         "seed": seed})


# ---------------------------------------------------------------------------
# file format: text header, one bitstring per line (character position =
# bit index), then optional exact-target entries with full-precision decimals.

_FORMAT_TAG = "sqrbm-dataset v1"


def save_dataset(ds: Dataset, path) -> None:
    lines = [_FORMAT_TAG,
             f"name {ds.name}",
             f"n {ds.n}",
             f"count {len(ds.samples)}",
             f"target {0 if ds.exact_target is None else int((ds.exact_target > 0).sum())}",
             "samples"]
    lines.extend("".join(str(int(b)) for b in row) for row in ds.samples)
    if ds.exact_target is not None:
        lines.append("target-entries")
        for idx in np.flatnonzero(ds.exact_target > 0):
            lines.append(f"{idx} {format(ds.exact_target[idx], '.17e')}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset(path) -> Dataset:
    lines = Path(path).read_text().splitlines()
    _require(bool(lines) and lines[0] == _FORMAT_TAG, f"not a {_FORMAT_TAG} file: {path}")
    header: dict[str, str] = {}
    i = 1
    while i < len(lines) and lines[i] != "samples":
        key, _, val = lines[i].partition(" ")
        header[key] = val
        i += 1
    _require(i < len(lines), "missing samples section")
    n, count, ntarget = int(header["n"]), int(header["count"]), int(header["target"])
    rows = lines[i + 1:i + 1 + count]
    _require(len(rows) == count, f"expected {count} sample lines")
    samples = np.array([[int(ch) for ch in row] for row in rows], dtype=np.uint8)
    _require(samples.shape == (count, n), "sample lines have wrong width")
    target = None
    if ntarget:
        j = i + 1 + count
        _require(j < len(lines) and lines[j] == "target-entries", "missing target section")
        target = np.zeros(1 << n)
        entries = [ln for ln in lines[j + 1:] if ln.strip()]
        _require(len(entries) == ntarget, f"expected {ntarget} target entries")
        for ln in entries:
            sidx, sval = ln.split()
            target[int(sidx)] = float(sval)
    return Dataset(name=header.get("name", "unnamed"), n=n, samples=samples,
                   exact_target=target)
