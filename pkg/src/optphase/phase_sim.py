"""Monte-Carlo sampling of canonical phase measurement outcomes.

Samples come from inverse-transform sampling on a tabulated CDF. For real
amplitudes the CDF has the closed form

    F(theta) = theta / 2pi + (1/pi) * sum_{m>=1} r_m sin(m theta) / m,
    r_m = sum_n c_n c_{n+m},

evaluated exactly on the table nodes and interpolated linearly between them.
Random numbers come from numpy's PCG64 bit generator. A batch is drawn in
fixed-size chunks, each seeded from ``SeedSequence(seed).spawn``, so the
result depends only on ``(seed, count)`` and not on how chunks are scheduled.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from optphase.errors import InvalidArgumentError
from optphase.fock_core import FockVector

TABLE_BITS = 16
CHUNK = 1 << 16
RNG_NAME = "numpy.random.PCG64"
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SampleBatch:
    thetas: np.ndarray
    seed: int
    state_id: str
    rng: str = RNG_NAME

    def __len__(self):
        return int(self.thetas.size)


def state_fingerprint(state: FockVector) -> str:
    return "fock:" + hashlib.sha256(state.coeffs.tobytes()).hexdigest()[:16]


def cdf_table(state: FockVector, bits: int = TABLE_BITS) -> tuple[np.ndarray, np.ndarray]:
    """Nodes on ``[0, 2 pi]`` and the exact canonical-phase CDF at them."""
    c = state.coeffs
    grid = np.linspace(0.0, TWO_PI, (1 << bits) + 1)
    cdf = grid / TWO_PI
    for m in range(1, c.size):
        r = float(np.dot(c[:-m], c[m:]))
        if r:
            cdf += r * np.sin(m * grid) / (m * math.pi)
    cdf[0], cdf[-1] = 0.0, 1.0
    # rounding can leave tiny decreases where the density vanishes
    return grid, np.maximum.accumulate(np.clip(cdf, 0.0, 1.0))


def _chunk_sizes(count: int) -> list[int]:
    full, rest = divmod(count, CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def sample_canonical(
    state: FockVector,
    count: int,
    seed: int,
    table_bits: int = TABLE_BITS,
    workers: int = 1,
) -> SampleBatch:
    """``count`` i.i.d. canonical phase outcomes in ``[0, 2 pi)``."""
    if count < 1:
        raise InvalidArgumentError("count must be >= 1")
    grid, cdf = cdf_table(state, table_bits)
    sizes = _chunk_sizes(count)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def draw(job):
        size, ss = job
        u = np.random.Generator(np.random.PCG64(ss)).random(size)
        return np.interp(u, cdf, grid)

    jobs = list(zip(sizes, seeds))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(draw, jobs))
    else:
        parts = [draw(j) for j in jobs]
    thetas = np.concatenate(parts)
    thetas[thetas >= TWO_PI] -= TWO_PI
    thetas.setflags(write=False)
    return SampleBatch(thetas, int(seed), state_fingerprint(state))


def estimate_mu(batch: SampleBatch | np.ndarray) -> tuple[float, float]:
    """``|mean exp(i theta)|`` and its delta-method standard error."""
    thetas = batch.thetas if isinstance(batch, SampleBatch) else np.asarray(batch, dtype=float)
    n = thetas.size
    if n == 0:
        raise InvalidArgumentError("empty batch")
    cos, sin = np.cos(thetas), np.sin(thetas)
    mc, ms = float(cos.mean()), float(sin.mean())
    mu = math.hypot(mc, ms)
    if n < 2:
        return mu, 0.0
    cov = np.cov(np.vstack([cos, sin]))
    if mu > 0:
        grad = np.array([mc, ms]) / mu
        var = float(grad @ cov @ grad)
    else:
        var = 0.5 * float(np.trace(cov))
    return mu, math.sqrt(max(var, 0.0) / n)
