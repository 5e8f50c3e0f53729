"""Brute-force maximizers used to cross-check the analytic solvers.

Nothing here touches the Lagrange recursions or the polynomial machinery:
the unconstrained problem is a power iteration on the path-graph adjacency
matrix, and the constrained one is projected gradient ascent over the box
``[0, 1]^dim`` intersected with the probability ellipsoid, with random
restarts. Both are deliberately slow and simple.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from optphase.errors import InfeasibleProbabilityError, InvalidArgumentError
from optphase.fock_core import FockVector

DEFAULT_SEED = 20130917
DEFAULT_RESTARTS = 64


@dataclass(frozen=True)
class OracleResult:
    best_vector: np.ndarray
    best_value: float
    iterations: int
    converged: bool
    provenance: dict = field(default_factory=dict)


def maximize_mu_unconstrained(n_max: int, tol: float = 1e-12, max_iter: int = 200_000) -> OracleResult:
    """Max of ``sum c_n c_{n+1}`` over unit vectors in ``R^{N+1}`` by power iteration.

    The adjacency matrix of a path is bipartite (spectrum symmetric about 0),
    so the iteration runs on ``A + 2 I`` whose top eigenvalue is isolated.
    """
    if not 1 <= n_max <= 8:
        raise InvalidArgumentError("oracle supports 1 <= N <= 8")
    dim = n_max + 1
    adj = np.diag(np.ones(dim - 1), 1) + np.diag(np.ones(dim - 1), -1)
    shifted = adj + 2.0 * np.eye(dim)
    v = np.ones(dim) / np.sqrt(dim)
    value = 0.5 * v @ adj @ v
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        v = shifted @ v
        v /= np.linalg.norm(v)
        new = 0.5 * v @ adj @ v
        if abs(new - value) < tol:
            value = new
            converged = True
            break
        value = new
    return OracleResult(np.abs(v), float(value), it, converged, {"method": "power-iteration"})


def _padded_state(state: FockVector, dim: int) -> np.ndarray:
    c = np.zeros(dim)
    k = min(dim, state.trunc_dim)
    c[:k] = state.coeffs[:k]
    return c / np.linalg.norm(c)


def _objective(f: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Unnormalized filtered phase moment ``sum c_n c_{n+1} f_n f_{n+1}`` per row."""
    return np.sum(c[:-1] * c[1:] * f[..., :-1] * f[..., 1:], axis=-1)


def _gradient(f: np.ndarray, c: np.ndarray) -> np.ndarray:
    cc = c[:-1] * c[1:]
    g = np.zeros_like(f)
    g[..., :-1] += cc * f[..., 1:]
    g[..., 1:] += cc * f[..., :-1]
    return g


def _retract(y: np.ndarray, pops: np.ndarray, prob: float):
    """Scale each row by ``t >= 0`` and clip to ``[0, 1]`` so that ``sum pops f^2 = prob``.

    ``sum pops * min(t y, 1)^2`` is nondecreasing in ``t`` and piecewise
    quadratic between the breakpoints ``1 / y_n``; the exact ``t`` is read off
    the segment that contains it. Rows whose support cannot carry ``prob``
    are flagged unreachable.
    """
    y = np.clip(y, 0.0, None)
    rows, dim = y.shape
    with np.errstate(divide="ignore"):
        brk = np.where(y > 0, 1.0 / np.where(y > 0, y, 1.0), np.inf)
    order = np.argsort(brk, axis=1)
    b = np.take_along_axis(brk, order, axis=1)
    px = np.take_along_axis(np.broadcast_to(pops, y.shape), order, axis=1)
    py2 = px * np.take_along_axis(y, order, axis=1) ** 2
    # segment j: the j smallest breakpoints are saturated
    sat = np.concatenate([np.zeros((rows, 1)), np.cumsum(px, axis=1)], axis=1)
    free = np.concatenate([np.cumsum(py2[:, ::-1], axis=1)[:, ::-1], np.zeros((rows, 1))], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.sqrt((prob - sat) / free)
    lo = np.concatenate([np.zeros((rows, 1)), b], axis=1)
    hi = np.concatenate([b, np.full((rows, 1), np.inf)], axis=1)
    ok = np.isfinite(t) & (t >= lo - 1e-15) & (t <= hi + 1e-15)
    reachable = ok.any(axis=1)
    tj = np.where(reachable, t[np.arange(rows), np.argmax(ok, axis=1)], 0.0)
    out = np.clip(tj[:, None] * y, 0.0, 1.0)
    return out, reachable


def _kkt_norm(f, g, pops, edge=1e-12):
    """Norm of the projected gradient on the feasible set (zero at a KKT point)."""
    h = 2.0 * pops * f
    inner = (f > edge) & (f < 1.0 - edge)
    hh = np.sum(np.where(inner, h * h, 0.0), axis=1)
    gh = np.sum(np.where(inner, g * h, 0.0), axis=1)
    nu = np.where(hh > 0, gh / np.where(hh > 0, hh, 1.0), 0.0)
    r = g - nu[:, None] * h
    viol = np.where(inner, r, 0.0)
    viol = viol + np.where(f >= 1.0 - edge, np.minimum(r, 0.0), 0.0)
    viol = viol + np.where(f <= edge, np.maximum(r, 0.0), 0.0)
    return np.linalg.norm(viol, axis=1), r


def _ascend(starts, c, prob, gtol, max_iter):
    """Batched ascent with Barzilai-Borwein steps, halved until the objective improves."""
    pops = c * c
    f, _ = _retract(starts, pops, prob)
    val = _objective(f, c)
    rows = f.shape[0]
    step = np.full(rows, 1.0)
    done = np.zeros(rows, dtype=bool)
    prev_f = np.full_like(f, np.nan)
    prev_r = np.full_like(f, np.nan)
    iters = 0
    for iters in range(1, max_iter + 1):
        knorm, r = _kkt_norm(f, _gradient(f, c), pops)
        done |= knorm < gtol
        if done.all():
            break
        ds = f - prev_f
        dr = r - prev_r
        sy = -np.sum(ds * dr, axis=1)
        ss = np.sum(ds * ds, axis=1)
        bb = np.where(np.isfinite(sy) & (sy > 0), ss / np.where(sy > 0, sy, 1.0), step)
        step = np.where(np.isfinite(bb), np.clip(bb, 1e-12, 1e12), step)
        live = np.nonzero(~done)[0]
        pending = live
        while pending.size:
            trial, reachable = _retract(f[pending] + step[pending, None] * r[pending], pops, prob)
            tval = _objective(trial, c)
            # near the optimum value gains drown in rounding; a value-neutral
            # step that shrinks the KKT residual is still progress
            tnorm, _ = _kkt_norm(trial, _gradient(trial, c), pops)
            flat = (tval >= val[pending] - 4e-16 * np.abs(val[pending])) & (tnorm < knorm[pending])
            better = reachable & ((tval > val[pending]) | flat)
            won = pending[better]
            prev_f[won] = f[won]
            prev_r[won] = r[won]
            f[won] = trial[better]
            val[won] = tval[better]
            lost = pending[~better]
            step[lost] *= 0.5
            pending = lost[step[lost] >= 1e-20]
        done[live[step[live] < 1e-20]] = True
    knorm, _ = _kkt_norm(f, _gradient(f, c), pops)
    return f, val, iters, knorm


def _grid_scan(c: np.ndarray, prob: float, points: int) -> float:
    """Exhaustive scan: grid over all but one coordinate, solve the last from the constraint."""
    pops = c * c
    dim = c.size
    axis = np.linspace(0.0, 1.0, points)
    best = -np.inf
    for solved in range(dim):
        others = [n for n in range(dim) if n != solved]
        for head in axis:
            grids = np.meshgrid(*([np.array([head])] + [axis] * (len(others) - 1)), indexing="ij")
            pts = np.stack([g.ravel() for g in grids], axis=1)
            used = pts**2 @ pops[others]
            rest = (prob - used) / pops[solved]
            ok = (rest >= 0) & (rest <= 1.0)
            if not ok.any():
                continue
            f = np.empty((int(ok.sum()), dim))
            f[:, others] = pts[ok]
            f[:, solved] = np.sqrt(rest[ok])
            best = max(best, float(_objective(f, c).max()))
    return best


def maximize_mu_constrained(
    state: FockVector,
    prob: float,
    dim: int,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = DEFAULT_SEED,
    gtol: float = 1e-10,
    max_iter: int = 50_000,
    grid_points: int = 200,
) -> OracleResult:
    """Max of the filtered ``mu`` over ``f`` in ``[0, 1]^dim`` with ``sum x_n f_n^2 = prob``."""
    if not 1 <= dim <= 8:
        raise InvalidArgumentError("oracle supports dim <= 8")
    c = _padded_state(state, dim)
    pops = c * c
    if not 0.0 < prob <= float(np.sum(pops)) + 1e-15:
        raise InfeasibleProbabilityError(f"P={prob!r} outside the reachable range (0, {np.sum(pops):.6g}]")
    rng = np.random.Generator(np.random.PCG64(seed))
    starts = np.vstack([np.ones((1, dim)), rng.random((restarts, dim))])
    f, val, iters, knorm = _ascend(starts, c, prob, gtol, max_iter)

    mu = val / prob
    top = np.max(mu)
    # deterministic reduction: best value, ties broken by the smallest vector
    near = np.nonzero(mu >= top - 1e-15)[0]
    pick = min(near, key=lambda i: tuple(f[i]))
    prov = {
        "method": "projected-gradient-ascent",
        "rng": "PCG64",
        "seed": seed,
        "restarts": restarts,
        "kkt_norm": float(knorm[pick]),
    }
    if dim <= 4 and grid_points:
        grid_best = _grid_scan(c, prob, grid_points) / prob
        prov["grid_value"] = grid_best
        prov["grid_agrees"] = bool(abs(grid_best - top) <= 1e-3)
    return OracleResult(f[pick].copy(), float(mu[pick]), iters, bool(knorm[pick] < gtol), prov)
