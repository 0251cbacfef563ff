"""Path simulation of the joint (rate, memory) Markov system and the Monte
Carlo estimators used to cross-check the closed-form and PDE engines.

Both state components are driven by the same Brownian increment.  Each
path owns a counter-based RNG stream keyed by (seed, path index), so
results are bit-identical no matter how paths are chunked or parallelized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, IO, Iterator, NamedTuple

import numpy as np

from .model import ModelParams, TransitionMoments, l_fn, transition_moments
from .numerics import NumericalError

__all__ = [
    "SimConfig",
    "PathSet",
    "McEstimate",
    "simulate",
    "mc_bond_price",
    "mc_claim_price",
    "paths_to_csv",
]

_SCHEMES = ("euler", "exact_gaussian")
_DEFAULT_CHUNK = 16384


@dataclass(frozen=True)
class SimConfig:
    """Simulation request: uniform grid on [0, horizon], fixed seed.

    ``euler`` is the workhorse scheme; ``exact_gaussian`` samples each
    step from the exact joint Gaussian transition so that only the
    trapezoidal rate integral carries discretization error.
    """

    horizon: float
    n_steps: int
    n_paths: int
    seed: int
    scheme: str = "euler"

    def __post_init__(self):
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if self.n_steps < 1 or self.n_paths < 1:
            raise ValueError("n_steps and n_paths must be >= 1")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"scheme must be one of {_SCHEMES}")


@dataclass(frozen=True)
class PathSet:
    """Simulated trajectories on a shared grid (row = path, column = time).

    ``int_r`` is the running trapezoidal integral of the rate, i.e. the
    money-market exponent.
    """

    times: np.ndarray
    r: np.ndarray
    u: np.ndarray
    int_r: np.ndarray
    seed: int


class McEstimate(NamedTuple):
    estimate: float
    std_error: float


def _path_normals(seed: int, first_path: int, n_paths: int,
                  count: int) -> np.ndarray:
    """Draw ``count`` N(0,1) variates for each of ``n_paths`` streams.

    Stream i uses a Philox generator keyed by (seed, i): splittable,
    order-independent, and stable across chunk boundaries.
    """
    out = np.empty((n_paths, count))
    key = np.zeros(2, dtype=np.uint64)
    key[0] = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    for row, idx in enumerate(range(first_path, first_path + n_paths)):
        key[1] = np.uint64(idx)
        gen = np.random.Generator(np.random.Philox(key=key.copy()))
        out[row] = gen.standard_normal(count)
    return out


def _euler_coeffs(params: ModelParams, times: np.ndarray):
    """Per-step coefficients of the Euler recurrence."""
    t = times[:-1]
    pq = params.p + params.q
    u_feedback = params.sigma * params.p * np.exp(-pq * t)
    u_diffusion = np.exp(pq * t) * np.asarray(l_fn(t, params), dtype=float)
    return u_feedback, u_diffusion


def _advance_deterministic(params: ModelParams, times: np.ndarray,
                           n_paths: int, keep_paths: bool):
    """sigma = 0 degenerate limit: exact mean recursion, u pinned at zero.

    Only the trapezoidal rate integral carries discretization error.
    """
    n_steps = len(times) - 1
    dt = float(times[-1] - times[0]) / n_steps
    decay = math.exp(-params.b * dt)
    drift = params.a / params.b * -math.expm1(-params.b * dt)
    r_path = np.empty(n_steps + 1)
    r_path[0] = params.r0
    for k in range(n_steps):
        r_path[k + 1] = drift + decay * r_path[k]
    acc_path = np.concatenate(
        ([0.0], np.cumsum(0.5 * dt * (r_path[:-1] + r_path[1:]))))
    if keep_paths:
        shape = (n_paths, n_steps + 1)
        return (np.broadcast_to(r_path, shape).copy(),
                np.zeros(shape),
                np.broadcast_to(acc_path, shape).copy())
    return (np.full(n_paths, r_path[-1]), np.zeros(n_paths),
            np.full(n_paths, acc_path[-1]))


def _advance_euler(params: ModelParams, times: np.ndarray, dw: np.ndarray,
                   keep_paths: bool):
    """Run the Euler recurrence for one chunk of paths.

    ``dw`` holds Brownian increments, shape (n_paths, n_steps).  Returns
    either full (r, u, int_r) matrices or just their final columns.
    """
    n_chunk, n_steps = dw.shape
    dt = float(times[-1] - times[0]) / n_steps
    a, b, sigma = params.a, params.b, params.sigma
    u_feedback, u_diffusion = _euler_coeffs(params, times)

    r = np.full(n_chunk, params.r0)
    u = np.zeros(n_chunk)
    acc = np.zeros(n_chunk)
    if keep_paths:
        r_all = np.empty((n_chunk, n_steps + 1))
        u_all = np.empty((n_chunk, n_steps + 1))
        acc_all = np.empty((n_chunk, n_steps + 1))
        r_all[:, 0], u_all[:, 0], acc_all[:, 0] = r, u, acc

    for k in range(n_steps):
        shock = sigma * dw[:, k]
        r_next = r + (a - b * r - u_feedback[k] * u) * dt + shock
        if not np.isfinite(r_next).all():
            raise NumericalError(
                f"non-finite state during Euler stepping at step {k + 1}")
        if sigma != 0.0:
            u = u + u_diffusion[k] * dw[:, k]
        acc = acc + 0.5 * dt * (r + r_next)
        r = r_next
        if keep_paths:
            r_all[:, k + 1], u_all[:, k + 1], acc_all[:, k + 1] = r, u, acc

    if keep_paths:
        return r_all, u_all, acc_all
    return r, u, acc


def _exact_tables(params: ModelParams, times: np.ndarray):
    """Per-step exact transition moments, Cholesky-factored for sampling."""
    n_steps = len(times) - 1
    decay = np.empty(n_steps)
    drift = np.empty(n_steps)
    coupling = np.empty(n_steps)
    l11 = np.empty(n_steps)
    l21 = np.empty(n_steps)
    l22 = np.empty(n_steps)
    for k in range(n_steps):
        mom: TransitionMoments = transition_moments(
            float(times[k]), float(times[k + 1]), params)
        decay[k], drift[k], coupling[k] = (mom.rate_decay, mom.rate_drift,
                                           mom.memory_to_rate)
        if mom.var_rate > 0.0:
            l11[k] = math.sqrt(mom.var_rate)
            l21[k] = mom.cov / l11[k]
            l22[k] = math.sqrt(max(mom.var_memory - l21[k] ** 2, 0.0))
        else:
            l11[k] = l21[k] = l22[k] = 0.0
    return decay, drift, coupling, l11, l21, l22


def _advance_exact(params: ModelParams, times: np.ndarray, z: np.ndarray,
                   tables, keep_paths: bool):
    """Sample the exact per-step Gaussian transitions for one chunk.

    ``z`` holds two independent N(0,1) draws per step, shape
    (n_paths, n_steps, 2).
    """
    n_chunk, n_steps = z.shape[0], z.shape[1]
    dt = float(times[-1] - times[0]) / n_steps
    decay, drift, coupling, l11, l21, l22 = tables

    r = np.full(n_chunk, params.r0)
    u = np.zeros(n_chunk)
    acc = np.zeros(n_chunk)
    if keep_paths:
        r_all = np.empty((n_chunk, n_steps + 1))
        u_all = np.empty((n_chunk, n_steps + 1))
        acc_all = np.empty((n_chunk, n_steps + 1))
        r_all[:, 0], u_all[:, 0], acc_all[:, 0] = r, u, acc

    for k in range(n_steps):
        w1 = z[:, k, 0]
        w2 = z[:, k, 1]
        r_next = drift[k] + decay[k] * r + coupling[k] * u + l11[k] * w1
        if not np.isfinite(r_next).all():
            raise NumericalError(
                f"non-finite state during exact-transition stepping at step {k + 1}")
        u = u + l21[k] * w1 + l22[k] * w2
        acc = acc + 0.5 * dt * (r + r_next)
        r = r_next
        if keep_paths:
            r_all[:, k + 1], u_all[:, k + 1], acc_all[:, k + 1] = r, u, acc

    if keep_paths:
        return r_all, u_all, acc_all
    return r, u, acc


def _chunk_finals(params: ModelParams, cfg: SimConfig, times: np.ndarray,
                  chunk_size: int) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Yield (r_S, u_S, int_r_S) per chunk without storing whole paths."""
    tables = None
    if cfg.scheme == "exact_gaussian" and params.sigma != 0.0:
        tables = _exact_tables(params, times)
    for start in range(0, cfg.n_paths, chunk_size):
        m = min(chunk_size, cfg.n_paths - start)
        if params.sigma == 0.0:
            yield _advance_deterministic(params, times, m, keep_paths=False)
        elif cfg.scheme == "euler":
            dt = cfg.horizon / cfg.n_steps
            dw = _path_normals(cfg.seed, start, m, cfg.n_steps) * math.sqrt(dt)
            yield _advance_euler(params, times, dw, keep_paths=False)
        else:
            z = _path_normals(cfg.seed, start, m, 2 * cfg.n_steps)
            z = z.reshape(m, cfg.n_steps, 2)
            yield _advance_exact(params, times, z, tables, keep_paths=False)


def simulate(params: ModelParams, cfg: SimConfig,
             increments: np.ndarray | None = None) -> PathSet:
    """Simulate joint (r, u) paths plus the running rate integral.

    With ``increments`` (shape (n_paths, n_steps), Brownian increments,
    Euler scheme only) the caller controls the noise, which is how
    coupled refinement studies are run.  With sigma = 0 the dynamics are
    deterministic and u is identically zero.

    Full matrices are materialized here; for plain price estimates prefer
    :func:`mc_bond_price` / :func:`mc_claim_price`, which stream chunks.
    """
    times = np.linspace(0.0, cfg.horizon, cfg.n_steps + 1)
    if increments is not None:
        if cfg.scheme != "euler":
            raise ValueError("externally supplied increments require the euler scheme")
        increments = np.asarray(increments, dtype=float)
        if increments.shape != (cfg.n_paths, cfg.n_steps):
            raise ValueError(
                f"increments must have shape {(cfg.n_paths, cfg.n_steps)}, "
                f"got {increments.shape}")
        r, u, acc = _advance_euler(params, times, increments, keep_paths=True)
    elif params.sigma == 0.0:
        r, u, acc = _advance_deterministic(params, times, cfg.n_paths,
                                           keep_paths=True)
    elif cfg.scheme == "euler":
        dt = cfg.horizon / cfg.n_steps
        dw = _path_normals(cfg.seed, 0, cfg.n_paths, cfg.n_steps) * math.sqrt(dt)
        r, u, acc = _advance_euler(params, times, dw, keep_paths=True)
    else:
        tables = _exact_tables(params, times)
        z = _path_normals(cfg.seed, 0, cfg.n_paths, 2 * cfg.n_steps)
        z = z.reshape(cfg.n_paths, cfg.n_steps, 2)
        r, u, acc = _advance_exact(params, times, z, tables, keep_paths=True)
    return PathSet(times=times, r=r, u=u, int_r=acc, seed=cfg.seed)


def _reduce(values: np.ndarray) -> McEstimate:
    if not np.isfinite(values).all():
        raise NumericalError("non-finite Monte Carlo sample values")
    n = values.size
    estimate = float(values.mean())
    std_error = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return McEstimate(estimate, std_error)


def mc_bond_price(params: ModelParams, T: float, cfg: SimConfig,
                  chunk_size: int = _DEFAULT_CHUNK) -> McEstimate:
    """Monte Carlo bond price: sample mean of exp(-integral of r over [0, T])."""
    if cfg.horizon != T:
        raise ValueError(f"cfg.horizon ({cfg.horizon}) must equal T ({T})")
    times = np.linspace(0.0, cfg.horizon, cfg.n_steps + 1)
    with np.errstate(over="ignore"):  # overflow surfaces as NumericalError
        discounts = [np.exp(-acc) for _, _, acc in
                     _chunk_finals(params, cfg, times, chunk_size)]
    return _reduce(np.concatenate(discounts))


def mc_claim_price(params: ModelParams, S: float,
                   payoff: Callable[[np.ndarray, np.ndarray], np.ndarray],
                   cfg: SimConfig,
                   chunk_size: int = _DEFAULT_CHUNK) -> McEstimate:
    """Monte Carlo price of a claim paying ``payoff(r(S), u(S))`` at S.

    ``payoff`` should accept numpy arrays; scalar-only callables are
    wrapped automatically.
    """
    if cfg.horizon != S:
        raise ValueError(f"cfg.horizon ({cfg.horizon}) must equal S ({S})")
    times = np.linspace(0.0, cfg.horizon, cfg.n_steps + 1)
    samples = []
    vectorized = payoff
    for r_s, u_s, acc in _chunk_finals(params, cfg, times, chunk_size):
        try:
            g = np.asarray(vectorized(r_s, u_s), dtype=float)
            if g.shape != r_s.shape:
                raise TypeError
        except TypeError:
            vectorized = np.vectorize(payoff, otypes=[float])
            g = vectorized(r_s, u_s)
        samples.append(np.exp(-acc) * g)
    return _reduce(np.concatenate(samples))


def paths_to_csv(paths: PathSet, stream: IO[str]) -> None:
    """Write a PathSet as long-format CSV with header t,path_id,r,u,int_r."""
    stream.write("t,path_id,r,u,int_r\n")
    n_paths = paths.r.shape[0]
    for i in range(n_paths):
        for k, t in enumerate(paths.times):
            stream.write(f"{float(t)!r},{i},{float(paths.r[i, k])!r},"
                         f"{float(paths.u[i, k])!r},{float(paths.int_r[i, k])!r}\n")
