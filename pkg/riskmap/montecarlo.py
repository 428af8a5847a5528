"""
Monte Carlo oracle.

Paths are simulated exactly: without a Brownian part the surplus moves
linearly at rate c_i between events (claims, environment switches), so the
time spent below zero in each segment follows from its end points. Ruin under
Poissonian observation is not simulated; each path is weighted by its exact
conditional survival probability exp(-sum_j omega_j A_j).

Chunks use independent streams seeded by SeedSequence([seed, chunk]) and are
merged in chunk order, so results do not depend on the number of workers.
"""

import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import DefectiveDrift, OrderingError, UnsupportedModel, UsageError
from .model import MapModel, drift

logger = logging.getLogger("montecarlo")


@dataclass(frozen=True)
class PathFunctional:
    occupation: np.ndarray
    end_state: int
    reached: bool
    classical_ruin_time: Optional[float]


@dataclass(frozen=True)
class EstimateReport:
    """
    Estimate per start state, its standard error and the per-end-state
    decomposition (matrix[i, j] estimates the (i, j) entry).
    """

    quantity: str
    value: np.ndarray
    stderr: np.ndarray
    matrix: np.ndarray
    matrix_stderr: np.ndarray
    paths: int
    seed: int
    capped: int
    chunk_paths: Tuple[int, ...] = ()
    truncation_bias: Optional[np.ndarray] = None
    note: str = ""


# ---------------------------------------------------------------------------
# Path simulation
# ---------------------------------------------------------------------------

def _check_simulable(model: MapModel, u: float, x: float) -> None:
    if np.any(model.sigma > 0):
        raise UnsupportedModel("simulation does not support Brownian components (sigma > 0)")
    if not (0 <= u <= x):
        raise OrderingError(f"need 0 <= u <= x, got u={u}, x={x}")


def simulate_batch(
    model: MapModel,
    u: float,
    x: float,
    state: int,
    size: int,
    rng: np.random.Generator,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> Dict[str, np.ndarray]:
    """
    Simulate `size` paths from (u, state) until the first passage over x.

    Returns arrays: occupation (size, n), end_state, reached, ruin_time
    (first time below 0, nan if never) and capped.
    """
    n = model.n
    c = model.c
    event_rate = -np.diag(model.Q) + model.beta
    with np.errstate(divide="ignore", invalid="ignore"):
        claim_share = np.where(event_rate > 0, model.beta / event_rate, 0.0)
        switch = model.Q - np.diag(np.diag(model.Q))
        switch_cum = np.cumsum(switch / np.where(-np.diag(model.Q) > 0, -np.diag(model.Q), 1.0)[:, None], axis=1)
    switch_cum[:, -1] = np.maximum(switch_cum[:, -1], 1.0)

    X = np.full(size, float(u))
    J = np.full(size, state, dtype=int)
    t = np.zeros(size)
    occupation = np.zeros((size, n))
    ruin_time = np.full(size, np.nan)
    reached = np.zeros(size, dtype=bool)
    capped = np.zeros(size, dtype=bool)
    active = np.ones(size, dtype=bool)
    if x == u:
        reached[:] = True
        active[:] = False

    while active.any():
        idx = np.nonzero(active)[0]
        s = J[idx]
        rate = event_rate[s]
        with np.errstate(divide="ignore"):
            dt = np.where(rate > 0, rng.exponential(1.0, len(idx)) / np.where(rate > 0, rate, 1.0), np.inf)
        hit = (x - X[idx]) / c[s]
        seg = np.minimum(dt, hit)

        below = X[idx] < 0
        occupation[idx[below], s[below]] += np.minimum(seg[below], -X[idx[below]] / c[s[below]])
        X[idx] += c[s] * seg
        t[idx] += seg

        done = hit <= dt
        reached[idx[done]] = True
        active[idx[done]] = False

        ev = idx[~done]
        if len(ev) == 0:
            break
        es = J[ev]
        is_claim = rng.random(len(ev)) < claim_share[es]

        for i in range(n):
            who = ev[is_claim & (es == i)]
            if len(who):
                X[who] -= model.claims[i].sample(rng, len(who))

        movers = ev[~is_claim]
        if len(movers):
            ms = J[movers]
            nxt = (rng.random(len(movers))[:, None] > switch_cum[ms]).sum(axis=1)
            nxt = np.minimum(nxt, n - 1)
            for (a, b), law in sorted(model.jumps.items()):
                who = movers[(ms == a) & (nxt == b)]
                if len(who):
                    X[who] -= law.sample(rng, len(who))
            J[movers] = nxt

        newly_ruined = ev[(X[ev] < 0) & np.isnan(ruin_time[ev])]
        ruin_time[newly_ruined] = t[newly_ruined]

        over = ev[t[ev] >= tol.time_cap]
        capped[over] = True
        active[over] = False

    return {
        "occupation": occupation,
        "end_state": J,
        "reached": reached,
        "ruin_time": ruin_time,
        "capped": capped,
    }


def simulate_path(
    model: MapModel,
    u: float,
    x_target: float,
    rng: np.random.Generator,
    state: int = 0,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> PathFunctional:
    """Simulate one path from (u, state) up to the first passage over x_target."""
    _check_simulable(model, u, x_target)
    out = simulate_batch(model, u, x_target, state, 1, rng, tol)
    ruin_time = out["ruin_time"][0]
    return PathFunctional(
        occupation=out["occupation"][0],
        end_state=int(out["end_state"][0]),
        reached=bool(out["reached"][0]),
        classical_ruin_time=None if np.isnan(ruin_time) else float(ruin_time),
    )


# ---------------------------------------------------------------------------
# Chunked estimation
# ---------------------------------------------------------------------------

def _chunk_sizes(paths: int, chunks: int):
    base, extra = divmod(paths, chunks)
    return [base + (1 if k < extra else 0) for k in range(chunks)]


def run_chunk(
    model: MapModel,
    quantity: str,
    u: float,
    x: float,
    size: int,
    seed: int,
    chunk: int,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> Dict[str, np.ndarray]:
    """
    Simulate one chunk (size paths per start state) and return sums of the
    per-path scores and their squares, per start state (r1, r2) and per
    start and end state (s1, s2).
    """
    n = model.n
    rng = np.random.default_rng(np.random.SeedSequence([seed, chunk]))
    s1 = np.zeros((n, n))
    s2 = np.zeros((n, n))
    r1 = np.zeros(n)
    r2 = np.zeros(n)
    capped = 0
    if size == 0:
        return {"s1": s1, "s2": s2, "r1": r1, "r2": r2, "capped": capped}

    for i in range(n):
        out = simulate_batch(model, u, x, i, size, rng, tol)
        if quantity == "classical":
            score = (out["reached"] & np.isnan(out["ruin_time"])).astype(float)
        else:
            score = np.exp(-out["occupation"] @ model.omega) * out["reached"]
        r1[i] = score.sum()
        r2[i] = (score ** 2).sum()
        for j in range(n):
            part = np.where(out["end_state"] == j, score, 0.0)
            s1[i, j] = part.sum()
            s2[i, j] = (part ** 2).sum()
        capped += int(out["capped"].sum())
    return {"s1": s1, "s2": s2, "r1": r1, "r2": r2, "capped": capped}


def _stderr(s1, s2, m):
    if m < 2:
        return np.zeros_like(s1)
    mean = s1 / m
    var = np.maximum(s2 / m - mean ** 2, 0.0) * m / (m - 1)
    return np.sqrt(var / m)


def _log_chunk(quantity: str, k: int, chunks: int, size: int, result: Dict) -> None:
    logger.info(f"{quantity}: chunk {k + 1}/{chunks} done, {size} paths, {result['capped']} capped")


def estimate(
    model: MapModel,
    quantity: str,
    u: float,
    x: float,
    paths: int,
    seed: int,
    chunks: int = 1,
    workers: int = 1,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> EstimateReport:
    """
    Run the chunked simulation for one quantity ("reach" or "classical").

    Args:
        paths: number of paths per start state
        chunks: number of independent streams
        workers: processes used for the chunks (1 runs them in-process)
    """
    _check_simulable(model, u, x)
    if paths < 1:
        raise UsageError(f"paths must be >= 1, got {paths}")
    chunks = max(1, min(chunks, paths))
    sizes = _chunk_sizes(paths, chunks)

    results = [None] * chunks
    if workers > 1 and chunks > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(run_chunk, model, quantity, u, x, sizes[k], seed, k, tol): k for k in range(chunks)
            }
            for fut in as_completed(futures):
                k = futures[fut]
                try:
                    results[k] = fut.result()
                except Exception as e:
                    logger.error(f"{quantity}: chunk {k + 1}/{chunks} failed: {e}")
                    raise
                _log_chunk(quantity, k, chunks, sizes[k], results[k])
    else:
        for k in range(chunks):
            results[k] = run_chunk(model, quantity, u, x, sizes[k], seed, k, tol)
            _log_chunk(quantity, k, chunks, sizes[k], results[k])

    n = model.n
    s1 = np.zeros((n, n))
    s2 = np.zeros((n, n))
    r1 = np.zeros(n)
    r2 = np.zeros(n)
    capped = 0
    for res in results:
        s1 += res["s1"]
        s2 += res["s2"]
        r1 += res["r1"]
        r2 += res["r2"]
        capped += res["capped"]

    if capped:
        logger.warning(f"{capped} paths hit the time cap {tol.time_cap:g} before reaching level {x}")

    return EstimateReport(
        quantity=quantity,
        value=r1 / paths,
        stderr=_stderr(r1, r2, paths),
        matrix=s1 / paths,
        matrix_stderr=_stderr(s1, s2, paths),
        paths=paths,
        seed=seed,
        capped=capped,
        chunk_paths=tuple(sizes),
    )


def estimate_reach(
    model: MapModel,
    u: float,
    x: float,
    paths: int,
    seed: int,
    chunks: int = 1,
    workers: int = 1,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> EstimateReport:
    """Estimate R(u, x) 1 (and R(u, x) entrywise) by the mean of exp(-sum omega_j A_j(x))."""
    report = estimate(model, "reach", u, x, paths, seed, chunks, workers, tol)
    logger.info(f"reach estimate u={u} x={x}: {report.value} +- {report.stderr}")
    return report


def estimate_survival(
    model: MapModel,
    u: float,
    x_max: float,
    paths: int,
    seed: int,
    chunks: int = 1,
    workers: int = 1,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> EstimateReport:
    """
    Estimate phi(u) by R(u, x_max) 1.

    Truncation at x_max biases the estimate upwards by the probability of
    being ruined after passing x_max. R(u, x) 1 decreases to phi(u), so the
    drop from x_max to 2 x_max is reported as truncation_bias, a heuristic
    size of that bias (a lower bound when the tail decays slowly).
    """
    mu = drift(model, tol).mu
    if mu <= 0:
        raise DefectiveDrift(f"survival estimation needs a positive drift, got mu={mu:.6g}")
    report = estimate(model, "reach", u, x_max, paths, seed, chunks, workers, tol)
    beyond = estimate(model, "reach", u, 2.0 * x_max, paths, seed, chunks, workers, tol)
    bias = np.maximum(report.value - beyond.value, 0.0)
    logger.info(f"survival estimate u={u} x_max={x_max}: {report.value}, truncation bias about {bias}")
    return EstimateReport(
        quantity="survival",
        value=report.value,
        stderr=report.stderr,
        matrix=report.matrix,
        matrix_stderr=report.matrix_stderr,
        paths=report.paths,
        seed=report.seed,
        capped=report.capped + beyond.capped,
        chunk_paths=report.chunk_paths,
        truncation_bias=bias,
        note=f"truncated at x_max={x_max:g}; estimate minus its value at 2 x_max: "
        + ", ".join(f"{b:.2g}" for b in bias),
    )


def estimate_classical(
    model: MapModel,
    u: float,
    x: float,
    paths: int,
    seed: int,
    chunks: int = 1,
    workers: int = 1,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> EstimateReport:
    """Estimate the probability of reaching x before the surplus ever goes below 0."""
    return estimate(model, "classical", u, x, paths, seed, chunks, workers, tol)
