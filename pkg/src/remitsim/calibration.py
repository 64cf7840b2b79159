"""Fitting the behavioural parameters to an observed panel.

The objective is the summed squared error between expected-value flows and
train observations. Minimization is plain gradient descent with central
finite-difference gradients and an Armijo backtracking line search; the
initial trial step reuses a Barzilai-Borwein estimate from the previous
iteration, and accepted steps never increase the loss. The remitted-fraction
parameter is optimized through a logit reparameterization so it stays inside
(0, 1). Uncertainty comes from a nonparametric bootstrap over train
observations.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .behavior import BehaviorParams, PARAM_NAMES
from .dataio import Dataset, FlowObservation
from .engine import SimulationContext

log = logging.getLogger(__name__)

DEFAULT_INIT = BehaviorParams(alpha=0.0, beta0=0.0, beta1=0.0, beta2=0.0, beta3=0.0,
                              height=0.1, shape=0.1, shift=0.0, rho=0.1)


class CalibrationError(RuntimeError):
    """All optimizer starts diverged or calibration could not run."""


@dataclass(frozen=True)
class CalibrationConfig:
    starts: int = 8
    max_iter: int = 500
    tol: float = 1e-9  # relative loss-change convergence threshold
    seed: int = 0
    fd_rel_step: float = 1e-6
    init: BehaviorParams = DEFAULT_INIT
    threads: int = 1


@dataclass
class CalibrationResult:
    params: BehaviorParams
    train_sse: float
    test_r2: float | None
    param_cis: dict[str, tuple[float, float]] | None
    iterations: int
    converged: bool
    loss_history: list[float]
    n_train: int
    n_test: int
    n_excluded: int
    start_losses: list[float]


@dataclass(frozen=True)
class PanelSlice:
    """Panel observations aligned to (corridor, month) indices of a context.

    ``cols`` holds the distinct months touched by the panel, and
    ``month_pos`` indexes into it; the loss only evaluates those columns.
    """

    corridor_idx: np.ndarray
    month_idx: np.ndarray
    amounts: np.ndarray
    n_excluded: int
    excluded: tuple[tuple[str, str], ...]  # sample of unmodeled corridors
    cols: np.ndarray
    month_pos: np.ndarray


def split_panel(panel: Sequence[FlowObservation], fraction: float = 0.8,
                seed: int = 0) -> tuple[FlowObservation, ...]:
    """Tag observations train/test by uniform random assignment.

    The train share is round(n * fraction), so proportions are within one
    observation of the requested fraction. Deterministic per seed.
    """
    if not panel:
        raise ValueError("panel is empty")
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    n = len(panel)
    n_train = int(round(n * fraction))
    perm = np.random.default_rng(seed).permutation(n)
    tags = np.full(n, "test", dtype=object)
    tags[perm[:n_train]] = "train"
    return tuple(dataclasses.replace(obs, split_tag=tags[i]) for i, obs in enumerate(panel))


def align_panel(panel: Sequence[FlowObservation], ctx: SimulationContext) -> PanelSlice:
    """Map observations onto context indices, excluding unmodeled corridors.

    Exclusions are warned about and counted; observations outside the
    context window are excluded likewise.
    """
    index = {c: i for i, c in enumerate(ctx.corridors)}
    c_idx: list[int] = []
    m_idx: list[int] = []
    amounts: list[float] = []
    excluded: list[tuple[str, str]] = []
    for obs in panel:
        corridor = (obs.recipient, obs.sender)  # (origin, destination)
        ci = index.get(corridor)
        if ci is None or not ctx.start <= obs.month <= ctx.end:
            excluded.append(corridor)
            continue
        c_idx.append(ci)
        m_idx.append(obs.month)
        amounts.append(obs.amount_usd)
    if excluded:
        log.warning("excluded %d panel observation(s) without modeled population, e.g. %s",
                    len(excluded), excluded[:3])
    month_arr = np.array(m_idx, dtype=int)
    cols, month_pos = np.unique(month_arr, return_inverse=True)
    return PanelSlice(np.array(c_idx, dtype=int), month_arr,
                      np.array(amounts, dtype=float), len(excluded),
                      tuple(dict.fromkeys(excluded))[:10], cols, month_pos)


def loss(params: BehaviorParams, panel: Sequence[FlowObservation],
         ctx: SimulationContext) -> float:
    """Sum of squared differences, simulated minus observed, in USD^2."""
    aligned = align_panel(panel, ctx)
    return _sse(ctx, aligned, params)


def _sse(ctx: SimulationContext, aligned: PanelSlice, params: BehaviorParams) -> float:
    flows = ctx.expected_flows(params, None, cols=aligned.cols)
    sim = flows[aligned.corridor_idx, aligned.month_pos]
    resid = sim - aligned.amounts
    return float(resid @ resid)


# ---------------------------------------------------------------------------
# Parameter vector packing (rho via logit)

def pack(params: BehaviorParams) -> np.ndarray:
    values = [getattr(params, name) for name in PARAM_NAMES[:-1]]
    values.append(math.log(params.rho / (1.0 - params.rho)))
    return np.array(values)


def unpack(x: np.ndarray) -> BehaviorParams:
    rho = 1.0 / (1.0 + math.exp(-x[-1]))
    # keep rho strictly inside (0, 1) under extreme optimizer excursions
    rho = min(max(rho, 1e-12), 1.0 - 1e-12)
    return BehaviorParams(*x[:-1], rho=rho)


def fd_gradient(f: Callable[[np.ndarray], float], x: np.ndarray,
                rel_step: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient with per-coordinate relative steps."""
    g = np.zeros_like(x)
    for i in range(len(x)):
        h = rel_step * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


@dataclass
class MinimizeResult:
    x: np.ndarray
    fx: float
    iterations: int
    converged: bool
    history: list[float]


def minimize_gd(f: Callable[[np.ndarray], float], x0: np.ndarray, *, max_iter: int,
                tol: float, fd_rel_step: float = 1e-6) -> MinimizeResult:
    """Gradient descent with Armijo backtracking; BB-seeded trial steps.

    Accepted iterates never increase the loss. Convergence is declared when
    an accepted step changes the loss by less than ``tol`` relative.
    """
    x = np.asarray(x0, dtype=float).copy()
    fx = f(x)
    if not math.isfinite(fx):
        raise FloatingPointError(f"loss not finite at the starting point: {fx}")
    history = [fx]
    prev_x: np.ndarray | None = None
    prev_g: np.ndarray | None = None
    last_step: float | None = None
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        g = fd_gradient(f, x, fd_rel_step)
        gnorm2 = float(g @ g)
        if gnorm2 == 0.0 or not math.isfinite(gnorm2):
            converged = math.isfinite(gnorm2)
            iterations -= 1
            break
        if prev_g is not None:
            dx = x - prev_x
            dg = g - prev_g
            denom = float(dg @ dg)
            step = abs(float(dx @ dg)) / denom if denom > 0 else last_step
        elif last_step is not None:
            step = last_step * 2.0
        else:
            # first trial: move about 1% of the parameter scale
            step = 0.01 * (1.0 + float(np.linalg.norm(x))) / math.sqrt(gnorm2)
        if step is None or not math.isfinite(step) or step <= 0:
            step = (last_step or 1e-8)
        prev_x, prev_g = x.copy(), g
        accepted = False
        for _ in range(80):
            trial = x - step * g
            ft = f(trial)
            if math.isfinite(ft) and ft <= fx - 1e-4 * step * gnorm2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True  # no descent possible at line-search resolution
            break
        last_step = step
        drop = fx - ft
        x, fx = trial, ft
        history.append(fx)
        if drop <= tol * max(abs(fx), 1e-300):
            converged = True
            break
    return MinimizeResult(x=x, fx=fx, iterations=iterations, converged=converged, history=history)


# ---------------------------------------------------------------------------
# Calibration driver

def _start_points(config: CalibrationConfig) -> list[np.ndarray]:
    """Start 0 is the configured init; later starts perturb it by +/-50%.

    Parameters whose default is zero are perturbed additively on [-0.5, 0.5].
    """
    base = np.array([getattr(config.init, n) for n in PARAM_NAMES])
    points = [pack(config.init)]
    for k in range(1, config.starts):
        rng = np.random.default_rng(np.random.SeedSequence((config.seed, k)))
        u = rng.uniform(-0.5, 0.5, size=len(base))
        perturbed = np.where(base != 0.0, base * (1.0 + u), u)
        perturbed[-1] = min(max(perturbed[-1], 1e-6), 1.0 - 1e-6)  # rho stays in (0,1)
        points.append(pack(BehaviorParams(*perturbed[:-1], rho=perturbed[-1])))
    return points


def _run_start(args) -> MinimizeResult | None:
    ctx, aligned, x0, max_iter, tol, fd_rel_step = args
    f = lambda x: _sse(ctx, aligned, unpack(x))
    try:
        return minimize_gd(f, x0, max_iter=max_iter, tol=tol, fd_rel_step=fd_rel_step)
    except FloatingPointError as exc:
        log.warning("optimizer start diverged: %s", exc)
        return None


def calibrate(dataset: Dataset | SimulationContext, panel: Sequence[FlowObservation],
              config: CalibrationConfig = CalibrationConfig()) -> CalibrationResult:
    """Fit the nine parameters to the train split; report held-out R^2.

    ``panel`` must carry train/test tags from :func:`split_panel`. The best
    of ``config.starts`` optimizer runs wins; a start whose loss turns
    non-finite is dropped, and calibration fails only if every start does.
    """
    ctx = dataset if isinstance(dataset, SimulationContext) else SimulationContext(dataset)
    train = [o for o in panel if o.split_tag == "train"]
    test = [o for o in panel if o.split_tag == "test"]
    if not train:
        raise CalibrationError("no observations tagged 'train'; run split_panel first")
    aligned_train = align_panel(train, ctx)
    aligned_test = align_panel(test, ctx)
    if aligned_train.amounts.size == 0:
        raise CalibrationError("no train observation matches a modeled corridor")

    jobs = [(ctx, aligned_train, x0, config.max_iter, config.tol, config.fd_rel_step)
            for x0 in _start_points(config)]
    if config.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(_run_start, jobs))
    else:
        results = [_run_start(job) for job in jobs]

    usable = [r for r in results if r is not None]
    if not usable:
        raise CalibrationError(f"all {len(jobs)} optimizer starts diverged")
    best = min(usable, key=lambda r: r.fx)
    # a zero-step run echoes the configured init exactly (the rho logit
    # round-trip would otherwise perturb it by an ulp)
    params = config.init if np.array_equal(best.x, pack(config.init)) else unpack(best.x)

    test_r2 = None
    if aligned_test.amounts.size >= 2 and aligned_test.amounts.std() > 0:
        sse = _sse(ctx, aligned_test, params)
        sst = float(((aligned_test.amounts - aligned_test.amounts.mean()) ** 2).sum())
        test_r2 = 1.0 - sse / sst

    return CalibrationResult(
        params=params, train_sse=best.fx, test_r2=test_r2, param_cis=None,
        iterations=best.iterations, converged=best.converged, loss_history=best.history,
        n_train=aligned_train.amounts.size, n_test=aligned_test.amounts.size,
        n_excluded=aligned_train.n_excluded + aligned_test.n_excluded,
        start_losses=[r.fx for r in usable])


def _run_replicate(args) -> np.ndarray | None:
    ctx, c_idx, m_idx, amounts, x0, max_iter, tol, fd_rel_step = args
    cols, month_pos = np.unique(m_idx, return_inverse=True)
    aligned = PanelSlice(c_idx, m_idx, amounts, 0, (), cols, month_pos)
    f = lambda x: _sse(ctx, aligned, unpack(x))
    try:
        return minimize_gd(f, x0, max_iter=max_iter, tol=tol, fd_rel_step=fd_rel_step).x
    except FloatingPointError:
        return None


def param_confidence(result: CalibrationResult, panel: Sequence[FlowObservation],
                     dataset: Dataset | SimulationContext, replicates: int = 200, *,
                     seed: int = 0, max_iter: int = 60, tol: float = 1e-9,
                     threads: int = 1, replicate_start: BehaviorParams | None = None
                     ) -> dict[str, tuple[float, float]]:
    """95% bootstrap intervals: resample train observations with replacement,
    re-fit each replicate, take the 2.5/97.5 percentiles.

    Replicates re-fit from the point estimate by default; pass
    ``replicate_start`` to re-run them from a common starting vector instead
    (bootstrapping the whole iteration-capped procedure, which keeps the
    replicate distribution comparable to the estimator when ``max_iter`` is
    small). Diverged replicates are dropped and counted. Intervals are
    widened, if needed, to include the point estimate.
    """
    ctx = dataset if isinstance(dataset, SimulationContext) else SimulationContext(dataset)
    train = [o for o in panel if o.split_tag == "train"]
    aligned = align_panel(train, ctx)
    n = aligned.amounts.size
    if n == 0:
        raise CalibrationError("no train observations to bootstrap")
    x_hat = pack(result.params if replicate_start is None else replicate_start)

    jobs = []
    for r in range(replicates):
        rng = np.random.default_rng(np.random.SeedSequence((seed, r)))
        take = rng.integers(0, n, size=n)
        jobs.append((ctx, aligned.corridor_idx[take], aligned.month_idx[take],
                     aligned.amounts[take], x_hat, max_iter, tol, 1e-6))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            draws = list(pool.map(_run_replicate, jobs))
    else:
        draws = [_run_replicate(job) for job in jobs]

    kept = [unpack(x) for x in draws if x is not None]
    dropped = len(draws) - len(kept)
    if dropped:
        log.warning("dropped %d of %d bootstrap replicate(s)", dropped, len(draws))
    if not kept:
        raise CalibrationError("every bootstrap replicate diverged")
    cis = {}
    for name in PARAM_NAMES:
        values = np.array([getattr(p, name) for p in kept])
        lo, hi = np.percentile(values, [2.5, 97.5])
        point = getattr(result.params, name)
        cis[name] = (min(float(lo), point), max(float(hi), point))
    return cis
