"""Gradient-based MCMC: leapfrog integration, No-U-Turn trajectories,
dual-averaging step size adaptation, multi-chain orchestration, and
convergence diagnostics.

The sampler works on any caller-supplied differentiable log density over an
unconstrained real vector.  Trajectories are built by multiplicative doubling
with the U-turn termination rule; the next state is selected multinomially
among the leapfrog states, with the usual bias toward the freshly doubled
subtree.  The metric is the identity: targets here are at most a few hundred
dimensions and the models standardize their data, which keeps parameter
scales comparable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .rng import RngState

__all__ = [
    "ChainDiagnostics",
    "DivergenceError",
    "LogDensityTarget",
    "NutsConfig",
    "SampleChain",
    "diagnostics",
    "leapfrog",
    "nuts_sample",
]

# Energy error (in nats) beyond which a transition is declared divergent.
DIVERGENCE_THRESHOLD = 1000.0
STEP_SIZE_MIN = 1e-8
STEP_SIZE_MAX = 1e2

# Dual averaging constants (shrinkage strength, iteration offset, decay rate).
_DA_GAMMA = 0.05
_DA_T0 = 10.0
_DA_KAPPA = 0.75


class DivergenceError(RuntimeError):
    """Raised when a chain is dominated by divergent transitions."""


@dataclass(frozen=True)
class LogDensityTarget:
    """A differentiable log density on R^dimension.

    ``value_and_grad`` maps an unconstrained position to the log-density value
    and its gradient.  It must be pure and deterministic; points where the
    model diverges are signalled by a value of -inf (the gradient is then
    ignored).
    """

    dimension: int
    value_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]]

    def __call__(self, z: np.ndarray) -> tuple[float, np.ndarray]:
        value, grad = self.value_and_grad(z)
        return float(value), np.asarray(grad, dtype=np.float64)


@dataclass(frozen=True)
class NutsConfig:
    warmup: int = 500
    samples: int = 500
    chains: int = 1
    target_accept: float = 0.8
    max_tree_depth: int = 10
    step_size: float | None = None  # None means auto (tuned from a heuristic)
    rng: RngState = field(default_factory=lambda: RngState(0))

    def __post_init__(self) -> None:
        if self.warmup < 10:
            raise ValueError("warmup must be at least 10 steps")
        if self.samples < 1:
            raise ValueError("need at least one kept sample")
        if self.chains < 1:
            raise ValueError("need at least one chain")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        if not 1 <= self.max_tree_depth <= 15:
            raise ValueError("max_tree_depth must lie in [1, 15]")
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be positive")


@dataclass(frozen=True)
class SampleChain:
    """Kept draws of one chain plus its transition statistics."""

    draws: np.ndarray  # (samples, dimension)
    accept_stat_mean: float
    divergence_count: int
    adapted_step_size: float
    max_leapfrog_steps: int = 0


@dataclass
class _State:
    z: np.ndarray
    r: np.ndarray
    logp: float
    grad: np.ndarray

    def energy(self) -> float:
        return -self.logp + 0.5 * float(self.r @ self.r)


@dataclass
class _LeapfrogResult:
    z: np.ndarray
    r: np.ndarray
    logp: float
    grad: np.ndarray
    diverged: bool


def leapfrog(
    target: LogDensityTarget,
    z: np.ndarray,
    r: np.ndarray,
    eps: float,
    logp: float | None = None,
    grad: np.ndarray | None = None,
) -> _LeapfrogResult:
    """One half-kick / drift / half-kick update with unit mass.

    The step is reversible: integrating back with negated momentum recovers
    the initial state up to floating point error.  The result is flagged
    divergent when the log density is -inf or the energy error over the step
    exceeds ``DIVERGENCE_THRESHOLD``.
    """
    if eps <= 0:
        raise ValueError("step size must be positive")
    z = np.asarray(z, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if logp is None or grad is None:
        logp, grad = target(z)
    energy_start = -logp + 0.5 * float(r @ r)

    r_half = r + 0.5 * eps * grad
    z_new = z + eps * r_half
    logp_new, grad_new = target(z_new)
    r_new = r_half + 0.5 * eps * grad_new

    if not (np.isfinite(logp_new) and np.all(np.isfinite(grad_new)) and np.all(np.isfinite(r_new))):
        return _LeapfrogResult(z_new, r_new, -np.inf, grad_new, True)
    energy_end = -logp_new + 0.5 * float(r_new @ r_new)
    diverged = not math.isfinite(energy_end) or (energy_end - energy_start) > DIVERGENCE_THRESHOLD
    return _LeapfrogResult(z_new, r_new, logp_new, grad_new, diverged)


def _find_reasonable_epsilon(
    target: LogDensityTarget, state: _State, rng: np.random.Generator
) -> float:
    """Coarse initial step size: doubled or halved until the one-step
    acceptance probability crosses 1/2."""
    eps = 1.0
    r = rng.standard_normal(target.dimension)
    energy0 = -state.logp + 0.5 * float(r @ r)

    def log_accept(eps: float) -> float:
        step = leapfrog(target, state.z, r, eps, state.logp, state.grad)
        if not math.isfinite(step.logp):
            return -np.inf
        return energy0 - (-step.logp + 0.5 * float(step.r @ step.r))

    la = log_accept(eps)
    while not math.isfinite(la) and eps > STEP_SIZE_MIN:
        eps *= 0.5
        la = log_accept(eps)
    direction = 1.0 if la > math.log(0.5) else -1.0
    for _ in range(64):
        eps_next = eps * 2.0**direction
        if not STEP_SIZE_MIN <= eps_next <= STEP_SIZE_MAX:
            break
        la = log_accept(eps_next)
        if direction * la <= direction * math.log(0.5):
            break
        eps = eps_next
    return min(max(eps, STEP_SIZE_MIN), STEP_SIZE_MAX)


@dataclass
class _Subtree:
    minus: _State
    plus: _State
    proposal: _State
    log_sum_weight: float
    metro_sum: float
    n_leapfrog: int
    diverged: bool
    turning: bool


def _is_turning(minus: _State, plus: _State) -> bool:
    dz = plus.z - minus.z
    return float(dz @ minus.r) < 0.0 or float(dz @ plus.r) < 0.0


def _build_tree(
    target: LogDensityTarget,
    state: _State,
    depth: int,
    direction: int,
    eps: float,
    energy0: float,
    rng: np.random.Generator,
) -> _Subtree:
    if depth == 0:
        step = leapfrog(target, state.z, direction * state.r, eps, state.logp, state.grad)
        new = _State(step.z, direction * step.r, step.logp, step.grad)
        if math.isfinite(step.logp):
            delta = (-step.logp + 0.5 * float(step.r @ step.r)) - energy0
        else:
            delta = np.inf
        diverged = not math.isfinite(delta) or delta > DIVERGENCE_THRESHOLD
        log_weight = -np.inf if diverged else -delta
        metro = 0.0 if not math.isfinite(delta) else min(1.0, math.exp(-delta))
        return _Subtree(new, new, new, log_weight, metro, 1, diverged, False)

    first = _build_tree(target, state, depth - 1, direction, eps, energy0, rng)
    if first.diverged or first.turning:
        return first

    outer = first.plus if direction == 1 else first.minus
    second = _build_tree(target, outer, depth - 1, direction, eps, energy0, rng)

    if direction == 1:
        minus, plus = first.minus, second.plus
    else:
        minus, plus = second.minus, first.plus
    metro_sum = first.metro_sum + second.metro_sum
    n_leapfrog = first.n_leapfrog + second.n_leapfrog
    if second.diverged or second.turning:
        # An invalid inner subtree invalidates the whole subtree; its states
        # never enter the selection.
        return _Subtree(
            minus, plus, first.proposal, -np.inf, metro_sum, n_leapfrog,
            second.diverged, second.turning,
        )

    log_sum_weight = np.logaddexp(first.log_sum_weight, second.log_sum_weight)
    # Multinomial selection among the states of the combined subtree.
    proposal = first.proposal
    if math.log(rng.random()) < second.log_sum_weight - log_sum_weight:
        proposal = second.proposal
    return _Subtree(
        minus,
        plus,
        proposal,
        log_sum_weight,
        metro_sum,
        n_leapfrog,
        False,
        _is_turning(minus, plus),
    )


@dataclass
class _Transition:
    state: _State
    accept_stat: float
    diverged: bool
    n_leapfrog: int


def _transition(
    target: LogDensityTarget,
    current: _State,
    eps: float,
    max_depth: int,
    rng: np.random.Generator,
) -> _Transition:
    r0 = rng.standard_normal(target.dimension)
    start = _State(current.z, r0, current.logp, current.grad)
    energy0 = start.energy()

    minus = _State(start.z, r0.copy(), start.logp, start.grad)
    plus = _State(start.z, r0.copy(), start.logp, start.grad)
    proposal = start
    log_sum_weight = 0.0
    metro_sum = 0.0
    n_leapfrog = 0
    diverged = False

    for depth in range(max_depth):
        direction = 1 if rng.random() < 0.5 else -1
        edge = plus if direction == 1 else minus
        subtree = _build_tree(target, edge, depth, direction, eps, energy0, rng)
        metro_sum += subtree.metro_sum
        n_leapfrog += subtree.n_leapfrog
        if subtree.diverged:
            diverged = True
            break
        if direction == 1:
            plus = subtree.plus
        else:
            minus = subtree.minus
        if subtree.turning:
            break
        # Bias the proposal toward the new subtree, then pool the weights.
        if math.log(rng.random()) < subtree.log_sum_weight - log_sum_weight:
            proposal = subtree.proposal
        log_sum_weight = np.logaddexp(log_sum_weight, subtree.log_sum_weight)
        if _is_turning(minus, plus):
            break

    accept_stat = metro_sum / max(n_leapfrog, 1)
    return _Transition(proposal, accept_stat, diverged, n_leapfrog)


def _init_state(
    target: LogDensityTarget,
    init: np.ndarray | Callable[[np.random.Generator], np.ndarray],
    rng: np.random.Generator,
) -> _State:
    z0 = np.asarray(init(rng) if callable(init) else init, dtype=np.float64).ravel()
    if z0.shape[0] != target.dimension:
        raise ValueError("initial position has wrong dimension")
    if not np.all(np.isfinite(z0)):
        raise ValueError("initial position must be finite")
    logp, grad = target(z0)
    if not math.isfinite(logp):
        raise ValueError("log density is -inf at the initial position")
    return _State(z0, np.zeros_like(z0), logp, grad)


def _run_chain(
    target: LogDensityTarget,
    init: np.ndarray | Callable[[np.random.Generator], np.ndarray],
    cfg: NutsConfig,
    chain_index: int,
) -> SampleChain:
    rng = cfg.rng.child(f"chain-{chain_index}").generator()
    state = _init_state(target, init, rng)

    eps = cfg.step_size if cfg.step_size is not None else _find_reasonable_epsilon(target, state, rng)
    eps = min(max(eps, STEP_SIZE_MIN), STEP_SIZE_MAX)

    # Dual averaging toward the target acceptance statistic (warmup only).
    mu = math.log(10.0 * eps)
    log_eps_bar = math.log(eps)
    h_bar = 0.0
    for m in range(1, cfg.warmup + 1):
        trans = _transition(target, state, eps, cfg.max_tree_depth, rng)
        state = trans.state
        frac = 1.0 / (m + _DA_T0)
        h_bar = (1.0 - frac) * h_bar + frac * (cfg.target_accept - trans.accept_stat)
        log_eps = mu - math.sqrt(m) / _DA_GAMMA * h_bar
        log_eps = min(max(log_eps, math.log(STEP_SIZE_MIN)), math.log(STEP_SIZE_MAX))
        eta = m**-_DA_KAPPA
        log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar
        eps = math.exp(log_eps)
    eps = math.exp(min(max(log_eps_bar, math.log(STEP_SIZE_MIN)), math.log(STEP_SIZE_MAX)))

    draws = np.empty((cfg.samples, target.dimension))
    accept_sum = 0.0
    accept_n = 0
    divergences = 0
    max_steps = 0
    for i in range(cfg.samples):
        trans = _transition(target, state, eps, cfg.max_tree_depth, rng)
        state = trans.state
        draws[i] = state.z
        max_steps = max(max_steps, trans.n_leapfrog)
        if trans.diverged:
            divergences += 1
        else:
            accept_sum += trans.accept_stat
            accept_n += 1

    if divergences > 0.5 * cfg.samples:
        raise DivergenceError(
            f"chain {chain_index}: {divergences}/{cfg.samples} post-warmup transitions "
            "diverged; the target is pathological or badly initialized"
        )
    return SampleChain(
        draws=draws,
        accept_stat_mean=accept_sum / max(accept_n, 1),
        divergence_count=divergences,
        adapted_step_size=eps,
        max_leapfrog_steps=max_steps,
    )


def nuts_sample(
    target: LogDensityTarget,
    init: np.ndarray | Callable[[np.random.Generator], np.ndarray],
    cfg: NutsConfig,
) -> list[SampleChain]:
    """Run ``cfg.chains`` independent chains and return them in chain order.

    ``init`` is either a fixed position or a callable drawing one from the
    chain's private generator (models draw from their prior).
    """
    return [_run_chain(target, init, cfg, c) for c in range(cfg.chains)]


@dataclass(frozen=True)
class ChainDiagnostics:
    mean: np.ndarray
    std: np.ndarray
    rhat: np.ndarray
    divergences: int
    accept_stat_mean: float

    @property
    def max_rhat(self) -> float:
        return float(np.max(self.rhat))


def _split_rhat(samples: np.ndarray) -> np.ndarray:
    """Split-half potential scale reduction, parameter-wise.

    ``samples`` is (chains, draws, dim).  Degenerate (zero-variance) cases
    report 1.0 by convention.
    """
    chains, draws, dim = samples.shape
    half = draws // 2
    seqs = np.concatenate([samples[:, :half, :], samples[:, half : 2 * half, :]], axis=0)
    n = half
    means = seqs.mean(axis=1)  # (2*chains, dim)
    variances = seqs.var(axis=1, ddof=1)  # (2*chains, dim)
    between = n * means.var(axis=0, ddof=1)
    within = variances.mean(axis=0)
    rhat = np.ones(dim)
    ok = within > 1e-300
    var_plus = (n - 1) / n * within[ok] + between[ok] / n
    rhat[ok] = np.sqrt(var_plus / within[ok])
    degenerate = (~ok) & (between > 1e-300)
    rhat[degenerate] = np.inf
    return rhat


def diagnostics(chains: Sequence[SampleChain]) -> ChainDiagnostics:
    """Pooled mean/std, split-Rhat per parameter, and divergence totals."""
    if len(chains) < 1:
        raise ValueError("need at least one chain")
    draws = np.stack([c.draws for c in chains], axis=0)
    if draws.shape[1] < 4:
        raise ValueError("need at least 4 kept samples per chain")
    pooled = draws.reshape(-1, draws.shape[-1])
    return ChainDiagnostics(
        mean=pooled.mean(axis=0),
        std=pooled.std(axis=0),
        rhat=_split_rhat(draws),
        divergences=sum(c.divergence_count for c in chains),
        accept_stat_mean=float(np.mean([c.accept_stat_mean for c in chains])),
    )
