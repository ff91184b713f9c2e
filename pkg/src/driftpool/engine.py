"""End-to-end run orchestration: warm-up, online loop, metric accumulation.

A run splits the series 25:75 into a warm-up segment (stride-1 instance
pairs, conventional training of the single seed forecaster) and an
online segment whose instances advance by the full horizon, so no
ground-truth point is ever revealed before an earlier forecast of it
resolves. Each online step retrieves or splits a pool entry, forecasts,
scores, optionally trains (unless the ground truth itself signals a
shift, in which case the gradient is abandoned), and prunes the pool.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, SizingError, ValidationError
from .forecasters import make_forecaster, mse
from .gene import GeneState, GeneVector, compute_gene, ema_update, global_update
from .pool import (
    CepConfig,
    Pool,
    absorb_instance,
    effective_gene,
    lr_tick,
    should_evolve,
)

log = logging.getLogger("driftpool.engine")

DEFAULT_LR = {"naive": 0.01, "linear": 0.01, "mlp": 0.003}


@dataclass(frozen=True)
class Instance:
    """Input window, its ground truth, and the stream index of the window start."""

    x: np.ndarray
    y: np.ndarray
    t: int


@dataclass(frozen=True)
class EngineConfig:
    """Everything a run needs besides the series itself."""

    lookback: int
    horizon: int
    cep: CepConfig = field(default_factory=CepConfig)
    forecaster: str = "linear"
    hidden: int = 32
    lr_raw: float | None = None
    warm_epochs: int = 5
    seed: int = 0
    log_forecasts: bool = False

    def __post_init__(self):
        if self.lookback < 1:
            raise ValidationError(f"lookback must be >= 1, got {self.lookback}")
        if self.horizon < 1:
            raise ValidationError(f"horizon must be >= 1, got {self.horizon}")
        if self.warm_epochs < 0:
            raise ValidationError(f"warm_epochs must be >= 0, got {self.warm_epochs}")
        if self.lr_raw is not None and self.lr_raw <= 0:
            raise ValidationError(f"lr_raw must be > 0, got {self.lr_raw}")

    def resolved_lr(self) -> float:
        return self.lr_raw if self.lr_raw is not None else DEFAULT_LR[self.forecaster]

    def scope(self) -> int:
        return self.cep.scope_s if self.cep.scope_s is not None else self.lookback


@dataclass(frozen=True)
class StepRecord:
    """What happened on one online instance."""

    t: int
    selected_entry_id: int
    mse: float
    evolved: bool
    evolved_from: int | None
    abandoned: bool
    eliminated_ids: tuple[int, ...]
    pool_size: int
    gene_mu: float
    gene_sigma: float
    forecast: tuple[float, ...] | None = None


@dataclass
class RunResult:
    """Per-instance records plus run-level aggregates."""

    records: list[StepRecord]
    mean_mse: float
    final_pool_size: int
    total_evolutions: int
    total_eliminations: int
    pool: Pool | None = field(default=None, compare=False, repr=False)


def warm_split_index(n: int) -> int:
    """Number of leading points reserved for the warm-up stage (a 25:75 split)."""
    return n // 4


def make_instances(series: np.ndarray, start: int, stop: int, stride: int,
                   lookback: int, horizon: int) -> list[Instance]:
    """Instance pairs with window starts in [start, stop) at the given stride.

    An instance is kept only if its ground truth fits inside the series;
    the ground truth begins exactly at t + lookback, never overlapping
    the input window.
    """
    out = []
    span = lookback + horizon
    limit = min(stop, len(series) - span + 1)
    for t in range(start, limit, stride):
        out.append(Instance(x=series[t:t + lookback], y=series[t + lookback:t + span], t=t))
    return out


def split_instances(series: np.ndarray, lookback: int, horizon: int
                    ) -> tuple[list[Instance], list[Instance]]:
    """Warm (stride 1) and online (stride = horizon) instance sets."""
    n = len(series)
    warm_len = warm_split_index(n)
    span = lookback + horizon
    minimum = 4 * span
    if warm_len < span or (n - warm_len) < span:
        raise SizingError(
            f"series too short: {n} points; need at least {minimum} "
            f"for lookback {lookback} and horizon {horizon}"
        )
    warm = make_instances(series, 0, warm_len - span + 1, 1, lookback, horizon)
    online = make_instances(series, warm_len, n, horizon, lookback, horizon)
    return warm, online


def warm_up(pool: Pool, warm_instances: list[Instance], epochs: int,
            lr_raw: float, config: EngineConfig) -> list[float]:
    """Train the seed forecaster conventionally and let it absorb every window.

    Each training step counts toward the entry's prediction total, so it
    leaves the safety period before the online stage begins. Returns the
    per-step losses (handy for convergence checks); an empty warm set is
    a no-op.
    """
    if len(pool.entries) != 1:
        raise ValidationError(f"warm-up expects a single-entry pool, got {len(pool.entries)}")
    entry = pool.entries[0]
    scope = config.scope()
    losses: list[float] = []
    for _ in range(epochs):
        for inst in warm_instances:
            z = compute_gene(inst.x, scope)
            losses.append(entry.forecaster.train_step(inst.x, inst.y, lr_raw))
            absorb_instance(entry, z, config.cep)
            pool.mark_selected(entry)
    return losses


def online_step(pool: Pool, instance: Instance, config: EngineConfig) -> StepRecord:
    """One delayed-feedback step: retrieve or split, forecast, maybe train, prune."""
    cep = config.cep
    scope = config.scope()
    z_x = compute_gene(instance.x, scope)

    near = pool.nearest(z_x)
    evolved = should_evolve(near, z_x, cep)
    evicted: list[int] = []
    if evolved:
        ids_before = {e.id for e in pool.entries}
        current = pool.evolve(near, z_x)
        evicted = sorted(ids_before - {e.id for e in pool.entries})
        log.debug("t=%d evolved entry %d from %d", instance.t, current.id, near.id)
    else:
        current = near

    forecast = current.forecaster.predict(instance.x)
    if not np.isfinite(forecast).all():
        raise NumericError(f"non-finite forecast at t={instance.t}")
    err = mse(forecast, instance.y)

    z_y = compute_gene(instance.y, scope)
    abandoned = cep.gradient_abandonment and should_evolve(current, z_y, cep)
    if not abandoned:
        current.forecaster.train_step(instance.x, instance.y, current.lr_current)
        lr_tick(current, pool.lr_raw, cep)
        absorb_instance(current, z_x, cep)

    pool.mark_selected(current)
    removed = evicted + pool.eliminate_stale()
    if removed:
        log.debug("t=%d eliminated %s", instance.t, removed)

    g = effective_gene(current.genes, cep)
    return StepRecord(
        t=instance.t,
        selected_entry_id=current.id,
        mse=err,
        evolved=evolved,
        evolved_from=near.id if evolved else None,
        abandoned=abandoned,
        eliminated_ids=tuple(removed),
        pool_size=len(pool),
        gene_mu=g.mu,
        gene_sigma=g.sigma,
        forecast=tuple(float(v) for v in forecast) if config.log_forecasts else None,
    )


def _aggregate(records: list[StepRecord], pool_size: int, pool: Pool | None) -> RunResult:
    mean = float(np.mean([r.mse for r in records])) if records else float("nan")
    return RunResult(
        records=records,
        mean_mse=mean,
        final_pool_size=pool_size,
        total_evolutions=sum(1 for r in records if r.evolved),
        total_eliminations=sum(len(r.eliminated_ids) for r in records),
        pool=pool,
    )


def run(series: np.ndarray, config: EngineConfig) -> RunResult:
    """Full pipeline over one series: split, warm up, stream every online instance."""
    series = np.asarray(series, dtype=float)
    warm, online = split_instances(series, config.lookback, config.horizon)
    lr_raw = config.resolved_lr()
    forecaster = make_forecaster(
        config.forecaster, config.lookback, config.horizon,
        hidden=config.hidden, seed=config.seed,
    )
    pool = Pool(forecaster, lr_raw, config.cep)
    warm_up(pool, warm, config.warm_epochs, lr_raw, config)
    log.info("warm-up done: %d instances x %d epochs", len(warm), config.warm_epochs)
    records = [online_step(pool, inst, config) for inst in online]
    return _aggregate(records, len(pool), pool)


def run_bare(series: np.ndarray, config: EngineConfig) -> RunResult:
    """Single forecaster trained on every instance, no pool mechanics.

    Independent reference loop for ablation checks: a pool run with
    evolution disabled must reproduce this bit for bit.
    """
    series = np.asarray(series, dtype=float)
    warm, online = split_instances(series, config.lookback, config.horizon)
    lr_raw = config.resolved_lr()
    forecaster = make_forecaster(
        config.forecaster, config.lookback, config.horizon,
        hidden=config.hidden, seed=config.seed,
    )
    cep = config.cep
    scope = config.scope()
    genes = GeneState(GeneVector(0.0, 0.0), GeneVector(0.0, 0.0), 1)
    for _ in range(config.warm_epochs):
        for inst in warm:
            z = compute_gene(inst.x, scope)
            forecaster.train_step(inst.x, inst.y, lr_raw)
            new_global, new_n = global_update(genes.global_, genes.n, z)
            genes = GeneState(ema_update(genes.local, z, cep.tau_l), new_global, new_n)
    records = []
    for inst in online:
        forecast = forecaster.predict(inst.x)
        if not np.isfinite(forecast).all():
            raise NumericError(f"non-finite forecast at t={inst.t}")
        err = mse(forecast, inst.y)
        z = compute_gene(inst.x, scope)
        forecaster.train_step(inst.x, inst.y, lr_raw)
        new_global, new_n = global_update(genes.global_, genes.n, z)
        genes = GeneState(ema_update(genes.local, z, cep.tau_l), new_global, new_n)
        g = effective_gene(genes, cep)
        records.append(StepRecord(
            t=inst.t,
            selected_entry_id=0,
            mse=err,
            evolved=False,
            evolved_from=None,
            abandoned=False,
            eliminated_ids=(),
            pool_size=1,
            gene_mu=g.mu,
            gene_sigma=g.sigma,
            forecast=tuple(float(v) for v in forecast) if config.log_forecasts else None,
        ))
    return _aggregate(records, 1, None)
