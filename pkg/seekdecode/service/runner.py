"""
Monte Carlo sweeps. Every trial draws from its own generator seeded by

    SeedSequence([seed, stream, snr index, G or K index, trial])

so results do not depend on how trials are split across worker processes, and every strategy sees the same traffic,
fading and noise for a given trial.
"""

import logging
import math
import typing as t
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from opentelemetry import trace
from pydantic import ValidationError
from scipy import stats

from seekdecode.core.bound import DecodeProbabilityTable, estimate_ptilde, evaluate_bound, merge_tables
from seekdecode.core.channel import draw_fading, synthesize_slot
from seekdecode.core.code import encode
from seekdecode.core.errors import ConfigError
from seekdecode.core.frame import CI_Z, FrameStrategy, FrameSummary, compute_metrics, generate_traffic, simulate_frame
from seekdecode.core.phydec import DecoderStrategy, decode_slot
from seekdecode.service.config import ExperimentConfig, load_code_spec
from seekdecode.util.asyncpool import map_in_processes
from seekdecode.util.config import StrictBaseModel

logger = logging.getLogger(__name__)
tracer = trace.get_tracer(__name__)

SIMULATE_STREAM = 0
SLOT_STUDY_STREAM = 1
BOUND_STREAM = 2

# Trials per work item. Fixed so the bound estimate, which shares one generator per item, is worker-count independent
CHUNK_TRIALS = 25
BOUND_CHUNK_TRIALS = 250


def trial_rng(seed: int, stream: int, *coordinates: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream, *coordinates]))


def _chunks(trials: int, size: int) -> list[tuple[int, int]]:
    return [(start, min(start + size, trials)) for start in range(0, trials, size)]


class SimulateRow(StrictBaseModel):
    strategy: str
    snr_db: float
    G: float
    g_realized: float
    phi: float
    sum_rate: float
    plr: float
    plr_defined: bool
    energy_eff: float
    innov_mean: float
    ci_phi: float
    ci_sum_rate: float
    ci_plr: float
    ci_innov: float
    trials: int
    seed: int


class SlotStudyRow(StrictBaseModel):
    strategy: str
    K: int
    snr_db: float
    innov_mean: float
    ci_innov: float
    combinations_mean: float
    attempts_mean: float
    bp_iterations_mean: float
    trials: int
    seed: int


class BoundRow(StrictBaseModel):
    snr_db: float
    G: float
    phi_ub: float
    phi_ub_alt: float
    phi_ub_q: float
    p_full_rank: float
    p_full_rank_large_field: float
    n_tx_limit: int
    n_bc: int
    table_source: str


@dataclass(frozen=True)
class SimulateChunk:
    cfg: ExperimentConfig
    strategy: FrameStrategy
    snr_index: int
    g_index: int
    trials: tuple[int, int]


def simulate_chunk(chunk: SimulateChunk) -> list[FrameSummary]:
    cfg = chunk.cfg
    spec = load_code_spec(cfg)
    snr_db, g = cfg.snr_db[chunk.snr_index], cfg.g_grid[chunk.g_index]
    policy = chunk.strategy.policy(cfg.repetition)
    summaries = []
    for trial in range(*chunk.trials):
        rng = trial_rng(cfg.seed, SIMULATE_STREAM, chunk.snr_index, chunk.g_index, trial)
        plan = generate_traffic(g, cfg.slots, cfg.terminals, policy, rng, field=cfg.field, message_bits=spec.k)
        outcome = simulate_frame(plan, spec, chunk.strategy, snr_db, rng, cfg.decode_options(), cfg.fading_power)
        summaries.append(outcome.summary())
    return summaries


async def run_experiment(cfg: ExperimentConfig) -> list[SimulateRow]:
    "Frame-level sweep over strategy x SNR x G"
    spec = load_code_spec(cfg)
    rows = []
    for strategy in cfg.strategies:
        for snr_index, snr_db in enumerate(cfg.snr_db):
            for g_index, g in enumerate(cfg.g_grid):
                attributes = {"strategy": str(strategy), "snr_db": snr_db, "G": g, "trials": cfg.trials}
                with tracer.start_as_current_span("simulate.cell", attributes=attributes):
                    chunks = [SimulateChunk(cfg, strategy, snr_index, g_index, span) for span in _chunks(cfg.trials, CHUNK_TRIALS)]
                    parts = await map_in_processes(simulate_chunk, chunks, cfg.workers)
                report = compute_metrics([s for part in parts for s in part], spec.rate)
                logger.info(f"{strategy} {snr_db} dB G={g}: phi={report.phi:.4f} plr={report.plr:.4f}")
                rows.append(
                    SimulateRow(
                        strategy=str(strategy),
                        snr_db=snr_db,
                        G=g,
                        g_realized=report.g_realized,
                        phi=report.phi,
                        sum_rate=report.sum_rate,
                        plr=report.plr,
                        plr_defined=report.plr_defined,
                        energy_eff=report.energy_eff,
                        innov_mean=report.innov_mean,
                        ci_phi=report.ci_phi,
                        ci_sum_rate=report.ci_sum_rate,
                        ci_plr=report.ci_plr,
                        ci_innov=report.ci_innov,
                        trials=cfg.trials,
                        seed=cfg.seed,
                    )
                )
    return rows


@dataclass(frozen=True)
class SlotSummary:
    innovative: int
    combinations: int
    attempts: int
    bp_iterations: int


@dataclass(frozen=True)
class SlotStudyChunk:
    cfg: ExperimentConfig
    strategy: DecoderStrategy
    k_index: int
    snr_index: int
    trials: tuple[int, int]


def slot_study_chunk(chunk: SlotStudyChunk) -> list[SlotSummary]:
    cfg = chunk.cfg
    spec = load_code_spec(cfg)
    k = cfg.slot_k[chunk.k_index]
    # the study looks at one collision size on purpose, the k_max cap does not apply
    options = cfg.decode_options().model_copy(update={"k_max": max(cfg.k_max, k)})
    summaries = []
    for trial in range(*chunk.trials):
        rng = trial_rng(cfg.seed, SLOT_STUDY_STREAM, chunk.snr_index, chunk.k_index, trial)
        messages = rng.integers(0, 2, size=(k, spec.k), dtype=np.uint8)
        realization = draw_fading(k, cfg.snr_db[chunk.snr_index], rng, cfg.fading_power)
        slot = synthesize_slot([encode(m, spec) for m in messages], realization, rng, messages=messages)
        result = decode_slot(chunk.strategy, slot, spec, options)
        summaries.append(
            SlotSummary(
                innovative=result.innovative_count,
                combinations=len(result.combinations),
                attempts=result.counters.decode_attempts,
                bp_iterations=result.counters.bp_iterations,
            )
        )
    return summaries


def _decoders(strategies: t.Iterable[FrameStrategy]) -> list[DecoderStrategy]:
    decoders: list[DecoderStrategy] = []
    for strategy in strategies:
        if strategy != FrameStrategy.ALOHA and strategy.decoder not in decoders:
            decoders.append(strategy.decoder)
    return decoders


async def run_slot_study(cfg: ExperimentConfig) -> list[SlotStudyRow]:
    "Innovative packets per slot for each receiver, collision size and SNR"
    load_code_spec(cfg)
    rows = []
    for strategy in _decoders(cfg.strategies):
        for k_index, k in enumerate(cfg.slot_k):
            for snr_index, snr_db in enumerate(cfg.snr_db):
                with tracer.start_as_current_span("slot_study.cell", attributes={"strategy": str(strategy), "K": k, "snr_db": snr_db}):
                    chunks = [SlotStudyChunk(cfg, strategy, k_index, snr_index, span) for span in _chunks(cfg.trials, CHUNK_TRIALS)]
                    parts = await map_in_processes(slot_study_chunk, chunks, cfg.workers)
                summaries = [s for part in parts for s in part]
                innovative = np.array([s.innovative for s in summaries], dtype=np.float64)
                rows.append(
                    SlotStudyRow(
                        strategy=str(strategy),
                        K=k,
                        snr_db=snr_db,
                        innov_mean=float(innovative.mean()),
                        ci_innov=float(CI_Z * stats.sem(innovative)) if innovative.size > 1 else math.nan,
                        combinations_mean=float(np.mean([s.combinations for s in summaries])),
                        attempts_mean=float(np.mean([s.attempts for s in summaries])),
                        bp_iterations_mean=float(np.mean([s.bp_iterations for s in summaries])),
                        trials=cfg.trials,
                        seed=cfg.seed,
                    )
                )
                logger.info(f"{strategy} K={k} {snr_db} dB: {innovative.mean():.3f} innovative per slot")
    return rows


@dataclass(frozen=True)
class BoundChunk:
    cfg: ExperimentConfig
    snr_index: int
    chunk_index: int
    trials: int


def bound_chunk(chunk: BoundChunk) -> DecodeProbabilityTable:
    cfg = chunk.cfg
    rng = trial_rng(cfg.seed, BOUND_STREAM, chunk.snr_index, chunk.chunk_index)
    return estimate_ptilde(
        cfg.k_max, cfg.snr_db[chunk.snr_index], load_code_spec(cfg), chunk.trials, rng, max_iters=cfg.max_iters, power=cfg.fading_power
    )


async def estimate_table(cfg: ExperimentConfig, snr_index: int) -> DecodeProbabilityTable:
    with tracer.start_as_current_span("bound.estimate", attributes={"snr_db": cfg.snr_db[snr_index], "trials": cfg.bound_trials}):
        spans = _chunks(cfg.bound_trials, BOUND_CHUNK_TRIALS)
        chunks = [BoundChunk(cfg, snr_index, index, stop - start) for index, (start, stop) in enumerate(spans)]
        return merge_tables(await map_in_processes(bound_chunk, chunks, cfg.workers))


def load_table(path: Path) -> DecodeProbabilityTable:
    try:
        return DecodeProbabilityTable.from_text(path.read_text())
    except OSError as e:
        raise ConfigError(f"cannot read decode-probability table {path}: {e}") from e
    except (ValueError, ValidationError) as e:
        raise ConfigError(f"malformed decode-probability table {path}: {e}") from e


async def run_bound(cfg: ExperimentConfig) -> tuple[list[BoundRow], list[DecodeProbabilityTable]]:
    """
    The throughput bound per SNR and G, using a cached decode-probability table when configured and a fresh Monte
    Carlo estimate otherwise. Returns the rows and the tables they were computed from.
    """
    if cfg.bound_table is None:
        load_code_spec(cfg)
    rows = []
    tables = []
    for snr_index, snr_db in enumerate(cfg.snr_db):
        if cfg.bound_table is not None:
            table = load_table(cfg.bound_table)
            source = str(cfg.bound_table)
        else:
            table = await estimate_table(cfg, snr_index)
            source = f"estimated:{cfg.bound_trials}"
        tables.append(table)
        for point in evaluate_bound(cfg.bound_config(), table):
            rows.append(
                BoundRow(
                    snr_db=snr_db,
                    G=point.g,
                    phi_ub=point.phi_ub,
                    phi_ub_alt=point.phi_ub_alt,
                    phi_ub_q=point.phi_ub_q,
                    p_full_rank=point.p_full_rank,
                    p_full_rank_large_field=point.p_full_rank_large_field,
                    n_tx_limit=point.n_tx_limit,
                    n_bc=cfg.n_bc,
                    table_source=source,
                )
            )
    return rows, tables
