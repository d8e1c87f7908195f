"""
Upper bound on the frame throughput when every active user transmits in each slot with probability p.

Per slot, a collision of K users yields up to 2^K - 1 combinations, each assumed decodable independently with
probability p~_K (the best over i of decoding the XOR of the i strongest users). The number of combinations per frame
is approximated as Gaussian with S times the per-slot moments, and a frame is counted as fully recovered when it
holds at least as many combinations as active users (large field) or, with the finite-field factor, when those
combinations also give a full-rank coefficient matrix. The independence assumption makes this an approximation of a
bound, and the Gaussian step assumes S is large.
"""

import logging
import math
import typing as t
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy import stats

from seekdecode.core.channel import FadingPower, draw_fading, synthesize_slot
from seekdecode.core.code import DEFAULT_MAX_ITERS, CodeSpec, decode_soft, encode
from seekdecode.core.errors import BoundTruncationError
from seekdecode.core.gf2m import full_rank_probabilities, full_rank_probability
from seekdecode.core.phydec import llr_combination, llr_separate
from seekdecode.util.config import StrictBaseModel
from seekdecode.util.enum import CaseInsensitiveEnum

logger = logging.getLogger(__name__)

GAUSSIAN_WINDOW = 8.0
# Windows wider than this many integers are summed through the normal CDF
DENSE_SUPPORT = 100_000
# Beyond this excess of combinations over users the rank factor is 1 to double precision for every q >= 2
RANK_EXCESS = 64


class TableEntry(BaseModel):
    k: int = Field(ge=1)
    i: int = Field(ge=1)
    estimate: float = Field(ge=0.0, le=1.0)
    half_width: float = Field(default=0.0, ge=0.0)
    successes: int = Field(default=0, ge=0)
    trials: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_subset(self) -> "TableEntry":
        if self.i > self.k:
            raise ValueError(f"subset size {self.i} exceeds collision size {self.k}")
        return self


class DecodeProbabilityTable(BaseModel):
    """
    p_{K,i}: probability of decoding the XOR of the i strongest users out of a collision of K at one SNR. Collision
    sizes absent from the table decode with probability 0.
    """

    snr_db: float | None = None
    entries: list[TableEntry] = Field(default_factory=list)

    @classmethod
    def from_envelope(cls, ptilde: t.Sequence[float], snr_db: float | None = None) -> "DecodeProbabilityTable":
        "A table whose envelope is ptilde[K-1] for K = 1..len(ptilde)"
        return cls(snr_db=snr_db, entries=[TableEntry(k=k, i=1, estimate=p) for k, p in enumerate(ptilde, start=1)])

    @property
    def k_max(self) -> int:
        return max((e.k for e in self.entries), default=0)

    def p(self, k: int, i: int) -> float:
        return next((e.estimate for e in self.entries if e.k == k and e.i == i), 0.0)

    def ptilde(self, k: int) -> float:
        return max((e.estimate for e in self.entries if e.k == k), default=0.0)

    def to_text(self) -> str:
        lines = [f"# snr_db={'' if self.snr_db is None else format(self.snr_db, '.12g')}", "# K i estimate half_width successes trials"]
        for e in sorted(self.entries, key=lambda e: (e.k, e.i)):
            lines.append(f"{e.k} {e.i} {e.estimate:.12g} {e.half_width:.12g} {e.successes} {e.trials}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DecodeProbabilityTable":
        snr_db = None
        entries = []
        for line in text.splitlines():
            line = line.strip()
            if line.startswith("# snr_db="):
                value = line.removeprefix("# snr_db=")
                snr_db = float(value) if value else None
            if not line or line.startswith("#"):
                continue
            k, i, estimate, half_width, successes, trials = line.split()
            entries.append(
                TableEntry(
                    k=int(k), i=int(i), estimate=float(estimate), half_width=float(half_width), successes=int(successes), trials=int(trials)
                )
            )
        return cls(snr_db=snr_db, entries=entries)


def estimate_ptilde(
    k_max: int,
    snr_db: float,
    spec: CodeSpec,
    trials: int,
    rng: np.random.Generator,
    *,
    max_iters: int = DEFAULT_MAX_ITERS,
    power: FadingPower = FadingPower.SNR,
) -> DecodeProbabilityTable:
    """
    Monte Carlo estimate of p_{K,i} for K <= k_max: in each trial a K-user collision is drawn, and for every i the XOR
    of the i strongest users is decoded against the full collision. Half-widths are Wilson 95% intervals.
    """
    if trials < 1 or k_max < 1:
        raise ValueError("estimate_ptilde needs trials >= 1 and k_max >= 1")
    entries = []
    for k in range(1, k_max + 1):
        successes = np.zeros(k, dtype=np.int64)
        for _ in range(trials):
            messages = rng.integers(0, 2, size=(k, spec.k), dtype=np.uint8)
            codewords = [encode(m, spec) for m in messages]
            realization = draw_fading(k, snr_db, rng, power)
            slot = synthesize_slot(codewords, realization, rng, messages=messages)
            order = np.argsort(-realization.gains, kind="stable")
            for i in range(1, k + 1):
                top, rest = order[:i], order[i:]
                if i == 1:
                    llrs = llr_separate(slot.samples, realization.gains, int(top[0]))
                else:
                    llrs = llr_combination(slot.samples, realization.gains[top], realization.gains[rest])
                result = decode_soft(llrs, spec, max_iters)
                indicator = np.zeros(k, dtype=np.uint8)
                indicator[top] = 1
                if result.message is not None and slot.verifies(indicator, result.message):
                    successes[i - 1] += 1
        entries += [_wilson_entry(k, i, int(successes[i - 1]), trials) for i in range(1, k + 1)]
        logger.info(f"p~ at {snr_db} dB, K={k}: {max(successes) / trials:.4f}")
    return DecodeProbabilityTable(snr_db=snr_db, entries=entries)


def _wilson_entry(k: int, i: int, successes: int, trials: int) -> TableEntry:
    ci = stats.binomtest(successes, trials).proportion_ci(method="wilson")
    return TableEntry(k=k, i=i, estimate=successes / trials, half_width=(ci.high - ci.low) / 2.0, successes=successes, trials=trials)


def merge_tables(tables: t.Sequence[DecodeProbabilityTable]) -> DecodeProbabilityTable:
    "Pool the success counts of independently estimated tables"
    counts: dict[tuple[int, int], list[int]] = {}
    for table in tables:
        for e in table.entries:
            pooled = counts.setdefault((e.k, e.i), [0, 0])
            pooled[0] += e.successes
            pooled[1] += e.trials
    entries = [_wilson_entry(k, i, s, n) for (k, i), (s, n) in sorted(counts.items()) if n > 0]
    return DecodeProbabilityTable(snr_db=tables[0].snr_db if tables else None, entries=entries)


def epsilon_moments(n_tx: int, p: float, table: DecodeProbabilityTable) -> tuple[float, float]:
    """
    Mean and variance of the number of combinations decoded in one slot: the collision size is Binomial(n_tx, p) and
    a collision of K yields Binomial(2^K - 1, p~_K) combinations.
    """
    if n_tx < 1:
        raise ValueError("epsilon_moments needs at least one active user")
    sizes = np.arange(1, n_tx + 1)
    weights = stats.binom.pmf(sizes, n_tx, p)
    combos = np.exp2(sizes.astype(np.float64)) - 1.0
    ptilde = np.array([table.ptilde(int(k)) for k in sizes])
    mean_k = combos * ptilde
    mean = float(np.sum(weights * mean_k))
    second = float(np.sum(weights * (mean_k * (1.0 - ptilde) + mean_k**2)))
    return mean, max(second - mean * mean, 0.0)


class BoundWeights(CaseInsensitiveEnum):
    NORMALIZED = "normalized"
    RAW = "raw"


class BoundConfig(StrictBaseModel):
    g_grid: list[float] = Field(min_length=1)
    slots: int = Field(default=10, ge=1)
    n_bc: int = Field(default=8, ge=1, le=16)
    # per-slot transmission probability; defaults to 1 - 2^-n_bc
    p: float | None = Field(default=None, gt=0.0, le=1.0)
    epsilon: float = Field(default=1e-9, gt=0.0, lt=1.0)
    max_n_tx: int = Field(default=400, ge=1)
    weights: BoundWeights = BoundWeights.NORMALIZED

    @property
    def q(self) -> int:
        return 1 << self.n_bc

    @property
    def transmit_probability(self) -> float:
        return self.p if self.p is not None else 1.0 - 2.0**-self.n_bc


@dataclass(frozen=True)
class BoundPoint:
    """
    phi_ub and phi_ub_alt are two forms of the large-field bound, the second scaled by G; they need not agree.
    phi_ub_q applies the finite-field rank factor. p_full_rank and p_full_rank_large_field are the probabilities of
    full recovery with and without that factor.
    """

    g: float
    phi_ub: float
    phi_ub_alt: float
    phi_ub_q: float
    p_full_rank: float
    p_full_rank_large_field: float
    n_tx_limit: int


def _full_recovery(n_tx: int, cfg: BoundConfig, table: DecodeProbabilityTable) -> tuple[float, float]:
    """
    Probability that a frame with n_tx active users decodes at least n_tx combinations, and the same probability
    weighted by the chance that those combinations form a full-rank matrix over GF(q). The number of combinations is
    Gaussian with S times the per-slot moments, evaluated at the integers of a window of GAUSSIAN_WINDOW standard
    deviations clipped to [0, S(2^n_tx - 1)].
    """
    mean, var = epsilon_moments(n_tx, cfg.transmit_probability, table)
    mu, sigma2 = cfg.slots * mean, cfg.slots * var
    if sigma2 <= 0.0:
        count = round(mu)
        if count < n_tx:
            return 0.0, 0.0
        return 1.0, full_rank_probability(n_tx, count - n_tx, cfg.q)

    sd = math.sqrt(sigma2)
    lo = max(0, math.floor(mu - GAUSSIAN_WINDOW * sd))
    hi = min(cfg.slots * (2**n_tx - 1), math.ceil(mu + GAUSSIAN_WINDOW * sd))
    if hi < n_tx:
        return 0.0, 0.0

    if hi - lo <= DENSE_SUPPORT:
        support = np.arange(lo, hi + 1, dtype=np.float64)
        weights = stats.norm.pdf(support, loc=mu, scale=sd)
        norm = weights.sum() if cfg.weights == BoundWeights.NORMALIZED else 1.0
        if norm <= 0.0:
            return 0.0, 0.0
        enough = support >= n_tx
        large_field = float(weights[enough].sum() / norm)
        finite_field = float(np.sum(weights[enough] * full_rank_probabilities(n_tx, support[enough] - n_tx, cfg.q)) / norm)
        return large_field, finite_field

    # Wide windows: a sum of the density over consecutive integers is the CDF difference with a half-unit correction
    def mass(a: int, b: int) -> float:
        return float(stats.norm.cdf(b + 0.5, loc=mu, scale=sd) - stats.norm.cdf(a - 0.5, loc=mu, scale=sd))

    norm = mass(lo, hi) if cfg.weights == BoundWeights.NORMALIZED else 1.0
    start = max(lo, n_tx)
    large_field = mass(start, hi) / norm
    # the rank factor differs from 1 only for a small excess of combinations over users
    head = np.arange(start, min(hi, n_tx + RANK_EXCESS) + 1, dtype=np.float64)
    deficit = stats.norm.pdf(head, loc=mu, scale=sd) * (1.0 - full_rank_probabilities(n_tx, head - n_tx, cfg.q))
    return large_field, large_field - float(deficit.sum()) / norm


def _n_tx_limit(load: float, cfg: BoundConfig) -> int:
    limit = int(stats.poisson.isf(cfg.epsilon, load)) + 1
    if limit > cfg.max_n_tx:
        raise BoundTruncationError(f"Poisson({load:g}) needs {limit} terms for a tail below {cfg.epsilon:g}, cap is {cfg.max_n_tx}")
    return limit


def _bound_point(g: float, cfg: BoundConfig, table: DecodeProbabilityTable) -> BoundPoint:
    load = g * cfg.slots
    limit = _n_tx_limit(load, cfg)
    phi = phi_alt = phi_q = p_rank = p_large = 0.0
    for n_tx in range(limit + 1):
        weight = float(stats.poisson.pmf(n_tx, load))
        if n_tx == 0:
            # nothing to recover; phi_ub_alt still counts this term
            phi_alt += weight
            continue
        large_field, finite_field = _full_recovery(n_tx, cfg, table)
        phi += n_tx * weight * large_field
        phi_alt += weight * large_field
        phi_q += n_tx * weight * finite_field
        p_large += weight * large_field
        p_rank += weight * finite_field
    return BoundPoint(
        g=g,
        phi_ub=phi / cfg.slots,
        phi_ub_alt=g * phi_alt,
        phi_ub_q=phi_q / cfg.slots,
        p_full_rank=p_rank,
        p_full_rank_large_field=p_large,
        n_tx_limit=limit,
    )


def evaluate_bound(cfg: BoundConfig, table: DecodeProbabilityTable) -> list[BoundPoint]:
    return [_bound_point(g, cfg, table) for g in cfg.g_grid]


def throughput_upper_bound(cfg: BoundConfig, table: DecodeProbabilityTable) -> list[float]:
    return [point.phi_ub for point in evaluate_bound(cfg, table)]


def full_rank_success(cfg: BoundConfig, table: DecodeProbabilityTable) -> list[float]:
    return [point.p_full_rank for point in evaluate_bound(cfg, table)]
