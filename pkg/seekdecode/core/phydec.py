"""
Slot-level receivers. Each one turns a SlotObservation into the set of decoded combinations (XORs of colliding users'
messages) that passed ideal error detection, plus the binary indicator matrix of those combinations.

    separate   every user decoded against all others as interference
    sic        separate decoding followed by cancellation of each success and re-decoding, strongest user first
    snd_sic    sic, then every residual subset of two or more users decoded as an XOR combination
    jd         belief propagation over vector symbols of all users, singletons kept
    snd_jd     jd, then every XOR of the joint estimates checked

Bit L-values come from the metric exp(-(y - h^T x)^2) marginalised over all hypotheses of the users involved.
"""

import itertools
import logging
import typing as t
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import numpy.typing as npt
from pydantic import Field

from seekdecode.core.channel import SlotObservation, bpsk_map
from seekdecode.core.code import (
    DEFAULT_MAX_ITERS,
    Bits,
    CodeSpec,
    Codeword,
    DecodeResult,
    FloatArray,
    JointDecodeResult,
    Message,
    VectorSymbolDistribution,
    decode_joint,
    decode_soft,
    xor_messages,
)
from seekdecode.core.gf2m import FieldMatrix, FieldSpec, gf2_rank
from seekdecode.util.config import StrictBaseModel
from seekdecode.util.enum import CaseInsensitiveEnum

logger = logging.getLogger(__name__)

GF2 = FieldSpec(m=1)
DEFAULT_K_MAX = 7

# A constraint says: the XOR of the users in mask (bitmask over the hypothesis ordering) equals bits at every position
Constraint: t.TypeAlias = tuple[int, Bits]


class DecoderStrategy(CaseInsensitiveEnum):
    SEPARATE = "separate"
    SIC = "sic"
    SND_SIC = "snd_sic"
    JD = "jd"
    SND_JD = "snd_jd"


class DecodeOptions(StrictBaseModel):
    max_iters: int = Field(default=DEFAULT_MAX_ITERS, ge=1)
    k_max: int = Field(default=DEFAULT_K_MAX, ge=1)
    # extra rounds of snd_sic with hypotheses conditioned on the combinations already decoded
    refinement: bool = True
    refinement_rounds: int = Field(default=1, ge=0)
    # separate and sic give up on a slot after the first failed user (in descending gain order)
    stop_on_failure: bool = False


def jacln(values: npt.ArrayLike) -> float:
    "ln(sum(exp(values))) folded pairwise as max(a, b) + ln(1 + exp(-|a - b|))"
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError("jacln needs at least one value")
    return float(np.logaddexp.reduce(arr))


def _label_bits(users: int) -> Bits:
    "(2^users, users) table: bit k of hypothesis label b is user k's coded bit"
    labels = np.arange(1 << users)
    return ((labels[:, None] >> np.arange(users)[None, :]) & 1).astype(np.uint8)


def _subset_parity(users: int, mask: int) -> Bits:
    selected = [k for k in range(users) if mask >> k & 1]
    return (_label_bits(users)[:, selected].sum(axis=1) & 1).astype(np.uint8)


def _hypothesis_metrics(samples: npt.ArrayLike, gains: FloatArray) -> FloatArray:
    "-(y - h^T x)^2 for every hypothesis x, shape samples.shape + (2^K,)"
    means = bpsk_map(_label_bits(gains.size)) @ gains
    return -((np.asarray(samples, dtype=np.float64)[..., None] - means) ** 2)


def _parity_llrs(samples: npt.ArrayLike, gains: FloatArray, target: int, constraints: t.Sequence[Constraint] = ()) -> FloatArray:
    """
    L-value of the XOR of the users in target, marginalising every hypothesis over all users in gains. Constraints
    remove, position by position, the hypotheses that contradict an already known combination.
    """
    users = gains.size
    metrics = _hypothesis_metrics(samples, gains)
    for mask, bits in constraints:
        allowed = _subset_parity(users, mask)[None, :] == np.asarray(bits, dtype=np.uint8)[:, None]
        metrics = np.where(allowed, metrics, -np.inf)
    parity = _subset_parity(users, target)
    with np.errstate(invalid="ignore"):
        llrs = np.logaddexp.reduce(metrics[..., parity == 1], axis=-1) - np.logaddexp.reduce(metrics[..., parity == 0], axis=-1)
    return np.nan_to_num(llrs, nan=0.0, posinf=np.inf, neginf=-np.inf)


def llr_separate(y: npt.ArrayLike, h: npt.ArrayLike, i: int) -> FloatArray:
    "L-value of user i with every other user in h marginalised as interference"
    gains = np.asarray(h, dtype=np.float64).reshape(-1)
    if not 0 <= i < gains.size:
        raise ValueError(f"user {i} is not among the {gains.size} colliders")
    return _parity_llrs(y, gains, 1 << i)


def llr_combination(
    y: npt.ArrayLike,
    h_subset: npt.ArrayLike,
    interferers: npt.ArrayLike = (),
    constraints: t.Sequence[Constraint] = (),
) -> FloatArray:
    """
    L-value of the XOR of the users with gains h_subset. Users in interferers are marginalised as interference.
    Constraint masks refer to the ordering h_subset followed by interferers.
    """
    subset = np.asarray(h_subset, dtype=np.float64).reshape(-1)
    if subset.size < 2:
        raise ValueError("a combination involves at least two users")
    gains = np.concatenate([subset, np.asarray(interferers, dtype=np.float64).reshape(-1)])
    return _parity_llrs(y, gains, (1 << subset.size) - 1, constraints)


@dataclass(frozen=True)
class DecodedCombination:
    indicator: Bits
    payload: Message

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.indicator))


@dataclass
class WorkCounters:
    candidates: int = 0
    decode_attempts: int = 0
    bp_iterations: int = 0
    skipped_dependent: int = 0

    def add(self, other: "WorkCounters") -> None:
        self.candidates += other.candidates
        self.decode_attempts += other.decode_attempts
        self.bp_iterations += other.bp_iterations
        self.skipped_dependent += other.skipped_dependent


@dataclass(frozen=True)
class SlotDecodeResult:
    """
    users holds the frame-level ids of the colliders; indicator position k refers to users[k]. A blocked slot had
    more colliders than the receiver attempts and carries no combinations.
    """

    strategy: DecoderStrategy
    users: tuple[int, ...]
    combinations: tuple[DecodedCombination, ...]
    counters: WorkCounters = field(default_factory=WorkCounters)
    blocked: bool = False

    @cached_property
    def a_slot(self) -> FieldMatrix:
        return FieldMatrix.from_rows([c.indicator.tolist() for c in self.combinations], GF2, cols=len(self.users))

    @property
    def innovative_count(self) -> int:
        return gf2_rank(self.a_slot.entries)


def innovative_count(result: SlotDecodeResult) -> int:
    return result.innovative_count


class _SlotState:
    "Residual signal and decoded rows of one slot while a receiver works on it"

    def __init__(self, slot: SlotObservation, spec: CodeSpec, options: DecodeOptions, strategy: DecoderStrategy) -> None:
        self.slot = slot
        self.spec = spec
        self.options = options
        self.strategy = strategy
        self.gains = slot.realization.gains
        self.residual = slot.samples.copy()
        self.remaining = list(range(slot.users))
        self.combinations: list[DecodedCombination] = []
        self.known: list[tuple[Bits, Codeword]] = []
        self.counters = WorkCounters()
        self._rank = 0

    def by_gain(self, users: t.Iterable[int]) -> list[int]:
        return sorted(users, key=lambda u: (-self.gains[u], u))

    def indicator(self, users: t.Iterable[int]) -> Bits:
        row = np.zeros(self.slot.users, dtype=np.uint8)
        row[list(users)] = 1
        return row

    def in_span(self, indicator: Bits) -> bool:
        if not self.combinations:
            return False
        rows = [c.indicator for c in self.combinations] + [indicator]
        return gf2_rank(np.stack(rows)) == self._rank

    def accept(self, indicator: Bits, payload: Message, codeword: Codeword | None = None) -> None:
        self.combinations.append(DecodedCombination(indicator=indicator, payload=payload))
        self._rank = gf2_rank(np.stack([c.indicator for c in self.combinations]))
        if codeword is not None:
            self.known.append((indicator, codeword))

    def attempt(self, llrs: FloatArray, indicator: Bits) -> DecodeResult | None:
        "One BP run; the outcome counts only if error detection confirms it"
        self.counters.decode_attempts += 1
        result = decode_soft(llrs, self.spec, self.options.max_iters)
        self.counters.bp_iterations += result.iterations
        if result.message is None or result.codeword is None or not self.slot.verifies(indicator, result.message):
            return None
        self.accept(indicator, result.message, result.codeword)
        return result

    def cancel(self, user: int, codeword: Codeword) -> None:
        self.residual = self.residual - self.gains[user] * bpsk_map(codeword)
        self.remaining.remove(user)

    def local_constraints(self, ordered: list[int]) -> list[Constraint]:
        position = {u: p for p, u in enumerate(ordered)}
        constraints = []
        for indicator, codeword in self.known:
            users = np.flatnonzero(indicator)
            if all(int(u) in position for u in users):
                constraints.append((sum(1 << position[int(u)] for u in users), codeword))
        return constraints

    def result(self) -> SlotDecodeResult:
        result = SlotDecodeResult(
            strategy=self.strategy,
            users=self.slot.truth.users,
            combinations=tuple(self.combinations),
            counters=self.counters,
        )
        logger.debug(f"{self.strategy} K={self.slot.users}: {len(self.combinations)} combinations, rank {self._rank}")
        return result


def _separate_pass(state: _SlotState) -> list[tuple[int, Codeword]]:
    decoded = []
    for user in state.by_gain(state.remaining):
        result = state.attempt(llr_separate(state.slot.samples, state.gains, user), state.indicator([user]))
        if result is not None and result.codeword is not None:
            decoded.append((user, result.codeword))
        elif state.options.stop_on_failure:
            break
    return decoded


def _run_sic(state: _SlotState) -> None:
    first_pass = _separate_pass(state)
    for user, codeword in first_pass:
        state.cancel(user, codeword)

    # restart from the strongest remaining user after every cancellation, stop after a pass without success
    progress = bool(first_pass)
    while progress and state.remaining:
        progress = False
        for user in state.by_gain(state.remaining):
            llrs = llr_separate(state.residual, state.gains[state.remaining], state.remaining.index(user))
            result = state.attempt(llrs, state.indicator([user]))
            if result is not None and result.codeword is not None:
                state.cancel(user, result.codeword)
                progress = True
                break
            if state.options.stop_on_failure:
                break


def _subsets_by_promise(state: _SlotState, pool: list[int], min_size: int) -> list[tuple[int, ...]]:
    "Subsets of pool, smallest first, then by total gain"
    subsets = [s for size in range(min_size, len(pool) + 1) for s in itertools.combinations(pool, size)]
    return sorted(subsets, key=lambda s: (len(s), -float(state.gains[list(s)].sum())))


def _attempt_combination(state: _SlotState, subset: tuple[int, ...], pool: list[int], constrained: bool) -> None:
    state.counters.candidates += 1
    indicator = state.indicator(subset)
    if state.in_span(indicator):
        state.counters.skipped_dependent += 1
        return
    ordered = list(subset) + [u for u in pool if u not in subset]
    constraints = state.local_constraints(ordered) if constrained else []
    llrs = _parity_llrs(state.residual, state.gains[ordered], (1 << len(subset)) - 1, constraints)
    state.attempt(llrs, indicator)


def _refine(state: _SlotState, pool: list[int]) -> None:
    for _ in range(state.options.refinement_rounds):
        if not state.local_constraints(pool):
            return
        before = len(state.combinations)
        for subset in _subsets_by_promise(state, pool, 1):
            _attempt_combination(state, subset, pool, constrained=True)
        if len(state.combinations) == before:
            return


def _joint_estimates(state: _SlotState) -> JointDecodeResult:
    metrics = _hypothesis_metrics(state.slot.samples, state.gains)
    probabilities = np.exp(metrics - metrics.max(axis=1, keepdims=True))
    result = decode_joint(VectorSymbolDistribution(probabilities), state.spec, state.options.max_iters)
    state.counters.decode_attempts += 1
    state.counters.bp_iterations += result.iterations
    return result


def decode_separate(slot: SlotObservation, spec: CodeSpec, options: DecodeOptions | None = None) -> SlotDecodeResult:
    state = _SlotState(slot, spec, options or DecodeOptions(), DecoderStrategy.SEPARATE)
    _separate_pass(state)
    return state.result()


def decode_sic(slot: SlotObservation, spec: CodeSpec, options: DecodeOptions | None = None) -> SlotDecodeResult:
    state = _SlotState(slot, spec, options or DecodeOptions(), DecoderStrategy.SIC)
    _run_sic(state)
    return state.result()


def decode_snd_sic(slot: SlotObservation, spec: CodeSpec, options: DecodeOptions | None = None) -> SlotDecodeResult:
    """
    SIC, then each subset of at least two residual users is decoded as one XOR codeword against the other residual
    users. Subsets already implied by decoded rows are skipped before decoding. A decoded combination cannot be
    cancelled, so the refinement rounds instead condition the hypotheses on it and retry every subset, singletons
    included.
    """
    state = _SlotState(slot, spec, options or DecodeOptions(), DecoderStrategy.SND_SIC)
    _run_sic(state)
    pool = list(state.remaining)
    if len(pool) >= 2:
        for subset in _subsets_by_promise(state, pool, 2):
            _attempt_combination(state, subset, pool, constrained=False)
        if state.options.refinement:
            _refine(state, pool)
    return state.result()


def decode_jd(slot: SlotObservation, spec: CodeSpec, options: DecodeOptions | None = None) -> SlotDecodeResult:
    state = _SlotState(slot, spec, options or DecodeOptions(), DecoderStrategy.JD)
    if slot.users:
        estimates = _joint_estimates(state)
        for user, message in enumerate(estimates.messages):
            state.counters.candidates += 1
            indicator = state.indicator([user])
            if slot.verifies(indicator, message):
                state.accept(indicator, message)
    return state.result()


def decode_snd_jd(slot: SlotObservation, spec: CodeSpec, options: DecodeOptions | None = None) -> SlotDecodeResult:
    state = _SlotState(slot, spec, options or DecodeOptions(), DecoderStrategy.SND_JD)
    if slot.users:
        estimates = _joint_estimates(state)
        for mask in range(1, 1 << slot.users):
            users = [k for k in range(slot.users) if mask >> k & 1]
            state.counters.candidates += 1
            payload = xor_messages([estimates.messages[k] for k in users])
            indicator = state.indicator(users)
            if slot.verifies(indicator, payload):
                state.accept(indicator, payload)
    return state.result()


_DECODERS: dict[DecoderStrategy, t.Callable[[SlotObservation, CodeSpec, DecodeOptions], SlotDecodeResult]] = {
    DecoderStrategy.SEPARATE: decode_separate,
    DecoderStrategy.SIC: decode_sic,
    DecoderStrategy.SND_SIC: decode_snd_sic,
    DecoderStrategy.JD: decode_jd,
    DecoderStrategy.SND_JD: decode_snd_jd,
}


def decode_slot(
    strategy: DecoderStrategy | str, slot: SlotObservation, spec: CodeSpec, options: DecodeOptions | None = None
) -> SlotDecodeResult:
    "Run one receiver on a slot, refusing collisions larger than options.k_max"
    options = options or DecodeOptions()
    strategy = DecoderStrategy(strategy)
    if slot.users > options.k_max:
        logger.debug(f"slot with {slot.users} colliders exceeds k_max={options.k_max}, discarded")
        return SlotDecodeResult(strategy=strategy, users=slot.truth.users, combinations=(), blocked=True)
    return _DECODERS[strategy](slot, spec, options)
