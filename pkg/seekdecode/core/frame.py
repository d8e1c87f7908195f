"""
Frame level: Poisson traffic, replica placement, precoding over GF(2^n_bc), the equation system built from the slot
receivers' combinations, and its partial solution.

A replica of user i in slot j carries the message precoded by alpha_ij. A combination decoded in slot j is the XOR of
the precoded messages it covers, which read as GF(2^n_bc) symbols is sum_i alpha_ij * u_i. Stacking these gives one
equation per combination over the unprecoded messages u_i.

Bits are packed into field symbols little-endian: bit t of a group is the coefficient of x^t.
"""

import dataclasses
import logging
import typing as t
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from pydantic import Field
from scipy import stats

from seekdecode.core.channel import FadingPower, draw_fading, synthesize_slot
from seekdecode.core.code import Bits, CodeSpec, Message, encode
from seekdecode.core.errors import FrameError
from seekdecode.core.gf2m import FieldMatrix, FieldSpec, IntArray, gauss_solve_partial, mat_rank
from seekdecode.core.phydec import DecodeOptions, DecoderStrategy, SlotDecodeResult, decode_slot
from seekdecode.util.config import StrictBaseModel
from seekdecode.util.enum import CaseInsensitiveEnum

logger = logging.getLogger(__name__)

CI_Z = 1.96


class RepetitionKind(CaseInsensitiveEnum):
    FIXED = "fixed"
    BERNOULLI = "bernoulli"


class RepetitionPolicy(StrictBaseModel):
    """
    fixed: every packet goes out in d distinct slots chosen uniformly. bernoulli: every slot carries a replica with
    probability p independently (at most one per slot); a packet that draws no slot is never sent and counts as lost.
    """

    kind: RepetitionKind = RepetitionKind.FIXED
    d: int = Field(default=2, ge=1)
    p: float = Field(default=0.5, gt=0.0, le=1.0)

    def draw_slots(self, slots: int, rng: np.random.Generator) -> IntArray:
        if self.kind == RepetitionKind.FIXED:
            if self.d > slots:
                raise FrameError(f"cannot place {self.d} replicas in a frame of {slots} slots")
            return np.sort(rng.choice(slots, size=self.d, replace=False)).astype(np.int64)
        return np.flatnonzero(rng.random(slots) < self.p).astype(np.int64)


class FrameStrategy(CaseInsensitiveEnum):
    "Frame-level schemes: the five slot receivers plus plain slotted ALOHA"

    SEPARATE = "separate"
    SIC = "sic"
    SND_SIC = "snd_sic"
    JD = "jd"
    SND_JD = "snd_jd"
    ALOHA = "aloha"

    @property
    def decoder(self) -> DecoderStrategy:
        if self == FrameStrategy.ALOHA:
            return DecoderStrategy.SEPARATE
        return DecoderStrategy(self.value)

    def decode_options(self, options: DecodeOptions) -> DecodeOptions:
        # ALOHA loses every collision outright
        if self == FrameStrategy.ALOHA:
            return options.model_copy(update={"k_max": 1})
        return options

    def policy(self, policy: RepetitionPolicy) -> RepetitionPolicy:
        if self == FrameStrategy.ALOHA:
            return RepetitionPolicy(kind=RepetitionKind.FIXED, d=1)
        return policy


@dataclass(frozen=True)
class ActiveUser:
    terminal: int
    message: Message
    slots: IntArray
    coefficients: IntArray

    def coefficient(self, slot: int) -> int:
        hits = np.flatnonzero(self.slots == slot)
        if hits.size == 0:
            raise FrameError(f"user has no replica in slot {slot}")
        return int(self.coefficients[hits[0]])


@dataclass(frozen=True)
class FramePlan:
    slots: int
    field: FieldSpec
    users: tuple[ActiveUser, ...]
    policy: RepetitionPolicy

    @property
    def n_tx(self) -> int:
        return len(self.users)

    @property
    def replicas_sent(self) -> int:
        return sum(int(u.slots.size) for u in self.users)

    def colliders(self, slot: int) -> list[int]:
        return [i for i, u in enumerate(self.users) if np.any(u.slots == slot)]


def generate_traffic(
    g: float,
    slots: int,
    terminals: int,
    policy: RepetitionPolicy,
    rng: np.random.Generator,
    *,
    field: FieldSpec,
    message_bits: int,
) -> FramePlan:
    """
    Every terminal generates Poisson(G*S/M) packets during the previous frame; all of them become active at this
    frame's start. Coefficients are uniform over the nonzero field elements.
    """
    if g <= 0 or slots < 1 or terminals < 1:
        raise FrameError(f"traffic needs G > 0, S >= 1 and M >= 1 (got {g}, {slots}, {terminals})")
    if policy.kind == RepetitionKind.FIXED and policy.d > slots:
        raise FrameError(f"cannot place {policy.d} replicas in a frame of {slots} slots")
    if message_bits % field.m:
        raise FrameError(f"message length {message_bits} is not a multiple of n_bc={field.m}")

    arrivals = rng.poisson(g * slots / terminals, size=terminals)
    users = []
    for terminal in np.repeat(np.arange(terminals), arrivals):
        message = rng.integers(0, 2, size=message_bits, dtype=np.uint8)
        replica_slots = policy.draw_slots(slots, rng)
        coefficients = rng.integers(1, field.order, size=replica_slots.size, dtype=np.int64)
        users.append(ActiveUser(terminal=int(terminal), message=message, slots=replica_slots, coefficients=coefficients))
    return FramePlan(slots=slots, field=field, users=tuple(users), policy=policy)


def bits_to_symbols(bits: npt.ArrayLike, m: int) -> IntArray:
    arr = np.asarray(bits, dtype=np.int64)
    if arr.shape[-1] % m:
        raise FrameError(f"{arr.shape[-1]} bits do not split into {m}-bit symbols")
    groups = arr.reshape(arr.shape[:-1] + (-1, m))
    return (groups << np.arange(m)).sum(axis=-1)


def symbols_to_bits(symbols: npt.ArrayLike, m: int) -> Bits:
    arr = np.asarray(symbols, dtype=np.int64)
    bits = (arr[..., None] >> np.arange(m)) & 1
    return bits.reshape(arr.shape[:-1] + (-1,)).astype(np.uint8)


@dataclass(frozen=True)
class PrecodedMessage:
    symbols: IntArray
    field: FieldSpec

    @property
    def bits(self) -> Bits:
        return symbols_to_bits(self.symbols, self.field.m)


def precode(u: Message, alpha: int, field: FieldSpec) -> PrecodedMessage:
    if alpha == 0:
        raise FrameError("precoding coefficient must be nonzero")
    symbols = bits_to_symbols(u, field.m)
    return PrecodedMessage(symbols=field.mul_array(symbols, field.check(alpha)), field=field)


def unprecode(p: PrecodedMessage, alpha: int) -> Message:
    return symbols_to_bits(p.field.mul_array(p.symbols, p.field.inv(alpha)), p.field.m)


@dataclass(frozen=True)
class FrameSystem:
    """
    matrix is A^T: one row per decoded combination, one column per active user. payload holds the matching rows of b
    as field symbols. row_slots records the slot each equation came from.
    """

    matrix: FieldMatrix
    payload: IntArray
    row_slots: tuple[int, ...]

    @property
    def a(self) -> FieldMatrix:
        return FieldMatrix(self.matrix.entries.T.copy(), self.matrix.field)

    @property
    def rank(self) -> int:
        return mat_rank(self.matrix)


def assemble_system(plan: FramePlan, slot_results: t.Sequence[SlotDecodeResult]) -> FrameSystem:
    if len(slot_results) != plan.slots:
        raise FrameError(f"{len(slot_results)} slot results for a frame of {plan.slots} slots")
    symbols_per_message = plan.users[0].message.size // plan.field.m if plan.users else 0
    rows: list[IntArray] = []
    payload: list[IntArray] = []
    row_slots: list[int] = []
    seen: set[tuple[int, bytes, bytes]] = set()
    for slot, result in enumerate(slot_results):
        for combination in result.combinations:
            row = np.zeros(plan.n_tx, dtype=np.int64)
            for position in np.flatnonzero(combination.indicator):
                if position >= len(result.users) or not 0 <= result.users[position] < plan.n_tx:
                    raise FrameError(f"combination in slot {slot} refers to an unknown user")
                user = result.users[position]
                row[user] = plan.users[user].coefficient(slot)
            symbols = bits_to_symbols(combination.payload, plan.field.m)
            # the same equation decoded twice in one slot adds nothing
            key = (slot, row.tobytes(), symbols.tobytes())
            if key in seen:
                continue
            seen.add(key)
            rows.append(row)
            payload.append(symbols)
            row_slots.append(slot)

    matrix = np.array(rows, dtype=np.int64).reshape(len(rows), plan.n_tx)
    b = np.array(payload, dtype=np.int64).reshape(len(rows), symbols_per_message)
    return FrameSystem(matrix=FieldMatrix(matrix, plan.field), payload=b, row_slots=tuple(row_slots))


def verify_system(system: FrameSystem, plan: FramePlan) -> bool:
    "Substituting the transmitted messages reproduces every payload row"
    f = plan.field
    for row, expected in zip(system.matrix.entries, system.payload):
        total = np.zeros_like(expected)
        for user in np.flatnonzero(row):
            total ^= f.mul_array(bits_to_symbols(plan.users[user].message, f.m), int(row[user]))
        if not np.array_equal(total, expected):
            return False
    return True


@dataclass(frozen=True)
class FrameOutcome:
    n_tx: int
    slots: int
    system: FrameSystem
    recovered: dict[int, Message]
    replicas_sent: int
    slot_results: tuple[SlotDecodeResult, ...] = dataclasses.field(default=(), repr=False)

    @property
    def recovered_count(self) -> int:
        return len(self.recovered)

    @property
    def lost(self) -> int:
        return self.n_tx - len(self.recovered)

    @property
    def innovative_total(self) -> int:
        return sum(r.innovative_count for r in self.slot_results)

    def summary(self) -> "FrameSummary":
        return FrameSummary(
            n_tx=self.n_tx,
            slots=self.slots,
            recovered_count=self.recovered_count,
            lost=self.lost,
            replicas_sent=self.replicas_sent,
            innovative_total=self.innovative_total,
        )


@dataclass(frozen=True)
class FrameSummary:
    "The counters of a FrameOutcome, cheap to send between processes"

    n_tx: int
    slots: int
    recovered_count: int
    lost: int
    replicas_sent: int
    innovative_total: int


class FrameTally(t.Protocol):
    @property
    def n_tx(self) -> int: ...
    @property
    def slots(self) -> int: ...
    @property
    def recovered_count(self) -> int: ...
    @property
    def lost(self) -> int: ...
    @property
    def replicas_sent(self) -> int: ...
    @property
    def innovative_total(self) -> int: ...


def solve_frame(system: FrameSystem, plan: FramePlan, slot_results: t.Sequence[SlotDecodeResult] = ()) -> FrameOutcome:
    """
    Recover every message the system determines. Full recovery happens exactly when rank(A) equals the number of
    active users; otherwise Gaussian elimination still extracts the uniquely determined ones.
    """
    solution = gauss_solve_partial(system.matrix, system.payload)
    if solution.inconsistent:
        raise FrameError("frame equations are inconsistent, a payload passed error detection but is wrong")
    recovered: dict[int, Message] = {}
    for user, symbols in solution.values.items():
        message = symbols_to_bits(symbols, plan.field.m)
        if not np.array_equal(message, plan.users[user].message):
            raise FrameError(f"user {user} solved to a message that was not sent")
        recovered[user] = message
    return FrameOutcome(
        n_tx=plan.n_tx,
        slots=plan.slots,
        system=system,
        recovered=recovered,
        replicas_sent=plan.replicas_sent,
        slot_results=tuple(slot_results),
    )


def simulate_frame(
    plan: FramePlan,
    spec: CodeSpec,
    strategy: FrameStrategy | str,
    snr_db: float,
    rng: np.random.Generator,
    options: DecodeOptions | None = None,
    power: FadingPower = FadingPower.SNR,
) -> FrameOutcome:
    """
    Transmit the plan over S slots, decode every slot with the strategy's receiver and solve the frame. Channel draws
    do not depend on the strategy, so the same rng state gives paired trials across strategies.
    """
    strategy = FrameStrategy(strategy)
    options = strategy.decode_options(options or DecodeOptions())
    if plan.users and plan.users[0].message.size != spec.k:
        raise FrameError(f"plan messages have {plan.users[0].message.size} bits, code carries {spec.k}")

    results: list[SlotDecodeResult] = []
    for slot in range(plan.slots):
        colliders = plan.colliders(slot)
        if not colliders:
            results.append(SlotDecodeResult(strategy=strategy.decoder, users=(), combinations=()))
            continue
        precoded = [precode(plan.users[u].message, plan.users[u].coefficient(slot), plan.field).bits for u in colliders]
        codewords = [encode(bits, spec) for bits in precoded]
        realization = draw_fading(len(colliders), snr_db, rng, power)
        observation = synthesize_slot(codewords, realization, rng, messages=precoded, users=colliders)
        results.append(decode_slot(strategy.decoder, observation, spec, options))

    system = assemble_system(plan, results)
    if not verify_system(system, plan):
        raise FrameError("assembled equations do not match the transmitted messages")
    outcome = solve_frame(system, plan, results)
    logger.debug(f"frame {strategy}: {outcome.recovered_count}/{plan.n_tx} recovered from {system.matrix.rows} equations")
    return outcome


@dataclass(frozen=True)
class MetricsReport:
    """
    phi: recovered messages per slot. plr: lost / transmitted packets (replicas not counted); reported as 0 with
    plr_defined False when nothing was sent. energy_eff: replicas sent per recovered message, inf when none was
    recovered. ci_* are 95% normal half-widths over frames (nan for a single frame).
    """

    frames: int
    slots: int
    n_tx: int
    recovered: int
    replicas: int
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


def _half_width(values: npt.ArrayLike) -> float:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 2:
        return float("nan")
    return float(CI_Z * stats.sem(arr))


def compute_metrics(outcomes: t.Sequence[FrameTally], rate: float) -> MetricsReport:
    if not outcomes:
        raise FrameError("metrics need at least one frame")
    slots = sum(o.slots for o in outcomes)
    n_tx = sum(o.n_tx for o in outcomes)
    recovered = sum(o.recovered_count for o in outcomes)
    lost = sum(o.lost for o in outcomes)
    replicas = sum(o.replicas_sent for o in outcomes)
    innovative = sum(o.innovative_total for o in outcomes)

    phi = recovered / slots
    per_frame_phi = [o.recovered_count / o.slots for o in outcomes]
    mean_n_tx = n_tx / len(outcomes)
    return MetricsReport(
        frames=len(outcomes),
        slots=slots,
        n_tx=n_tx,
        recovered=recovered,
        replicas=replicas,
        g_realized=n_tx / slots,
        phi=phi,
        sum_rate=rate * phi,
        plr=lost / n_tx if n_tx else 0.0,
        plr_defined=n_tx > 0,
        energy_eff=replicas / recovered if recovered else float("inf"),
        innov_mean=innovative / slots,
        ci_phi=_half_width(per_frame_phi),
        ci_sum_rate=rate * _half_width(per_frame_phi),
        ci_plr=_half_width([o.lost for o in outcomes]) / mean_n_tx if n_tx else float("nan"),
        ci_innov=_half_width([o.innovative_total / o.slots for o in outcomes]),
    )
