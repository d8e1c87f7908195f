"""
Symbol-synchronous multiple-access channel: BPSK bursts, Rayleigh block fading and real AWGN.

    y_n = sum_k h_k mu(c_kn) + w_n,    mu(0) = -1, mu(1) = +1,    w_n ~ N(0, 1)

Gains are magnitudes of circularly-symmetric complex Gaussians and stay constant over a burst.
"""

import typing as t
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from seekdecode.core.code import Bits, Codeword, FloatArray, Message
from seekdecode.core.errors import ChannelError
from seekdecode.util.enum import CaseInsensitiveEnum


class FadingPower(CaseInsensitiveEnum):
    "How the configured SNR sets the mean power E[h^2] of a fading gain"

    SNR = "snr"
    SQRT_SNR = "sqrt_snr"


def db_to_linear(snr_db: float) -> float:
    return float(10.0 ** (snr_db / 10.0))


def bpsk_map(bits: npt.ArrayLike) -> FloatArray:
    return 2.0 * np.asarray(bits, dtype=np.float64) - 1.0


@dataclass(frozen=True)
class ChannelRealization:
    gains: FloatArray
    snr_db: float

    def __post_init__(self) -> None:
        gains = np.asarray(self.gains, dtype=np.float64).reshape(-1)
        if np.any(gains < 0) or not np.all(np.isfinite(gains)):
            raise ChannelError("fading gains must be finite and nonnegative")
        object.__setattr__(self, "gains", gains)

    @property
    def users(self) -> int:
        return int(self.gains.size)


def draw_fading(k: int, snr_db: float, rng: np.random.Generator, power: FadingPower = FadingPower.SNR) -> ChannelRealization:
    if k < 0:
        raise ChannelError(f"cannot draw fading for {k} users")
    snr = db_to_linear(snr_db)
    mean_power = snr if power == FadingPower.SNR else float(np.sqrt(snr))
    components = rng.standard_normal((k, 2)) * np.sqrt(mean_power / 2.0)
    return ChannelRealization(gains=np.hypot(components[:, 0], components[:, 1]), snr_db=snr_db)


@dataclass(frozen=True)
class SlotTruth:
    """
    What was actually sent, for genie-aided error detection only. users are the frame-level ids of the colliders in
    slot order.
    """

    codewords: Bits
    messages: Bits | None = None
    users: tuple[int, ...] = ()

    def xor_message(self, indicator: npt.ArrayLike) -> Message:
        if self.messages is None:
            raise ChannelError("slot was synthesized without messages, combinations cannot be verified")
        mask = np.asarray(indicator, dtype=bool)
        return np.bitwise_xor.reduce(self.messages[mask], axis=0).astype(np.uint8)


@dataclass(frozen=True)
class SlotObservation:
    samples: FloatArray
    realization: ChannelRealization
    truth: SlotTruth = field(repr=False)

    @property
    def users(self) -> int:
        return self.realization.users

    @property
    def length(self) -> int:
        return int(self.samples.size)

    def verifies(self, indicator: npt.ArrayLike, payload: Message) -> bool:
        "Ideal error detection: the payload is the XOR of the indicated users' messages"
        return bool(np.array_equal(self.truth.xor_message(indicator), payload))


def synthesize_slot(
    bursts: t.Sequence[Codeword] | Bits,
    realization: ChannelRealization,
    rng: np.random.Generator,
    *,
    length: int | None = None,
    messages: t.Sequence[Message] | Bits | None = None,
    users: t.Sequence[int] | None = None,
    noise: bool = True,
) -> SlotObservation:
    """
    Superimpose the bursts with their gains and add unit-variance noise. The noise is drawn before anything else, so
    the same generator state replays the same noise whatever the number of bursts. length is only needed for an
    empty slot.
    """
    if len(bursts) == 0:
        if length is None:
            raise ChannelError("an empty slot needs an explicit length")
        codewords = np.zeros((0, length), dtype=np.uint8)
    else:
        rows = [np.asarray(b, dtype=np.uint8) for b in bursts]
        if any(r.shape != rows[0].shape or r.ndim != 1 for r in rows):
            raise ChannelError("bursts in one slot must share their length")
        codewords = np.stack(rows)
        if length is not None and codewords.shape[1] != length:
            raise ChannelError(f"bursts have length {codewords.shape[1]}, expected {length}")
    if codewords.shape[0] != realization.users:
        raise ChannelError(f"{codewords.shape[0]} bursts but {realization.users} fading gains")
    n = int(codewords.shape[1])

    samples = rng.standard_normal(n) if noise else np.zeros(n)
    if codewords.shape[0]:
        samples = samples + realization.gains @ bpsk_map(codewords)

    message_rows = None
    if messages is not None and codewords.shape[0]:
        message_rows = np.asarray(messages, dtype=np.uint8).reshape(codewords.shape[0], -1)
    elif messages is not None:
        message_rows = np.zeros((0, 0), dtype=np.uint8)
    ids = tuple(int(u) for u in users) if users is not None else tuple(range(codewords.shape[0]))
    if len(ids) != codewords.shape[0]:
        raise ChannelError("one user id per burst is required")
    return SlotObservation(
        samples=samples,
        realization=realization,
        truth=SlotTruth(codewords=codewords, messages=message_rows, users=ids),
    )
