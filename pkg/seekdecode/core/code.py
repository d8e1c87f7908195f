"""
The binary linear block code shared by every user: parity-check representation, systematic encoding, sum-product
decoding of one user from bit L-values, and joint decoding of K users from vector-symbol probabilities.

L-value convention: L = ln(P[c=1] / P[c=0]), so a positive value favours bit 1.

Joint decoding works on the vector symbol d_n = (c_1n, ..., c_Kn) held as the integer label sum_k c_kn 2^k (user k
is bit k). A check node of the scalar code constrains the componentwise XOR of its vector symbols to zero, which is a
convolution over (F_2)^K and becomes a pointwise product after a Walsh-Hadamard transform.
"""

import hashlib
import logging
import typing as t
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import numpy.typing as npt
from scipy.linalg import hadamard

from seekdecode.core.errors import AlistError, CodeError

logger = logging.getLogger(__name__)

Bits: t.TypeAlias = npt.NDArray[np.uint8]
FloatArray: t.TypeAlias = npt.NDArray[np.float64]
IndexArray: t.TypeAlias = npt.NDArray[np.int64]

# A message is k information bits, a codeword n coded bits
Message: t.TypeAlias = Bits
Codeword: t.TypeAlias = Bits

DEFAULT_MAX_ITERS = 50
DEFAULT_CODE_SEED = 576
LLR_CLIP = 1000.0
PROB_FLOOR = 1e-30
_TANH_ONE = 1.0 - 1e-15


def _gf2_rref(matrix: Bits, column_order: t.Sequence[int]) -> tuple[Bits, list[int]]:
    """
    Row-reduce a binary matrix visiting columns in the given order. Returns the nonzero reduced rows and the pivot
    column of each.
    """
    mat = (np.asarray(matrix, dtype=np.uint8) & 1).copy()
    n_rows = mat.shape[0]
    pivots: list[int] = []
    row = 0
    for col in column_order:
        if row == n_rows:
            break
        candidates = np.flatnonzero(mat[row:, col])
        if candidates.size == 0:
            continue
        pivot = row + int(candidates[0])
        if pivot != row:
            mat[[row, pivot]] = mat[[pivot, row]]
        others = np.flatnonzero(mat[:, col])
        others = others[others != row]
        mat[others] ^= mat[row]
        pivots.append(int(col))
        row += 1
    return mat[:row], pivots


def _exclusive_product(values: FloatArray) -> FloatArray:
    """
    For every slot j along axis 1, the product of all other slots. Prefix/suffix products avoid dividing by (possibly
    zero) entries; padded slots should hold the multiplicative identity.
    """
    ones = np.ones_like(values[:, :1])
    prefix = np.concatenate([ones, np.cumprod(values[:, :-1], axis=1)], axis=1)
    suffix = np.flip(np.cumprod(np.flip(values[:, 1:], axis=1), axis=1), axis=1)
    suffix = np.concatenate([suffix, ones], axis=1)
    return prefix * suffix


def _normalize(prob: FloatArray) -> FloatArray:
    prob = np.maximum(prob, PROB_FLOOR)
    return prob / prob.sum(axis=-1, keepdims=True)


@lru_cache(maxsize=8)
def _hadamard(size: int) -> FloatArray:
    return hadamard(size).astype(np.float64)


@dataclass(frozen=True)
class CodeSpec:
    """
    A binary linear code given by its parity checks (each a sorted array of codeword positions) together with a
    systematic generator derived from them. info_positions are the codeword positions that carry the message bits.
    """

    n: int
    k: int
    checks: tuple[IndexArray, ...]
    generator: Bits
    info_positions: IndexArray

    @classmethod
    def from_parity_checks(cls, n: int, checks: t.Sequence[t.Sequence[int]]) -> "CodeSpec":
        check_arrays = tuple(np.array(sorted(set(int(v) for v in c)), dtype=np.int64) for c in checks)
        if n < 2 or not check_arrays:
            raise CodeError("a code needs at least two positions and one parity check")
        for idx in check_arrays:
            if idx.size == 0 or idx.min() < 0 or idx.max() >= n:
                raise CodeError("parity check references a position outside the codeword")

        h = np.zeros((len(check_arrays), n), dtype=np.uint8)
        for row, idx in enumerate(check_arrays):
            h[row, idx] = 1

        # Pivot from the right so that a [H_info | H_parity] layout leaves the message on the leading positions
        reduced, pivots = _gf2_rref(h, range(n - 1, -1, -1))
        k = n - len(pivots)
        if k <= 0 or k >= n:
            raise CodeError(f"parity-check matrix of rank {len(pivots)} leaves no usable rate for n={n}")
        pivot_set = set(pivots)
        info_positions = np.array([c for c in range(n) if c not in pivot_set], dtype=np.int64)

        generator = np.zeros((k, n), dtype=np.uint8)
        generator[np.arange(k), info_positions] = 1
        for row, col in enumerate(pivots):
            generator[:, col] = reduced[row, info_positions]
        if np.any((generator.astype(np.int64) @ h.T.astype(np.int64)) & 1):
            raise CodeError("derived generator violates the parity checks")  # pragma: no cover
        if len(pivots) < h.shape[0]:
            logger.info(f"parity-check matrix has {h.shape[0] - len(pivots)} redundant checks")
        return cls(n=n, k=k, checks=check_arrays, generator=generator, info_positions=info_positions)

    @property
    def rate(self) -> float:
        return self.k / self.n

    @cached_property
    def parity_matrix(self) -> Bits:
        h = np.zeros((len(self.checks), self.n), dtype=np.uint8)
        for row, idx in enumerate(self.checks):
            h[row, idx] = 1
        return h

    @cached_property
    def graph(self) -> "TannerGraph":
        return TannerGraph.build(self.n, self.checks)

    @cached_property
    def fingerprint(self) -> str:
        digest = hashlib.sha256(f"{self.n}:".encode())
        for idx in self.checks:
            digest.update(idx.astype("<i8").tobytes())
            digest.update(b"|")
        return digest.hexdigest()[:16]


@dataclass(frozen=True)
class TannerGraph:
    """
    Edge bookkeeping for flooding belief propagation. Edges are numbered check by check. check_edges (m, dc_max) and
    var_edges (n, dv_max) list edge ids per node, padded with -1.
    """

    edge_var: IndexArray
    check_edges: IndexArray
    var_edges: IndexArray

    @classmethod
    def build(cls, n: int, checks: t.Sequence[IndexArray]) -> "TannerGraph":
        edge_var = np.concatenate(checks).astype(np.int64)
        degrees = [len(c) for c in checks]
        check_edges = np.full((len(checks), max(degrees)), -1, dtype=np.int64)
        offset = 0
        for row, degree in enumerate(degrees):
            check_edges[row, :degree] = np.arange(offset, offset + degree)
            offset += degree

        var_degree = np.bincount(edge_var, minlength=n)
        var_edges = np.full((n, max(1, int(var_degree.max()))), -1, dtype=np.int64)
        order = np.argsort(edge_var, kind="stable")
        slot = np.concatenate([np.arange(d) for d in var_degree]).astype(np.int64)
        var_edges[edge_var[order], slot] = order
        return cls(edge_var=edge_var, check_edges=check_edges, var_edges=var_edges)

    @cached_property
    def check_mask(self) -> npt.NDArray[np.bool_]:
        return self.check_edges >= 0

    @cached_property
    def var_mask(self) -> npt.NDArray[np.bool_]:
        return self.var_edges >= 0


def syndrome(bits: npt.ArrayLike, spec: CodeSpec) -> Bits:
    word = np.asarray(bits, dtype=np.int64)
    return ((spec.parity_matrix.astype(np.int64) @ word) & 1).astype(np.uint8)


def encode(u: Message, spec: CodeSpec) -> Codeword:
    message = np.asarray(u, dtype=np.int64)
    if message.shape != (spec.k,):
        raise CodeError(f"message length {message.shape} does not match k={spec.k}")
    return ((message @ spec.generator.astype(np.int64)) & 1).astype(np.uint8)


def extract_message(codeword: Codeword, spec: CodeSpec) -> Message:
    return np.asarray(codeword, dtype=np.uint8)[spec.info_positions].copy()


def xor_messages(messages: t.Sequence[Message]) -> Message:
    if not messages:
        raise CodeError("cannot XOR an empty set of messages")
    stacked = [np.asarray(m, dtype=np.uint8) for m in messages]
    if any(m.shape != stacked[0].shape for m in stacked):
        raise CodeError("messages to XOR differ in length")
    return np.bitwise_xor.reduce(np.stack(stacked), axis=0)


@dataclass(frozen=True)
class DecodeResult:
    """
    Outcome of one binary decode. message is None when no codeword was reached within the iteration budget.
    posterior holds the final a-posteriori L-values.
    """

    message: Message | None
    codeword: Codeword | None
    iterations: int
    posterior: FloatArray

    @property
    def success(self) -> bool:
        return self.message is not None


def decode_soft(llrs: npt.ArrayLike, spec: CodeSpec, max_iters: int = DEFAULT_MAX_ITERS) -> DecodeResult:
    """
    Sum-product decoding with the tanh rule, stopping as soon as the hard decisions satisfy every check. A zero
    posterior L-value decides bit 0.
    """
    channel = np.clip(np.asarray(llrs, dtype=np.float64), -LLR_CLIP, LLR_CLIP)
    if channel.shape != (spec.n,):
        raise CodeError(f"got {channel.shape} L-values for a code of length {spec.n}")
    graph = spec.graph
    mask = graph.check_mask
    mask_edges = graph.check_edges[mask]

    # Internally ln(P0/P1), the orientation the tanh rule is usually written in
    lch = -channel
    v2c = lch[graph.edge_var]
    c2v = np.zeros_like(v2c)
    total = lch
    for iteration in range(1, max_iters + 1):
        tanh_view = np.ones(graph.check_edges.shape)
        tanh_view[mask] = np.tanh(v2c[mask_edges] / 2.0)
        excluded = _exclusive_product(tanh_view)
        c2v[mask_edges] = 2.0 * np.arctanh(np.clip(excluded[mask], -_TANH_ONE, _TANH_ONE))

        total = lch + np.bincount(graph.edge_var, weights=c2v, minlength=spec.n)
        hard = (total < 0).astype(np.uint8)
        if not syndrome(hard, spec).any():
            return DecodeResult(message=extract_message(hard, spec), codeword=hard, iterations=iteration, posterior=-total)
        v2c = total[graph.edge_var] - c2v

    return DecodeResult(message=None, codeword=None, iterations=max_iters, posterior=-total)


@dataclass(frozen=True)
class VectorSymbolDistribution:
    """
    Per-position probability vectors over the 2^K vector symbols, shape (n, 2^K). Rows need not be normalised on
    construction; decoding normalises them.
    """

    probabilities: FloatArray

    def __post_init__(self) -> None:
        prob = np.asarray(self.probabilities, dtype=np.float64)
        if prob.ndim != 2 or prob.shape[1] < 2 or prob.shape[1] & (prob.shape[1] - 1):
            raise CodeError(f"vector-symbol distribution must be (n, 2^K) with K >= 1, got {prob.shape}")
        if np.any(prob < 0):
            raise CodeError("vector-symbol probabilities must be nonnegative")
        object.__setattr__(self, "probabilities", prob)

    @property
    def users(self) -> int:
        return int(self.probabilities.shape[1]).bit_length() - 1

    @property
    def length(self) -> int:
        return int(self.probabilities.shape[0])


@dataclass(frozen=True)
class JointDecodeResult:
    """
    Per-user estimates from joint decoding. Estimates are returned whether or not every user's word satisfies the
    checks; converged records whether they all did.
    """

    messages: list[Message]
    codewords: list[Codeword]
    converged: bool
    iterations: int
    posterior: FloatArray


def _split_labels(labels: IndexArray, users: int) -> Bits:
    "Vector-symbol labels (n,) to per-user bit planes (K, n)"
    return ((labels[None, :] >> np.arange(users)[:, None]) & 1).astype(np.uint8)


def decode_joint(dist: VectorSymbolDistribution, spec: CodeSpec, max_iters: int = DEFAULT_MAX_ITERS) -> JointDecodeResult:
    """
    Belief propagation over vector symbols. Check nodes multiply Walsh-Hadamard spectra of the incoming messages
    (leave-one-out) and transform back; variable nodes multiply the channel vector with the other incoming check
    messages. Every message is floored and renormalised after each update. Hard decisions take the most likely vector
    symbol per position (ties to the lowest label) and split it into per-user bits.
    """
    if dist.length != spec.n:
        raise CodeError(f"distribution covers {dist.length} positions, code has {spec.n}")
    users = dist.users
    size = 1 << users
    transform = _hadamard(size)
    graph = spec.graph
    cmask, vmask = graph.check_mask, graph.var_mask
    check_ids, var_ids = graph.check_edges[cmask], graph.var_edges[vmask]

    channel = _normalize(dist.probabilities)
    v2c = channel[graph.edge_var]
    c2v = np.full_like(v2c, 1.0 / size)
    posterior = channel
    planes = _split_labels(np.argmax(channel, axis=1), users)
    for iteration in range(1, max_iters + 1):
        spectra = np.ones(graph.check_edges.shape + (size,))
        spectra[cmask] = v2c[check_ids] @ transform
        excluded = _exclusive_product(spectra)
        c2v[check_ids] = _normalize(excluded[cmask] @ transform / size)

        incoming = np.ones(graph.var_edges.shape + (size,))
        incoming[vmask] = c2v[var_ids]
        posterior = _normalize(channel * np.prod(incoming, axis=1))
        planes = _split_labels(np.argmax(posterior, axis=1), users)
        if not any(syndrome(plane, spec).any() for plane in planes):
            return JointDecodeResult(
                messages=[extract_message(p, spec) for p in planes],
                codewords=list(planes),
                converged=True,
                iterations=iteration,
                posterior=posterior,
            )
        others = _exclusive_product(incoming)
        v2c[var_ids] = _normalize(channel[:, None, :] * others)[vmask]

    return JointDecodeResult(
        messages=[extract_message(p, spec) for p in planes],
        codewords=list(planes),
        converged=False,
        iterations=max_iters,
        posterior=posterior,
    )


def check_convolution(messages: FloatArray) -> FloatArray:
    """
    Leave-one-out XOR convolution of the rows of messages (d, 2^K) through the Walsh-Hadamard transform: row j of the
    result is the distribution of the XOR of all other rows' symbols. This is the check-node update of decode_joint.
    """
    size = messages.shape[1]
    transform = _hadamard(size)
    excluded = _exclusive_product((messages @ transform)[None, :, :])[0]
    return _normalize(excluded @ transform / size)


# Default code construction

_BASE_ROWS = 12
_BASE_COLS = 24
_INFO_COLUMN_WEIGHT = 3


def _closes_four_cycle(entries: dict[tuple[int, int], int], row: int, col: int, shift: int, lift: int) -> int:
    "Number of length-4 cycles the circulant (row, col, shift) would close with the entries already placed"
    cycles = 0
    for (r2, c2), s22 in entries.items():
        if r2 == row or c2 == col:
            continue
        s_r_c2 = entries.get((row, c2))
        s_r2_c = entries.get((r2, col))
        if s_r_c2 is None or s_r2_c is None:
            continue
        if (shift - s_r_c2 + s22 - s_r2_c) % lift == 0:
            cycles += 1
    return cycles


def quasi_cyclic_code(lift: int = 24, seed: int = DEFAULT_CODE_SEED) -> CodeSpec:
    """
    Deterministic rate-1/2 quasi-cyclic LDPC code of length 24 * lift (lift=24 gives n=576).

    The 12x24 base graph has an information half of column weight 3 with balanced row weights and a staircase parity
    half (block-bidiagonal identities, so the code is encodable and H has full rank). Circulant shifts of the
    information half are drawn from a seeded generator and accepted greedily only if they close no length-4 cycle;
    when every shift would, the one closing fewest is taken.
    """
    if lift < 2:
        raise CodeError("lift size must be at least 2")
    rng = np.random.default_rng(seed)
    info_cols = _BASE_COLS - _BASE_ROWS
    entries: dict[tuple[int, int], int] = {}

    row_weight = np.zeros(_BASE_ROWS, dtype=np.int64)
    for col in range(info_cols):
        # lowest current weight first, random among ties
        order = np.lexsort((rng.random(_BASE_ROWS), row_weight))
        rows = sorted(int(r) for r in order[:_INFO_COLUMN_WEIGHT])
        row_weight[rows] += 1
        for row in rows:
            closed: dict[int, int] = {}
            for shift in (int(s) for s in rng.permutation(lift)):
                closed[shift] = _closes_four_cycle(entries, row, col, shift, lift)
                if closed[shift] == 0:
                    break
            entries[(row, col)] = min(closed, key=lambda s: closed[s])

    for i in range(_BASE_ROWS):
        entries[(i, info_cols + i)] = 0
        if i + 1 < _BASE_ROWS:
            entries[(i + 1, info_cols + i)] = 0

    checks: list[list[int]] = [[] for _ in range(_BASE_ROWS * lift)]
    for (row, col), shift in entries.items():
        for z in range(lift):
            checks[row * lift + z].append(col * lift + (z + shift) % lift)
    return CodeSpec.from_parity_checks(_BASE_COLS * lift, checks)


# alist interchange


def load_code(text: str) -> CodeSpec:
    """
    Parse alist text: "n m", the two maximum degrees, the n column degrees, the m row degrees, then n lines of 1-based
    check indices per column and m lines of 1-based position indices per row (zero padding allowed). Column and row
    lists must describe the same graph.
    """
    lines = [line.split() for line in text.splitlines() if line.strip()]
    try:
        n, m = (int(v) for v in lines[0])
        col_degrees = [int(v) for v in lines[2]]
        row_degrees = [int(v) for v in lines[3]]
        if len(col_degrees) != n or len(row_degrees) != m:
            raise AlistError("degree lists do not match the declared dimensions")
        if len(lines) < 4 + n + m:
            raise AlistError(f"expected {4 + n + m} non-empty lines, got {len(lines)}")
        col_lists = [[int(v) for v in line if int(v) != 0] for line in lines[4 : 4 + n]]
        row_lists = [[int(v) for v in line if int(v) != 0] for line in lines[4 + n : 4 + n + m]]
    except (ValueError, IndexError) as e:
        if isinstance(e, AlistError):
            raise
        raise AlistError(f"malformed alist text: {e}") from e

    edges_by_col: set[tuple[int, int]] = set()
    for col, (entries, degree) in enumerate(zip(col_lists, col_degrees)):
        if len(entries) != degree or len(set(entries)) != degree or any(not 1 <= r <= m for r in entries):
            raise AlistError(f"column {col + 1} list does not match its degree {degree}")
        edges_by_col.update((r - 1, col) for r in entries)
    edges_by_row: set[tuple[int, int]] = set()
    for row, (entries, degree) in enumerate(zip(row_lists, row_degrees)):
        if len(entries) != degree or len(set(entries)) != degree or any(not 1 <= c <= n for c in entries):
            raise AlistError(f"row {row + 1} list does not match its degree {degree}")
        edges_by_row.update((row, c - 1) for c in entries)
    if edges_by_col != edges_by_row:
        raise AlistError("column and row lists describe different matrices")

    return CodeSpec.from_parity_checks(n, [[c - 1 for c in entries] for entries in row_lists])


def dump_alist(spec: CodeSpec) -> str:
    h = spec.parity_matrix
    m = h.shape[0]
    col_lists = [list(np.flatnonzero(h[:, c]) + 1) for c in range(spec.n)]
    row_lists = [list(idx + 1) for idx in spec.checks]
    col_degrees = [len(c) for c in col_lists]
    row_degrees = [len(r) for r in row_lists]
    max_col, max_row = max(col_degrees), max(row_degrees)

    def padded(values: list[int], width: int) -> str:
        return " ".join(str(int(v)) for v in values + [0] * (width - len(values)))

    out = [f"{spec.n} {m}", f"{max_col} {max_row}", " ".join(map(str, col_degrees)), " ".join(map(str, row_degrees))]
    out += [padded(c, max_col) for c in col_lists]
    out += [padded(r, max_row) for r in row_lists]
    return "\n".join(out) + "\n"
