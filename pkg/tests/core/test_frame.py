import numpy as np
import pytest

from seekdecode.core.code import CodeSpec
from seekdecode.core.errors import FrameError
from seekdecode.core.frame import (
    CI_Z,
    ActiveUser,
    FramePlan,
    FrameStrategy,
    FrameSummary,
    RepetitionKind,
    RepetitionPolicy,
    assemble_system,
    bits_to_symbols,
    compute_metrics,
    generate_traffic,
    precode,
    simulate_frame,
    solve_frame,
    symbols_to_bits,
    unprecode,
    verify_system,
)
from seekdecode.core.gf2m import FieldSpec, mat_rank
from seekdecode.core.phydec import DecodedCombination, DecodeOptions, DecoderStrategy, SlotDecodeResult

GF16 = FieldSpec(m=4)


def make_plan(field: FieldSpec, slots: list[list[int]], coefficients: list[list[int]], rng: np.random.Generator, bits: int = 8) -> FramePlan:
    users = tuple(
        ActiveUser(
            terminal=i,
            message=rng.integers(0, 2, size=bits, dtype=np.uint8),
            slots=np.array(s, dtype=np.int64),
            coefficients=np.array(c, dtype=np.int64),
        )
        for i, (s, c) in enumerate(zip(slots, coefficients))
    )
    n_slots = 1 + max((max(s) for s in slots), default=0)
    return FramePlan(slots=n_slots, field=field, users=users, policy=RepetitionPolicy())


def decoded(plan: FramePlan, slot: int, combinations: list[set[int]]) -> SlotDecodeResult:
    "Slot result holding the given user sets with the payloads the slot receiver would have decoded"
    colliders = plan.colliders(slot)
    rows = []
    for members in combinations:
        payload = np.zeros(plan.users[0].message.size, dtype=np.uint8)
        for u in members:
            payload ^= precode(plan.users[u].message, plan.users[u].coefficient(slot), plan.field).bits
        indicator = np.array([1 if u in members else 0 for u in colliders], dtype=np.uint8)
        rows.append(DecodedCombination(indicator=indicator, payload=payload))
    return SlotDecodeResult(strategy=DecoderStrategy.SND_JD, users=tuple(colliders), combinations=tuple(rows))


# Four users, two slots: users 0 and 1 in both, user 2 in slot 0 only, user 3 in slot 1 only. Slot 0 yields the
# combinations {0, 1} and {0, 2}, slot 1 yields {0, 1} and {1, 3}.
PATTERN_SLOTS = [[0, 1], [0, 1], [0], [1]]


def pattern_results(plan: FramePlan) -> list[SlotDecodeResult]:
    return [decoded(plan, 0, [{0, 1}, {0, 2}]), decoded(plan, 1, [{0, 1}, {1, 3}])]


def pattern_coefficients(rng: np.random.Generator, field: FieldSpec) -> list[list[int]]:
    return [[int(c) for c in rng.integers(1, field.order, size=len(s))] for s in PATTERN_SLOTS]


def test_binary_coefficients_lose_the_whole_pattern(rng: np.random.Generator) -> None:
    """
    Over GF(2) the pattern's matrix has rank 3 and no unit vector in its row space, so nothing is recovered.
    """
    gf2 = FieldSpec(m=1)
    plan = make_plan(gf2, PATTERN_SLOTS, [[1] * len(s) for s in PATTERN_SLOTS], rng)
    system = assemble_system(plan, pattern_results(plan))
    np.testing.assert_array_equal(system.matrix.entries, [[1, 1, 0, 0], [1, 0, 1, 0], [1, 1, 0, 0], [0, 1, 0, 1]])
    assert system.a.entries.shape == (4, 4)
    assert system.row_slots == (0, 0, 1, 1)
    assert system.rank == 3
    outcome = solve_frame(system, plan)
    assert outcome.recovered_count == 0
    assert outcome.lost == 4


def test_pattern_matrix_carries_coefficients(rng: np.random.Generator) -> None:
    coefficients = [[3, 7], [5, 11], [2], [9]]
    plan = make_plan(GF16, PATTERN_SLOTS, coefficients, rng)
    system = assemble_system(plan, pattern_results(plan))
    np.testing.assert_array_equal(system.matrix.entries, [[3, 5, 0, 0], [3, 0, 2, 0], [7, 11, 0, 0], [0, 11, 0, 9]])
    assert verify_system(system, plan)


def test_pattern_full_rank_probability_in_gf16(rng: np.random.Generator) -> None:
    """
    The determinant is proportional to a*e - b*d for the coefficients of users 0 and 1 in both slots, so full
    recovery happens with probability 14/15. Enumeration confirms the value and simulation hits it within 3 sigma.
    """
    nonzero = range(1, 16)
    full = sum(GF16.mul(a, e) != GF16.mul(b, d) for a in nonzero for b in nonzero for d in nonzero for e in nonzero)
    exact = full / 15**4
    assert exact == pytest.approx(14 / 15)

    trials = 1500
    recovered_all = 0
    for _ in range(trials):
        plan = make_plan(GF16, PATTERN_SLOTS, pattern_coefficients(rng, GF16), rng)
        system = assemble_system(plan, pattern_results(plan))
        outcome = solve_frame(system, plan)
        assert (outcome.recovered_count == 4) == (system.rank == 4)
        for user, message in outcome.recovered.items():
            np.testing.assert_array_equal(message, plan.users[user].message)
        recovered_all += outcome.recovered_count == 4
    sigma = np.sqrt(exact * (1 - exact) / trials)
    assert abs(recovered_all / trials - exact) < 3 * sigma


def test_single_user_single_slot(rng: np.random.Generator) -> None:
    plan = make_plan(GF16, [[0]], [[6]], rng)
    system = assemble_system(plan, [decoded(plan, 0, [{0}])])
    assert system.matrix.entries.tolist() == [[6]]
    outcome = solve_frame(system, plan)
    np.testing.assert_array_equal(outcome.recovered[0], plan.users[0].message)
    assert outcome.lost == 0


def test_no_combinations_no_equations(rng: np.random.Generator) -> None:
    plan = make_plan(GF16, PATTERN_SLOTS, pattern_coefficients(rng, GF16), rng)
    system = assemble_system(plan, [decoded(plan, 0, []), decoded(plan, 1, [])])
    assert system.matrix.rows == 0
    assert system.matrix.cols == 4
    assert solve_frame(system, plan).recovered_count == 0


def test_empty_frame() -> None:
    plan = FramePlan(slots=3, field=GF16, users=(), policy=RepetitionPolicy())
    empty = [SlotDecodeResult(strategy=DecoderStrategy.JD, users=(), combinations=()) for _ in range(3)]
    outcome = solve_frame(assemble_system(plan, empty), plan)
    assert (outcome.n_tx, outcome.recovered_count, outcome.lost, outcome.replicas_sent) == (0, 0, 0, 0)


def test_duplicate_rows_are_dropped(rng: np.random.Generator) -> None:
    plan = make_plan(GF16, [[0], [0]], [[4], [9]], rng)
    system = assemble_system(plan, [decoded(plan, 0, [{0, 1}, {0, 1}, {1}])])
    assert system.matrix.rows == 2


def test_more_rows_never_lower_rank(rng: np.random.Generator) -> None:
    plan = make_plan(GF16, PATTERN_SLOTS, pattern_coefficients(rng, GF16), rng)
    fewer = assemble_system(plan, [decoded(plan, 0, [{0, 1}]), decoded(plan, 1, [{1, 3}])])
    more = assemble_system(plan, [decoded(plan, 0, [{0, 1}, {2}]), decoded(plan, 1, [{1, 3}, {0, 1, 3}])])
    assert mat_rank(more.matrix) >= mat_rank(fewer.matrix)


def test_assemble_errors(rng: np.random.Generator) -> None:
    plan = make_plan(GF16, PATTERN_SLOTS, pattern_coefficients(rng, GF16), rng)
    with pytest.raises(FrameError):
        assemble_system(plan, pattern_results(plan)[:1])
    stray = SlotDecodeResult(
        strategy=DecoderStrategy.JD,
        users=(0, 7),
        combinations=(DecodedCombination(np.array([0, 1], dtype=np.uint8), np.zeros(8, dtype=np.uint8)),),
    )
    with pytest.raises(FrameError):
        assemble_system(plan, [stray, decoded(plan, 1, [])])


def test_wrong_payload_is_caught(rng: np.random.Generator) -> None:
    plan = make_plan(GF16, [[0]], [[6]], rng)
    result = decoded(plan, 0, [{0}])
    wrong = DecodedCombination(result.combinations[0].indicator, result.combinations[0].payload ^ 1)
    system = assemble_system(plan, [SlotDecodeResult(strategy=DecoderStrategy.JD, users=(0,), combinations=(wrong,))])
    assert not verify_system(system, plan)
    with pytest.raises(FrameError):
        solve_frame(system, plan)


def test_symbol_packing_is_little_endian() -> None:
    bits = np.array([1, 0, 0, 0, 0, 1, 0, 0, 1, 1, 0, 0], dtype=np.uint8)
    np.testing.assert_array_equal(bits_to_symbols(bits, 4), [1, 2, 3])
    np.testing.assert_array_equal(symbols_to_bits([1, 2, 3], 4), bits)
    with pytest.raises(FrameError):
        bits_to_symbols(bits[:6], 4)


def test_precode() -> None:
    u = symbols_to_bits([1, 2, 3], 4)
    assert precode(u, 2, GF16).symbols.tolist() == [2, 4, 6]
    np.testing.assert_array_equal(precode(u, 1, GF16).bits, u)
    for alpha in range(1, 16):
        np.testing.assert_array_equal(unprecode(precode(u, alpha, GF16), alpha), u)
        np.testing.assert_array_equal(precode(precode(u, alpha, GF16).bits, GF16.inv(alpha), GF16).bits, u)
    assert precode(u, 7, GF16).bits.size == u.size
    with pytest.raises(FrameError):
        precode(u, 0, GF16)
    with pytest.raises(FrameError):
        precode(u[:6], 3, GF16)


def test_traffic_mean_load() -> None:
    rng = np.random.default_rng(3)
    policy = RepetitionPolicy()
    counts = [generate_traffic(1.0, 10, 100, policy, rng, field=GF16, message_bits=8).n_tx for _ in range(3000)]
    assert np.mean(counts) == pytest.approx(10.0, rel=0.03)


def test_traffic_fixed_repetition(rng: np.random.Generator) -> None:
    plan = generate_traffic(2.0, 10, 50, RepetitionPolicy(d=2), rng, field=GF16, message_bits=16)
    assert plan.n_tx > 0
    for user in plan.users:
        assert user.slots.size == 2
        assert len(set(user.slots.tolist())) == 2
        assert user.message.size == 16
        assert np.all((user.coefficients >= 1) & (user.coefficients < 16))
        assert user.coefficient(int(user.slots[1])) == user.coefficients[1]
    assert plan.replicas_sent == 2 * plan.n_tx
    assert sum(len(plan.colliders(s)) for s in range(10)) == plan.replicas_sent


def test_traffic_binary_field_coefficients_are_one(rng: np.random.Generator) -> None:
    plan = generate_traffic(2.0, 10, 50, RepetitionPolicy(), rng, field=FieldSpec(m=1), message_bits=5)
    assert all(np.all(u.coefficients == 1) for u in plan.users)


def test_traffic_bernoulli_repetition(rng: np.random.Generator) -> None:
    policy = RepetitionPolicy(kind=RepetitionKind.BERNOULLI, p=0.3)
    replicas = []
    for _ in range(200):
        plan = generate_traffic(1.0, 10, 20, policy, rng, field=GF16, message_bits=8)
        for user in plan.users:
            assert len(set(user.slots.tolist())) == user.slots.size
            replicas.append(user.slots.size)
    assert np.mean(replicas) == pytest.approx(3.0, rel=0.1)


def test_traffic_errors(rng: np.random.Generator) -> None:
    with pytest.raises(FrameError):
        generate_traffic(1.0, 2, 10, RepetitionPolicy(d=3), rng, field=GF16, message_bits=8)
    with pytest.raises(FrameError):
        generate_traffic(0.0, 10, 10, RepetitionPolicy(), rng, field=GF16, message_bits=8)
    with pytest.raises(FrameError):
        generate_traffic(1.0, 10, 10, RepetitionPolicy(), rng, field=GF16, message_bits=6)
    with pytest.raises(FrameError):
        RepetitionPolicy(d=4).draw_slots(3, rng)
    user = ActiveUser(terminal=0, message=np.zeros(8, dtype=np.uint8), slots=np.array([1]), coefficients=np.array([5]))
    with pytest.raises(FrameError):
        user.coefficient(0)


def test_aloha_strategy() -> None:
    assert FrameStrategy.ALOHA.decoder == DecoderStrategy.SEPARATE
    assert FrameStrategy.ALOHA.decode_options(DecodeOptions()).k_max == 1
    assert FrameStrategy.ALOHA.policy(RepetitionPolicy(d=3)).d == 1
    assert FrameStrategy.SND_JD.decoder == DecoderStrategy.SND_JD
    assert FrameStrategy.SND_JD.policy(RepetitionPolicy(d=3)).d == 3


def test_simulate_frame_high_snr(small_code: CodeSpec, rng: np.random.Generator) -> None:
    field = FieldSpec(m=8)
    plan = generate_traffic(0.8, 5, 20, RepetitionPolicy(), rng, field=field, message_bits=small_code.k)
    outcome = simulate_frame(plan, small_code, "snd_jd", 30.0, rng)
    assert outcome.n_tx == plan.n_tx
    assert len(outcome.slot_results) == 5
    assert outcome.recovered_count + outcome.lost == plan.n_tx
    assert outcome.replicas_sent == 2 * plan.n_tx
    assert outcome.system.matrix.rows >= outcome.system.rank
    for user, message in outcome.recovered.items():
        np.testing.assert_array_equal(message, plan.users[user].message)
    if outcome.system.rank == plan.n_tx:
        assert outcome.recovered_count == plan.n_tx
    summary = outcome.summary()
    assert summary.innovative_total == outcome.innovative_total


def test_simulate_frame_aloha(small_code: CodeSpec, rng: np.random.Generator) -> None:
    field = FieldSpec(m=4)
    policy = FrameStrategy.ALOHA.policy(RepetitionPolicy())
    plan = generate_traffic(1.0, 8, 20, policy, rng, field=field, message_bits=small_code.k)
    outcome = simulate_frame(plan, small_code, FrameStrategy.ALOHA, 30.0, rng)
    alone = {plan.colliders(s)[0] for s in range(8) if len(plan.colliders(s)) == 1}
    assert set(outcome.recovered) <= alone
    for slot, result in enumerate(outcome.slot_results):
        assert result.blocked == (len(plan.colliders(slot)) > 1)


def test_simulate_frame_checks_message_length(small_code: CodeSpec, rng: np.random.Generator) -> None:
    plan = generate_traffic(2.0, 4, 10, RepetitionPolicy(), rng, field=GF16, message_bits=8)
    with pytest.raises(FrameError):
        simulate_frame(plan, small_code, FrameStrategy.JD, 10.0, rng)


def summary(n_tx: int, recovered: int, replicas: int, slots: int = 10, innovative: int = 0) -> FrameSummary:
    return FrameSummary(
        n_tx=n_tx, slots=slots, recovered_count=recovered, lost=n_tx - recovered, replicas_sent=replicas, innovative_total=innovative
    )


def test_metrics_identities() -> None:
    outcomes = [summary(12, 9, 24, innovative=11), summary(8, 8, 16, innovative=9), summary(10, 4, 20, innovative=7)]
    report = compute_metrics(outcomes, rate=0.5)
    assert report.phi == pytest.approx(21 / 30)
    assert report.sum_rate == pytest.approx(0.5 * report.phi, abs=1e-12)
    assert report.phi == pytest.approx(report.g_realized * (1 - report.plr), abs=1e-12)
    assert report.plr == pytest.approx(9 / 30)
    assert report.plr_defined
    assert report.energy_eff == pytest.approx(60 / 21)
    assert report.innov_mean == pytest.approx(27 / 30)
    assert report.ci_phi > 0
    assert report.ci_sum_rate == pytest.approx(0.5 * report.ci_phi)


def test_metrics_full_recovery_with_two_replicas() -> None:
    report = compute_metrics([summary(10, 10, 20), summary(6, 6, 12)], rate=0.5)
    assert report.energy_eff == pytest.approx(2.0)
    assert report.plr == 0.0
    assert report.sum_rate == pytest.approx(0.5 * report.g_realized)


def test_metrics_without_traffic() -> None:
    report = compute_metrics([summary(0, 0, 0)], rate=0.5)
    assert report.phi == 0.0
    assert report.plr == 0.0
    assert not report.plr_defined
    assert report.energy_eff == float("inf")
    assert np.isnan(report.ci_phi)
    with pytest.raises(FrameError):
        compute_metrics([], rate=0.5)


@pytest.mark.slow
@pytest.mark.parametrize("g", [0.2, 0.5, 1.0])
def test_aloha_throughput_matches_closed_form(g: float, small_code: CodeSpec) -> None:
    """
    One replica per packet and a clean channel: a slot delivers exactly when it holds one packet, so phi = G e^-G.
    """
    rng = np.random.default_rng(round(100 * g))
    policy = FrameStrategy.ALOHA.policy(RepetitionPolicy())
    outcomes = []
    for _ in range(300):
        plan = generate_traffic(g, 10, 50, policy, rng, field=GF16, message_bits=small_code.k)
        outcomes.append(simulate_frame(plan, small_code, FrameStrategy.ALOHA, 40.0, rng).summary())
    report = compute_metrics(outcomes, rate=small_code.rate)
    standard_error = report.ci_phi / CI_Z
    assert abs(report.phi - g * np.exp(-g)) <= 3 * standard_error
