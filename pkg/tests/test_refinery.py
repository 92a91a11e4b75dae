import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from infothermo.refinery import (
    RefineryError,
    RegisterVector,
    StreamRefiner,
    SwapStep,
    avg_defect,
    avg_objective,
    dumps_trajectory,
    energy_rate,
    format_bits,
    invert_refinement,
    loads_trajectory,
    optimize_trajectory,
    parse_bits,
    purity,
    refine_stream,
    run_trajectory,
    sample_covariance,
    shift_hamiltonian,
    step_matrix,
    swap_step,
    uniformity_defect,
)
from infothermo.thermo import LN2, ThermalContext

from oracles import exhaustive_trajectory_optimum, explicit_objective

CTX = ThermalContext(1.0)
bits_st = st.lists(st.integers(0, 1), min_size=3, max_size=24)


def rv(*bits):
    return RegisterVector(bits)


def test_swap_step_examples():
    step = SwapStep(0, 1, 2)
    assert swap_step(rv(1, 0, 1), step).bits == (0, 1, 1)
    assert swap_step(rv(1, 0, 0), step).bits == (1, 0, 0)


def test_swap_step_errors():
    with pytest.raises(RefineryError):
        SwapStep(0, 0, 1)
    with pytest.raises(RefineryError):
        swap_step(rv(1, 0, 1), SwapStep(0, 1, 3))


def test_data_step_involution_random():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(3, 20))
        psi = RegisterVector(tuple(int(b) for b in rng.integers(0, 2, n)))
        x, y, z = (int(v) for v in rng.choice(n, 3, replace=False))
        step = SwapStep(x, y, z)
        assert swap_step(swap_step(psi, step), step) == psi


@settings(max_examples=100)
@given(bits_st, st.data())
def test_counts_conserved(bits, data):
    psi = RegisterVector(tuple(bits))
    n = len(bits)
    steps = []
    for _ in range(data.draw(st.integers(0, 10))):
        x, y, z = data.draw(st.permutations(range(n)))[:3]
        if data.draw(st.booleans()):
            steps.append(SwapStep(x, y, z))
        else:
            steps.append(SwapStep(x, y, z, "schedule", data.draw(st.booleans())))
    out = run_trajectory(psi, steps)
    assert (out.n0, out.n1) == (psi.n0, psi.n1)
    assert out.n0 + out.n1 == n


@given(bits_st, st.data())
def test_step_matrices_symmetric_orthogonal(bits, data):
    psi = RegisterVector(tuple(bits))
    n = len(bits)
    x, y, z = data.draw(st.permutations(range(n)))[:3]
    step = SwapStep(x, y, z)
    u = step_matrix(step, n, psi)
    assert np.array_equal(u, u.T)
    assert np.array_equal(u @ u, np.eye(n, dtype=np.int64))
    assert np.array_equal(u @ np.array(bits), np.array(swap_step(psi, step).bits))


def test_uniformity_defect_examples():
    assert uniformity_defect(rv(0, 0, 0, 0)) == 0.0
    # C psi - psi has two unit entries, so the squared norm is 2 and Z is 1
    assert uniformity_defect(rv(1, 1, 1, 0, 0)) == 1.0
    assert uniformity_defect(rv(1, 0, 1, 0, 1, 0)) == 3.0


@given(bits_st)
def test_defect_properties(bits):
    psi = RegisterVector(tuple(bits))
    z = uniformity_defect(psi)
    v = np.array(bits, dtype=float)
    assert z >= 0
    assert z == pytest.approx(v @ v - v @ shift_hamiltonian(len(bits)) @ v, abs=1e-12)
    assert (z == 0) == (len(set(bits)) == 1)


@pytest.mark.parametrize("n", range(3, 10))
def test_defect_on_cyclic_blocks(n):
    for start in range(n):
        for length in range(1, n):
            bits = [0] * n
            for i in range(length):
                bits[(start + i) % n] = 1
            assert uniformity_defect(RegisterVector(tuple(bits))) == 1.0


def test_avg_objective_examples():
    cov = sample_covariance([rv(1, 1, 0, 0)])
    assert avg_objective(cov, ()) == pytest.approx(1.0)
    ones = sample_covariance([rv(1, 1, 1, 1, 1)] * 3)
    traj = (SwapStep.schedule(0, 3), SwapStep.schedule(1, 4), SwapStep.schedule(2, 0, False))
    assert avg_objective(ones, traj) == pytest.approx(5.0)
    with pytest.raises(RefineryError):
        avg_objective(cov, (SwapStep(0, 1, 2),))


def test_avg_objective_matches_explicit_and_exhaustive_length2():
    samples = [(1, 0, 1, 0), (0, 1, 1, 0), (1, 0, 0, 1)]
    cov = sample_covariance([RegisterVector(s) for s in samples])
    pairs = list(itertools.combinations(range(4), 2))
    best = -np.inf
    for (a, b), (c, d) in itertools.product(pairs, repeat=2):
        for fa, fb in itertools.product((False, True), repeat=2):
            traj = (SwapStep.schedule(a, b, fa), SwapStep.schedule(c, d, fb))
            applied = [p for p, f in (((a, b), fa), ((c, d), fb)) if f]
            f = avg_objective(cov, traj)
            assert f == pytest.approx(explicit_objective(samples, applied), abs=1e-12)
            best = max(best, f)
    assert best == pytest.approx(exhaustive_trajectory_optimum(samples, 2))


def test_defect_identity_random():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n, m = int(rng.integers(3, 9)), int(rng.integers(1, 33))
        samples = [RegisterVector(tuple(int(b) for b in rng.integers(0, 2, n))) for _ in range(m)]
        traj = tuple(SwapStep.schedule(*map(int, rng.choice(n, 2, replace=False)), bool(rng.integers(2)))
                     for _ in range(int(rng.integers(0, 5))))
        cov = sample_covariance(samples)
        after = [run_trajectory(s, traj) for s in samples]
        mean_z = np.mean([uniformity_defect(s) for s in after])
        assert avg_defect(cov, traj) == pytest.approx(mean_z, abs=1e-12)


def test_optimize_sorted_samples_is_noop():
    res = optimize_trajectory([rv(1, 1, 0, 0)] * 5, max_len=3, seed=1)
    assert res.objective == pytest.approx(1.0)
    assert res.trajectory == ()


def test_optimize_single_sample_one_step():
    samples = [(1, 0, 1, 0)]
    res = optimize_trajectory([RegisterVector(s) for s in samples], max_len=1, seed=0)
    assert len(res.trajectory) == 1
    assert res.objective == pytest.approx(exhaustive_trajectory_optimum(samples, 1))
    assert run_trajectory(rv(1, 0, 1, 0), res.trajectory).bits in {(1, 1, 0, 0), (0, 1, 1, 0), (0, 0, 1, 1), (1, 0, 0, 1)}


def test_optimize_history_and_determinism():
    rng = np.random.default_rng(2)
    samples = [RegisterVector(tuple(int(b) for b in rng.integers(0, 2, 7))) for _ in range(10)]
    a = optimize_trajectory(samples, max_len=3, seed=11)
    b = optimize_trajectory(samples, max_len=3, seed=11)
    assert a.trajectory == b.trajectory and a.objective == b.objective
    assert all(x <= y for x, y in zip(a.history, a.history[1:]))
    assert a.objective >= avg_objective(sample_covariance(samples), ())
    assert a.objective == pytest.approx(avg_objective(sample_covariance(samples), a.trajectory))


def test_optimize_noisy_template():
    rng = np.random.default_rng(9)
    template = np.array([1, 0, 0, 1, 1, 0, 1, 0])
    samples = [tuple(int(b) for b in template ^ (rng.random(8) < 0.1)) for _ in range(32)]
    res = optimize_trajectory([RegisterVector(s) for s in samples], max_len=3, seed=3)
    exact = exhaustive_trajectory_optimum(samples, 3)
    assert res.objective >= 0.98 * exact


def test_optimize_rejects_empty():
    with pytest.raises(RefineryError):
        optimize_trajectory([], max_len=2)


def test_delay_xor_band_switches():
    eps = refine_stream(StreamRefiner.delay_xor(), [int(c) for c in "111100001111"])
    # the first output compares against the zero-initialized window
    assert "".join(map(str, eps)) == "100010001000"
    assert eps[1:] == [0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0]


def test_identity_and_negation():
    xs = [0, 1, 1, 0, 1]
    assert refine_stream(StreamRefiner("identity"), xs) == xs
    assert refine_stream(StreamRefiner("negation"), xs) == [1 - x for x in xs]


def _majority3(w):
    return int(sum(w) >= 2)


def test_table_predictor_reference_simulation():
    xs = [i % 2 for i in range(12)]
    got = refine_stream(StreamRefiner("table", k=3, u=_majority3), xs)
    hist = [0, 0, 0]
    expected = []
    for x in xs:
        expected.append(x ^ int(hist[-1] + hist[-2] + hist[-3] >= 2))
        hist.append(x)
    assert got == expected


def test_negation_roundtrip():
    rng = np.random.default_rng(0)
    xs = [int(b) for b in rng.integers(0, 2, 1000)]
    r = StreamRefiner("negation")
    assert invert_refinement(r, refine_stream(r, xs)) == xs


def test_delay_xor_roundtrip_exhaustive():
    for init in (0, 1):
        r = StreamRefiner("delay-xor", window=(init,))
        for i in range(1 << 10):
            xs = [(i >> j) & 1 for j in range(10)]
            assert invert_refinement(r, refine_stream(r, xs), (init,)) == xs


def test_table_roundtrip_random():
    rng = np.random.default_rng(4)
    for _ in range(20):
        k = int(rng.integers(1, 5))
        table = {w: int(rng.integers(2)) for w in itertools.product((0, 1), repeat=k)}
        window = tuple(int(b) for b in rng.integers(0, 2, k))
        r = StreamRefiner("table", k=k, u=table, window=window)
        xs = [int(b) for b in rng.integers(0, 2, 300)]
        assert invert_refinement(r, refine_stream(r, xs)) == xs


def test_invert_rejects_bad_window():
    with pytest.raises(RefineryError):
        invert_refinement(StreamRefiner.delay_xor(), [0, 1], (0, 0))


def test_purity_and_energy_rate():
    assert energy_rate(CTX, 0.5) == 0.0
    assert energy_rate(CTX, 1.0) == pytest.approx(LN2)
    assert energy_rate(CTX, 0.0) == pytest.approx(LN2)
    # mpmath: 1 - H2(0.95) = 0.713603042884
    assert energy_rate(CTX, 0.95) == pytest.approx(0.713603042884044 * LN2, abs=1e-12)
    assert purity([0, 0, 1, 0]) == 0.75
    assert purity([1, 0, 0, 0], warmup=1) == 1.0


@given(st.floats(0, 1))
def test_energy_rate_symmetric(q):
    assert energy_rate(CTX, q) == pytest.approx(energy_rate(CTX, 1 - q), abs=1e-12)


def test_bit_text_and_trajectory_roundtrip():
    recs = [[0, 1, 1], [1, 0]]
    assert parse_bits(format_bits(recs)) == recs
    with pytest.raises(RefineryError):
        parse_bits("01x\n")
    traj = (SwapStep.schedule(0, 5, True), SwapStep.schedule(2, 1, False), SwapStep(3, 4, 0))
    text = dumps_trajectory(traj)
    assert text == "SWAP 0 5 1\nSWAP 2 1 0\nDATA 3 4 0\n"
    assert loads_trajectory(text) == traj
