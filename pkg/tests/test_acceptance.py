"""Acceptance gate: one PASS/FAIL line per criterion, at the stated tolerances."""

import math
import time

import numpy as np
import pytest
from conftest import acceptance

from qmint import qnet
from qmint.ledger import EntryKind, Ledger, Regime
from qmint.mint import codeword
from qmint.noise import LogicalQubit, apply_channel, collective_bit_flip, dfs_encode
from qmint.qnet import Link, Network, Node, measure_and_prepare
from qmint.qstate import PHI_PLUS, BellKind, PureState, fidelity, haar_state, werner_state
from qmint.rng import SeededRng
from qmint.scenario import Segment, bundled, bundled_names
from qmint.teleport import teleport
from qmint.verify import Observable, chsh_value, sample_chsh, weak_pointer_shift, weak_value
from test_ledger import prefix_oracle, random_quantum_script

SQRT2 = math.sqrt(2)


def test_ac1_teleportation_exact():
    rng = SeededRng(101)
    t0 = time.perf_counter()
    worst = 1.0
    for _ in range(1000):
        money = haar_state(1, rng)
        for kind in BellKind:
            worst = min(worst, teleport(money, PHI_PLUS, rng, forced=kind).fidelity())
    elapsed = time.perf_counter() - t0
    ok = worst >= 1 - 1e-9 and elapsed < 5.0
    assert acceptance("AC1", ok, f"min fidelity {worst:.12f} over 4000 branches in {elapsed:.2f} s")


def test_ac2_no_cloning():
    rng = SeededRng(102)
    fids = []
    for _ in range(10_000):
        psi = haar_state(1, rng)
        fids.append(fidelity(psi, measure_and_prepare(psi, 0, rng)))
    mean = float(np.mean(fids))
    # Best 2-qubit "cloner" attempts on |0> and |+>: U|s>|0> against |s>|s>.
    zero, plus = np.array([1, 0]), np.array([1, 1]) / SQRT2
    ins = np.stack([np.kron(zero, zero), np.kron(plus, zero)], axis=1)
    targets = np.stack([np.kron(zero, zero), np.kron(plus, plus)], axis=1)
    z = rng.normal((10_000, 4, 4)) + 1j * rng.normal((10_000, 4, 4))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    u = q * (d / np.abs(d))[:, None, :]
    outs = u @ ins
    f = np.abs(np.einsum("ij,nij->nj", targets.conj(), outs)) ** 2
    cloned = int(np.sum(np.all(f >= 1 - 1e-6, axis=1)))
    ok = abs(mean - 2 / 3) <= 0.01 and cloned == 0
    assert acceptance(
        "AC2", ok, f"intercept-resend mean fidelity {mean:.4f} (target 2/3 +/- 0.01); clones found {cloned}/10000"
    )


def test_ac3_dfs_invariance():
    rng = SeededRng(103)
    worst_dfs, worst_raw = 0.0, 0.0
    zero = PureState.basis("00")
    for p in (0.1, 0.3, 0.5, 0.9):
        ch = collective_bit_flip(p)
        for _ in range(100):
            psi = haar_state(1, rng).amplitudes
            enc = dfs_encode(LogicalQubit(psi[0], psi[1]))
            worst_dfs = max(worst_dfs, abs(1 - fidelity(enc, apply_channel(enc, ch))))
        worst_raw = max(worst_raw, abs(fidelity(zero, apply_channel(zero, ch)) - (1 - p)))
    ok = worst_dfs <= 1e-9 and worst_raw <= 1e-12
    assert acceptance("AC3", ok, f"max DFS infidelity {worst_dfs:.2e}; raw |00> deviation from 1-p {worst_raw:.2e}")


def test_ac4_chsh_calibration():
    rng = SeededRng(104)
    s_phi = chsh_value(PHI_PLUS)
    s_sep = max(
        chsh_value(PureState(np.kron(haar_state(1, rng).amplitudes, haar_state(1, rng).amplitudes)))
        for _ in range(1000)
    )
    analytic_err, sampled_z = 0.0, 0.0
    for v in np.linspace(0, 1, 11):
        rho = werner_state(float(v))
        analytic_err = max(analytic_err, abs(chsh_value(rho) - 2 * SQRT2 * v))
        s_hat, sigma = sample_chsh(rho, 10_000, rng)
        sampled_z = max(sampled_z, abs(s_hat - 2 * SQRT2 * v) / sigma)
    ok = abs(s_phi - 2 * SQRT2) <= 1e-9 and s_sep <= 2 + 1e-9 and analytic_err <= 1e-9 and sampled_z <= 3
    assert acceptance(
        "AC4",
        ok,
        f"S(Phi+)={s_phi:.12f}; max separable S={s_sep:.6f}; Werner analytic err {analytic_err:.1e}; "
        f"max sampled deviation {sampled_z:.2f} sigma",
    )


def test_ac5_attack_detection():
    injected = detected = false_auth = 0
    for seed in range(5):
        m = qnet.run(bundled("adversary_mitm").with_seed(seed)).metrics
        injected += m["attacks_injected"]
        detected += m["attack_detections"]
        false_auth += m["false_authentic"]
    ok = injected > 0 and detected == injected and false_auth == 0
    assert acceptance("AC5", ok, f"{detected}/{injected} injections flagged over 5 seeds; false Authentic {false_auth}")


def random_hermitian(rng):
    a = rng.normal((2, 2)) + 1j * rng.normal((2, 2))
    return (a + a.conj().T) / 2


def test_ac6_weak_values():
    rng = SeededRng(106)
    formula_err, ratio_fail, n = 0.0, 0, 0
    eps = (0.1, 0.05, 0.01)
    while n < 1000:
        psi_i, psi_f = haar_state(1, rng), haar_state(1, rng)
        overlap = np.vdot(psi_f.amplitudes, psi_i.amplitudes)
        if abs(overlap) <= 0.1:
            continue
        n += 1
        m = random_hermitian(rng)
        # Oracle through the spectral decomposition.
        vals, vecs = np.linalg.eigh(m)
        oracle = sum(
            lam * np.vdot(psi_f.amplitudes, v) * np.vdot(v, psi_i.amplitudes) for lam, v in zip(vals, vecs.T)
        ) / overlap
        ow = weak_value(psi_i, psi_f, Observable(m))
        formula_err = max(formula_err, abs(ow - oracle) / max(1.0, abs(oracle)))
        errs = [abs(weak_pointer_shift(psi_i, psi_f, Observable(m), e) / e - ow.real) for e in eps]
        for (eb, errb), (es, errs_) in zip(zip(eps, errs), zip(eps[1:], errs[1:])):
            if eb * abs(ow) > 0.25:
                continue  # coupling too strong for the linear regime at this step
            if errs_ > 1.1 * (es / eb) * errb + 1e-4 * es:
                ratio_fail += 1
    ok = formula_err <= 1e-12 and ratio_fail == 0
    assert acceptance(
        "AC6", ok, f"max relative weak-value error {formula_err:.1e}; ratio-test failures {ratio_fail}/1000"
    )


def classical_script(seed):
    r = np.random.default_rng(seed)
    base = int(r.integers(0, 1000))
    led = Ledger(Regime.Classical, m_existing=base)
    loans = []
    for t in range(int(r.integers(1, 20))):
        amount = int(r.integers(1, 500))
        loans.append(amount)
        e = led.classical_loan("b", amount, float(t))
        if e.m_total_after != base + sum(loans):
            return False
    return True


def accepted_double_spends(led):
    """Independent replay: a Transfer is bad if its actor is not the current holder,
    or if a non-relend ledger moves a serial a second time."""
    holder, moved, bad = {}, set(), 0
    for e in led.entries:
        if e.kind is EntryKind.Mint:
            holder[e.detail["serials"][0]] = e.actor
        elif e.kind is EntryKind.Transfer:
            for s in e.detail["serials"]:
                bad += holder.get(s) != e.actor or (not led.relend and s in moved)
                holder[s] = e.detail["to"]
                moved.add(s)
    return bad


def test_ac7_economic_constraint():
    violations, double = 0, 0
    for seed in range(10_000):
        led = random_quantum_script(seed)
        try:
            prefix_oracle(led.entries)
        except AssertionError:
            violations += 1
        double += accepted_double_spends(led)
    classical_bad = sum(not classical_script(s) for s in range(10_000))
    ok = violations == 0 and classical_bad == 0 and double == 0
    assert acceptance(
        "AC7",
        ok,
        f"quantum prefix violations {violations}/10000; classical identity mismatches {classical_bad}/10000; "
        f"accepted double-spends {double}",
    )


def test_ac8_determinism():
    same, differ = [], []
    for name in bundled_names():
        sc = bundled(name)
        a, b = qnet.run(sc).digest, qnet.run(sc).digest
        c = qnet.run(sc.with_seed(sc.seed + 1)).digest
        same.append(a == b)
        differ.append(a != c)
    ok = all(same) and all(differ)
    assert acceptance(
        "AC8", ok, f"{sum(same)}/{len(same)} scenarios reproduce; {sum(differ)}/{len(differ)} change with the seed"
    )


def teleport_channel_oracle(psi, pair_rho):
    """Average over all Bell branches, in bare numpy: returns <psi|rho_out|psi>."""
    s2 = 1 / SQRT2
    bells = {
        (0, 0): (np.array([1, 0, 0, 1]) * s2, np.eye(2)),
        (1, 0): (np.array([1, 0, 0, -1]) * s2, np.diag([1, -1])),
        (0, 1): (np.array([0, 1, 1, 0]) * s2, np.array([[0, 1], [1, 0]])),
        (1, 1): (np.array([0, 1, -1, 0]) * s2, np.diag([1, -1]) @ np.array([[0, 1], [1, 0]])),
    }
    rho = np.kron(np.outer(psi, psi.conj()), pair_rho)
    out = np.zeros((2, 2), dtype=complex)
    for bell, fix in bells.values():
        k = np.kron(bell.conj()[None, :], np.eye(2))  # <bell|_CA (x) I_B
        branch = k @ rho @ k.conj().T
        out += fix @ branch @ fix.conj().T
    return float(np.vdot(psi, out @ psi).real)


def repeater_oracle(v=0.81):
    """Exact average fidelity over the six-state 2-design (equals the Haar average)."""
    s2 = 1 / SQRT2
    states = [
        np.array([1, 0]),
        np.array([0, 1]),
        np.array([s2, s2]),
        np.array([s2, -s2]),
        np.array([s2, 1j * s2]),
        np.array([s2, -1j * s2]),
    ]
    phi = np.array([1, 0, 0, 1]) * s2
    pair = v * np.outer(phi, phi) + (1 - v) * np.eye(4) / 4
    return float(np.mean([teleport_channel_oracle(s, pair) for s in states]))


def repeater_average(trials=10_000, seed=109):
    rng = SeededRng(seed)
    net = Network(rng)
    for nid, kind in [("A", "Bank"), ("R", "Repeater"), ("B", "Bank")]:
        net.add_node(Node(nid, kind))
    net.add_link(Link("R-A", "Fiber", "R", "A", 0.001, 0.0, 0.9))
    net.add_link(Link("R-B", "Fiber", "R", "B", 0.001, 0.0, 0.9))
    route = (Segment("R", "A", "R"), Segment("R", "R", "B"))
    fids = []
    for _ in range(trials):
        got = []
        net.establish(route, got.append)
        net.run()
        money = haar_state(1, rng)
        fids.append(teleport(money, net.consume(got[0]), rng).fidelity())
    return float(np.mean(fids))


@pytest.fixture(scope="module")
def repeater_mean():
    return repeater_average()


def test_ac9_repeater_path(repeater_mean):
    oracle = repeater_oracle()
    ok = abs(repeater_mean - oracle) <= 0.01
    assert acceptance(
        "AC9", ok, f"swapped v=0.9 path mean fidelity {repeater_mean:.4f} vs density-matrix oracle {oracle:.4f}"
    )


@pytest.mark.xfail(strict=True, reason="(2 + v^2)/3 is not the fidelity of a Werner-resource teleport; see notes")
def test_ac9_literal_formula(repeater_mean):
    literal = (2 + 0.81) / 3
    ok = abs(repeater_mean - literal) <= 0.01
    acceptance("AC9-literal", ok, f"mean fidelity {repeater_mean:.4f} vs stated value (2+0.81)/3 = {literal:.4f}")
    assert ok
