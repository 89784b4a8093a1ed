import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qmint import qstate as qs
from qmint import verify as vf
from qmint.errors import DimensionMismatch, OrthogonalPostSelection, TooFewTrials
from qmint.qstate import BellKind, PureState
from qmint.rng import SeededRng

Z = vf.Observable.pauli("Z")


def random_hermitian(d, rng):
    a = rng.normal((d, d)) + 1j * rng.normal((d, d))
    return vf.Observable(a + a.conj().T)


def test_weak_value_examples():
    assert vf.weak_value(qs.KET_0, qs.KET_0, Z) == pytest.approx(1)
    assert vf.weak_value(qs.KET_PLUS, qs.KET_0, Z) == pytest.approx(1)
    assert vf.weak_value(qs.KET_PLUS, qs.KET_1, Z) == pytest.approx(-1)


def test_weak_value_orthogonal():
    with pytest.raises(OrthogonalPostSelection):
        vf.weak_value(qs.KET_0, qs.KET_1, Z)


def test_weak_value_can_exceed_spectrum():
    psi_i = PureState.normalized([1, 1])
    psi_f = PureState.normalized([1, -0.9])
    assert vf.weak_value(psi_i, psi_f, Z).real > 1


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([1, 2]))
def test_weak_value_matches_inner_products(seed, n):
    r = SeededRng(seed)
    psi_i, psi_f = qs.haar_state(n, r), qs.haar_state(n, r)
    obs = random_hermitian(2**n, r)
    if abs(psi_f.inner(psi_i)) < 0.1:
        return
    num = sum(
        psi_f.amplitudes[j].conjugate() * obs.matrix[j, k] * psi_i.amplitudes[k]
        for j in range(2**n)
        for k in range(2**n)
    )
    den = sum(psi_f.amplitudes[j].conjugate() * psi_i.amplitudes[j] for j in range(2**n))
    got = vf.weak_value(psi_i, psi_f, obs)
    assert abs(got - num / den) <= 1e-12 * max(1.0, abs(num / den))


@pytest.mark.parametrize("eps", [0.2, 0.05, 0.01])
def test_pointer_eigenstate_exact(eps):
    assert vf.weak_pointer_shift(qs.KET_0, qs.KET_0, Z, eps) == pytest.approx(eps, abs=1e-12)
    assert vf.weak_pointer_shift(qs.KET_1, qs.KET_1, Z, eps) == pytest.approx(-eps, abs=1e-12)


def test_pointer_plus_to_zero_slope():
    target = vf.weak_value(qs.KET_PLUS, qs.KET_0, Z).real
    slopes = [vf.weak_pointer_shift(qs.KET_PLUS, qs.KET_0, Z, e) / e for e in (0.01, 0.005)]
    # Richardson extrapolation of a first-order series.
    assert 2 * slopes[1] - slopes[0] == pytest.approx(target, abs=1e-4)
    assert all(abs(s - target) <= 0.01 for s in slopes)


def test_pointer_first_order_convergence(rng):
    for _ in range(20):
        psi_i, psi_f = qs.haar_state(1, rng), qs.haar_state(1, rng)
        if abs(psi_f.inner(psi_i)) < 0.3:
            continue
        obs = random_hermitian(2, rng)
        target = vf.weak_value(psi_i, psi_f, obs).real
        eps = (0.1, 0.05, 0.01)
        errs = [abs(vf.weak_pointer_shift(psi_i, psi_f, obs, e) / e - target) for e in eps]
        c = errs[0] / eps[0]
        # error <= C * eps with the constant fitted at the largest coupling
        assert all(err <= 1.1 * c * e + 1e-10 for err, e in zip(errs, eps))


def test_pointer_bad_epsilon():
    with pytest.raises(ValueError):
        vf.weak_pointer_shift(qs.KET_0, qs.KET_0, Z, 0.3)
    with pytest.raises(OrthogonalPostSelection):
        vf.weak_pointer_shift(qs.KET_0, qs.KET_1, Z, 0.1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.001, 0.2))
def test_minimal_disturbance(seed, eps):
    psi = qs.haar_state(1, SeededRng(seed))
    for label in "XYZ":
        assert vf.weak_disturbance(psi, vf.Observable.pauli(label), eps) >= 1 - eps**2 - 1e-12


@pytest.mark.parametrize("kind", list(BellKind))
def test_nd_bell_discriminate_eigencases(kind, rng):
    got, post = vf.nd_bell_discriminate(kind.state(), rng)
    assert got is kind
    assert qs.fidelity(post, kind.state()) == pytest.approx(1, abs=1e-9)
    again, post2 = vf.nd_bell_discriminate(post, rng)
    assert again is kind and qs.fidelity(post2, kind.state()) >= 1 - 1e-9


def test_nd_bell_on_product_state_projects(rng):
    counts = {}
    for _ in range(200):
        kind, post = vf.nd_bell_discriminate(PureState.basis("01"), rng)
        counts[kind] = counts.get(kind, 0) + 1
        assert post == kind.state()
    assert set(counts) == {BellKind.PsiPlus, BellKind.PsiMinus}


def test_nd_bell_circuit_oracle():
    # Oracle: the ancilla pair ends in a basis state fixed by the two parities.
    for kind in BellKind:
        s = qs.tensor(kind.state(), PureState.basis("00"))
        for g, t in [(qs.CNOT, [0, 2]), (qs.CNOT, [1, 2]), (qs.H, [3]), (qs.CNOT, [3, 0]), (qs.CNOT, [3, 1]), (qs.H, [3])]:
            s = qs.apply_gate(s, g, t)
        probs = s.probabilities([2, 3])
        b1, b2 = kind.bits
        assert probs[(b2 << 1) | b1] == pytest.approx(1)


def test_chsh_phi_plus():
    assert vf.chsh_value(qs.PHI_PLUS) == pytest.approx(2 * math.sqrt(2), abs=1e-9)
    # Closed form: E = cos 2(a - b) for |Phi+>.
    a, a2, b, b2 = vf.CANONICAL_ANGLES
    e = lambda x, y: math.cos(2 * (x - y))  # noqa: E731
    assert vf.chsh_value(qs.PHI_PLUS) == pytest.approx(e(a, b) + e(a, b2) + e(a2, b) - e(a2, b2), abs=1e-12)


def test_chsh_product_state_brute_force():
    r = np.random.default_rng(0)
    angles = r.uniform(-np.pi, np.pi, size=(10_000, 4))
    best = max(abs(vf.chsh_value(PureState.basis("00"), q)) for q in angles)
    assert best <= 2 + 1e-9
    assert vf.chsh_value(PureState.basis("00")) == pytest.approx(math.sqrt(2))


def test_chsh_maximally_mixed():
    assert vf.chsh_value(qs.DensityMatrix.maximally_mixed(2)) == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("v", [0.0, 0.3, 1 / math.sqrt(2), 0.9, 1.0])
def test_chsh_werner_linear(v):
    assert vf.chsh_value(qs.werner_state(v)) == pytest.approx(2 * math.sqrt(2) * v, abs=1e-9)


def test_chsh_dimension():
    with pytest.raises(DimensionMismatch):
        vf.chsh_value(qs.KET_0)


def test_setting_probabilities_match_correlator(rng):
    for _ in range(5):
        s = qs.haar_state(2, rng)
        ta, tb = rng.random() * 3, rng.random() * 3
        p = vf.setting_probabilities(s, ta, tb)
        assert p[0] - p[1] - p[2] + p[3] == pytest.approx(vf.correlator(s, ta, tb), abs=1e-12)


def test_entangled_verify_ideal_and_fake(rng):
    good = vf.entangled_verify(vf.EntangledVerificationPair(qs.PHI_PLUS), "CHSH", 10_000, rng)
    assert good.verdict is vf.Verdict.Authentic
    assert abs(good.s_value - 2 * math.sqrt(2)) <= 3 * good.sigma
    fake = vf.entangled_verify(vf.EntangledVerificationPair(PureState.basis("00")), "CHSH", 10_000, rng)
    assert fake.verdict is vf.Verdict.TamperDetected and fake.s_value <= 2
    assert set(fake.to_dict()) == {"verdict", "s_value", "trials", "seed"}


def test_entangled_verify_too_few_trials(rng):
    with pytest.raises(TooFewTrials):
        vf.entangled_verify(vf.EntangledVerificationPair(qs.PHI_PLUS), "CHSH", 99, rng)


def test_werner_detection_boundary():
    assert vf.chsh_value(qs.werner_state(1 / math.sqrt(2))) == pytest.approx(2.0)
    r = SeededRng(3)
    hi = vf.entangled_verify(vf.EntangledVerificationPair(qs.werner_state(0.95)), "CHSH", 10_000, r)
    lo = vf.entangled_verify(vf.EntangledVerificationPair(qs.werner_state(0.6)), "CHSH", 10_000, r)
    assert hi.verdict is vf.Verdict.Authentic and lo.verdict is vf.Verdict.TamperDetected


def test_correlation_mode(rng):
    pair = vf.EntangledVerificationPair.from_coefficients([0.6, 0.8])
    res = vf.entangled_verify(pair, vf.VerifyMode.Correlation, 1000, rng)
    assert res.verdict is vf.Verdict.Authentic and res.correlation == 1.0
    k, wallet = vf.bank_measure(pair, rng)
    assert wallet == PureState.basis(str(k))
    noisy = vf.EntangledVerificationPair(qs.werner_state(0.5))
    assert vf.entangled_verify(noisy, "Correlation", 1000, rng).verdict is vf.Verdict.TamperDetected


def test_separable_substitutes_never_authentic():
    r = SeededRng(17)
    for _ in range(50):
        prod = qs.tensor(qs.haar_state(1, r), qs.haar_state(1, r))
        res = vf.entangled_verify(vf.EntangledVerificationPair(prod), "CHSH", 10_000, r)
        assert res.verdict is not vf.Verdict.Authentic
