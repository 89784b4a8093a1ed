import numpy as np
import pytest

from qmint.rng import SeededRng


@pytest.fixture
def rng():
    return SeededRng(20241016)


def full_operator(single, target, n):
    """Oracle: embed a 1-qubit matrix on ``target`` by explicit Kronecker products."""
    ops = [np.eye(2)] * n
    ops[target] = single
    out = np.array([[1.0]])
    for op in ops:
        out = np.kron(out, op)
    return out


def cnot_operator(control, target, n):
    """Oracle: CNOT as a permutation matrix over basis indices."""
    d = 2**n
    m = np.zeros((d, d))
    for i in range(d):
        bits = [(i >> (n - 1 - k)) & 1 for k in range(n)]
        if bits[control]:
            bits[target] ^= 1
        j = sum(b << (n - 1 - k) for k, b in enumerate(bits))
        m[j, i] = 1
    return m


ACCEPTANCE_LINES: list[str] = []


def acceptance(label: str, ok: bool, detail: str) -> bool:
    line = f"{label} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
