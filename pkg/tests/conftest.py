import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


@pytest.fixture(scope="session")
def paulis():
    return SX, SY, SZ


def random_unit_vector(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def assert_close(a, b, atol, what=""):
    err = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
    assert err <= atol, f"{what} max error {err:.3e} > {atol:.1e}"


TWO_PI = 2 * math.pi


# acceptance ledger: every check is recorded, one summary line per criterion is printed
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def record(criterion: int, label: str, ok: bool, detail: str = "") -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((label, bool(ok), detail))
    print(f"[criterion {criterion}] {'PASS' if ok else 'FAIL'} {label}: {detail}")
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[crit]
        ok = all(p[1] for p in parts)
        tr.write_line(f"criterion {crit:2d}: {'PASS' if ok else 'FAIL'}")
        for label, passed, detail in parts:
            tr.write_line(f"    {'pass' if passed else 'FAIL'}  {label}: {detail}")
