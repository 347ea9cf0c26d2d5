import numpy as np
import pytest
from scipy.integrate import solve_ivp

from foloc.modalsim import LtiSystem, ForcedInput


def ode_response(sys: LtiSystem, forcing: ForcedInput, t, rtol=1e-10, atol=1e-12):
    """Zero-state output from adaptive RK45 integration of x' = Ax + Bu."""
    b = sys.B[:, forcing.input_index]

    def rhs(tt, x):
        return sys.A @ x + b * forcing.signal(tt)

    sol = solve_ivp(rhs, (t[0], t[-1]), np.zeros(sys.n_states), method="RK45",
                    t_eval=t, rtol=rtol, atol=atol)
    assert sol.success, sol.message
    return sys.C @ sol.y


def tuned_pair(sigma, omega, c=(1.0, 0.3)):
    """Two-state oscillator with eigenvalues -sigma +/- j omega."""
    A = np.array([[0.0, 1.0], [-(omega ** 2 + sigma ** 2), -2 * sigma]])
    return LtiSystem(A, [[0.0], [1.0]], [list(c)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_acceptance(label: str, ok: bool, detail: str) -> bool:
    line = f"{label}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0][3:])):
            terminalreporter.write_line(line)
