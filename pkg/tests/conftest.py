import numpy as np
import pytest

from cssnorm import grid as gr


@pytest.fixture(scope="session")
def grid128():
    return gr.make_grid(10.0, 128)


@pytest.fixture(scope="session")
def gauss128(grid128):
    return gr.sample(grid128, lambda x1, x2: np.exp(-(x1 ** 2 + x2 ** 2) / 2))


def gaussian(grid, sigma=1.0, center=(0.0, 0.0), aniso=(1.0, 1.0), amp=1.0):
    c1, c2 = center
    a1, a2 = aniso
    return gr.sample(
        grid,
        lambda x1, x2: amp * np.exp(-(((x1 - c1) / a1) ** 2 + ((x2 - c2) / a2) ** 2) / (2 * sigma ** 2)),
    )


def bump(grid, radius=1.0, center=(0.0, 0.0)):
    c1, c2 = center

    def f(x1, x2):
        q = ((x1 - c1) ** 2 + (x2 - c2) ** 2) / radius ** 2
        return np.where(q < 1, np.exp(-1.0 / np.maximum(1 - q, 1e-300)), 0.0)

    return gr.sample(grid, f)


def corpus(grid, size=10):
    """Gaussians plus shifted/anisotropic bumps (acceptance criterion 1)."""
    fields = [
        gaussian(grid, 1.0),
        gaussian(grid, 0.7, (0.5, -0.3)),
        gaussian(grid, 1.2, aniso=(1.0, 0.6)),
        gaussian(grid, 0.8, (-0.4, 0.4), (0.7, 1.3)),
        gaussian(grid, 1.5, amp=0.5),
        bump(grid, 2.5),
        bump(grid, 1.8, (0.6, 0.2)),
        bump(grid, 2.0, (-1.0, 0.5)),
        gaussian(grid, 0.9, (1.0, 1.0), (1.4, 0.8)),
        bump(grid, 3.0, (0.3, -0.7)),
    ]
    return fields[:size]


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
