"""Shared pytest plumbing for the acceptance suite.

Each acceptance check records one verdict through the ``acceptance``
fixture; the terminal-summary hook echoes every verdict after the run so
the pass/fail lines stay visible even with output capture enabled.
"""

import pytest

ACCEPTANCE_CRITERIA = (
    "gradient-finite-difference",
    "dbscan-reference-equivalence",
    "retrieval-metrics-reference",
    "memory-update-identities",
    "single-camera-shift-invariance",
    "classifier-variant-ordering",
    "camera-offset-gain",
    "subset-centroid-gain",
    "training-determinism",
    "sampler-contract",
)

_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    """Return a recorder: ``record(name, ok, detail)`` prints and asserts."""

    def record(name: str, ok: bool, detail: str = "") -> None:
        if name not in ACCEPTANCE_CRITERIA:
            raise ValueError(f"unknown acceptance criterion {name!r}")
        _RESULTS[name] = (bool(ok), detail)
        line = f"ACCEPTANCE[{name}]: {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f" ({detail})"
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in ACCEPTANCE_CRITERIA:
        if name in _RESULTS:
            ok, detail = _RESULTS[name]
            line = f"ACCEPTANCE[{name}]: {'PASS' if ok else 'FAIL'}"
            if detail:
                line += f" ({detail})"
        else:
            line = f"ACCEPTANCE[{name}]: NOT RUN"
        terminalreporter.write_line(line)
