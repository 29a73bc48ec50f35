from __future__ import annotations

import re
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from multiview.dataset import ShellParams, SyntheticSpec, generate_synthetic  # noqa: E402

TINY_SHELLS = (
    ShellParams(2, 2.0, 0.2, 1.0, 1.5),
    ShellParams(3, 2.0, 0.2, 1.0, 1.4),
    ShellParams(2, 3.0, 0.4, 1.0, 1.5),
)


def tiny_spec(per_class: int = 10, seed: int = 0) -> SyntheticSpec:
    return SyntheticSpec(class_count=3, per_class=per_class, image_side=32, shells=TINY_SHELLS,
                         color_noise_amplitude=40.0, seed=seed)


@pytest.fixture(scope="session")
def tiny_dataset():
    return generate_synthetic(tiny_spec())


# acceptance tests are named test_criterion_NN_<what>; collect one verdict per NN
_CRITERIA: dict[int, list[tuple[str, bool]]] = {}
_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA.setdefault(int(m.group(1)), []).append((m.group(2), report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        parts = _CRITERIA[n]
        failed = [name for name, ok in parts if not ok]
        verdict = "PASS" if not failed else "FAIL"
        detail = f" (failed: {', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {n:2d}: {verdict}  [{len(parts) - len(failed)}/{len(parts)} checks]{detail}")
