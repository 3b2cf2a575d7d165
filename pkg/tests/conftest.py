import numpy as np
import pytest

from ettd import kernels
from ettd.forge import forge_corpus, synthesize_sources

BACKENDS = kernels.available_backends()


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    return BACKENDS[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gradient_image(w, h):
    ys, xs = np.mgrid[0:h, 0:w]
    img = np.stack([xs * 7 % 256, ys * 11 % 256, (xs + ys) * 5 % 256], axis=-1)
    return img.astype(np.uint8)


@pytest.fixture(scope="session")
def forged_corpus(tmp_path_factory):
    """20 forged + 6 authentic records on synthetic cards."""
    out = tmp_path_factory.mktemp("corpus")
    sources = synthesize_sources(6, seed=3)
    records, summary = forge_corpus(sources, out, 20, 6, "mixed", True, seed=7)
    return out, records, summary


_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker.args
    ok = report.passed and _ACCEPTANCE.get(number, (title, True))[1]
    _ACCEPTANCE[number] = (title, ok)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}")
