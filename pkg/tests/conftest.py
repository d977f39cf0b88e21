import json
from pathlib import Path

import httpx
import pytest

from feedutil import atom_entry, atom_feed, summary_json
from litsieve.config import InputQuery, PipelineConfig
from litsieve.llm import FixtureLlmClient

FIXTURES = Path(__file__).parent / "fixtures"
OFFLINE = FIXTURES / "offline"


@pytest.fixture
def query():
    return InputQuery((OFFLINE / "title.txt").read_text().strip(),
                      (OFFLINE / "abstract.txt").read_text().strip())


@pytest.fixture
def fast_config(tmp_path):
    return PipelineConfig(provider_id="tfidf", request_delay_ms=0,
                          output_dir=tmp_path / "out", cache_dir=tmp_path / "cache")


@pytest.fixture
def offline_llm():
    return FixtureLlmClient(json.loads((OFFLINE / "llm.json").read_text()))


class FakeServices:
    """One httpx MockTransport standing in for arXiv, the LLM and the
    embedding service. Serves the offline fixture directory."""

    LLM_URL = "https://llm.test/v1/chat/completions"
    EMBED_URL = "https://embed.test/{provider}"

    def __init__(self, root: Path = OFFLINE):
        self.root = root
        self.llm = json.loads((root / "llm.json").read_text())
        self.calls: list[str] = []

    def _llm_answer(self, prompt: str) -> str:
        if "search keywords" in prompt:
            return self.llm["keywords"]
        if '"summary"' in prompt and "Return the corrected" not in prompt:
            return self.llm["summarize"]
        if "citation intent" in prompt:
            return self.llm["intent"]
        if "primary contribution" in prompt:
            return self.llm["contribution"]
        return self.llm["review"]

    def __call__(self, request: httpx.Request) -> httpx.Response:
        from litsieve.transport import OfflineTransport

        self.calls.append(str(request.url))
        if request.url.host == "llm.test":
            prompt = json.loads(request.content)["messages"][0]["content"]
            return httpx.Response(200, json={"choices": [
                {"message": {"content": self._llm_answer(prompt)}, "finish_reason": "stop"}]})
        if request.url.host == "embed.test":
            texts = json.loads(request.content)["texts"]
            return httpx.Response(200, json={"vectors": [fake_vector(t) for t in texts]})
        return OfflineTransport(self.root).handle_request(request)


def fake_vector(text: str, dim: int = 384) -> list[float]:
    """Deterministic bag-of-hashed-words vector, a stand-in for a sentence encoder."""
    import zlib

    v = [0.0] * dim
    for w in text.lower().split():
        v[zlib.crc32(w.encode()) % dim] += 1.0
    v[0] += 1e-3
    return v


@pytest.fixture
def services():
    return FakeServices()


__all__ = ["atom_entry", "atom_feed", "summary_json"]


# -- acceptance reporting: one line per criterion ---------------------------

_ACCEPTANCE: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): exit criterion of the build")


def pytest_runtest_logreport(report):
    marker = report.keywords.get("acceptance")
    if marker is None:
        return
    label = report.acceptance_label if hasattr(report, "acceptance_label") else report.nodeid
    if report.when == "call" or report.failed:
        if report.failed or _ACCEPTANCE.get(label) != "FAIL":
            _ACCEPTANCE[label] = "FAIL" if report.failed else ("PASS" if report.passed else "SKIP")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("acceptance")
    if m is not None:
        outcome.get_result().acceptance_label = m.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, status in _ACCEPTANCE.items():
        terminalreporter.write_line(f"[{status}] {label}")
