import subprocess
import sys

import pytest

from litsieve.cache import StageCache, cache_key, canonical_json
from litsieve.config import InputQuery, PipelineConfig, load_config
from litsieve.errors import ConfigInvalid


class TestConfig:
    def test_defaults(self):
        cfg = load_config(None, env={})
        assert (cfg.keyword_min, cfg.keyword_max, cfg.max_per_keyword, cfg.iqr_multiplier,
                cfg.request_delay_ms) == (5, 10, 20, 0.5, 3000)
        assert cfg.llm_model_id == "gemini-2.0-flash"

    def test_missing_file_uses_defaults(self, tmp_path):
        assert load_config(tmp_path / "nope.yaml", env={}) == PipelineConfig()

    def test_precedence(self, tmp_path):
        f = tmp_path / "c.yaml"
        f.write_text("iqr_multiplier: 0.5\nmax_per_keyword: 7\nkeyword_max: 8\n")
        env = {"LITSIEVE_MAX_PER_KEYWORD": "9", "LITSIEVE_KEYWORD_MAX": "9"}
        cfg = load_config(f, env=env, overrides={"iqr_multiplier": 1.5, "keyword_max": None})
        assert cfg.iqr_multiplier == 1.5      # flag beats file
        assert cfg.max_per_keyword == 9       # env beats file
        assert cfg.keyword_max == 9           # unset flag leaves env value

    def test_invalid_range(self):
        with pytest.raises(ConfigInvalid) as exc:
            load_config(None, env={}, overrides={"keyword_min": 12, "keyword_max": 10})
        assert exc.value.field == "keyword_max"

    @pytest.mark.parametrize("field, value", [
        ("iqr_multiplier", -0.1), ("max_per_keyword", 0), ("keyword_min", 0),
        ("iqr_multiplier", "abc"), ("max_per_keyword", 2.5),
    ])
    def test_invalid_values(self, field, value):
        with pytest.raises(ConfigInvalid):
            load_config(None, env={}, overrides={field: value})

    def test_secrets_only_from_env(self, tmp_path):
        f = tmp_path / "c.yaml"
        f.write_text("llm_api_key: sk-123\n")
        with pytest.raises(ConfigInvalid):
            load_config(f, env={})
        cfg = load_config(None, env={"LLM_API_KEY": "sk-1", "LLM_API_URL": "https://x"})
        assert cfg.llm_api_key == "sk-1" and cfg.llm_api_url == "https://x"
        assert "sk-1" not in repr(cfg)

    def test_unknown_field(self, tmp_path):
        f = tmp_path / "c.json"
        f.write_text('{"bogus": 1}')
        with pytest.raises(ConfigInvalid):
            load_config(f, env={})

    def test_bool_env(self):
        assert load_config(None, env={"LITSIEVE_FETCH_PDFS": "false"}).fetch_pdfs is False


@pytest.mark.parametrize("title, abstract", [("T", ""), ("", "A"), ("  ", "A"), ("T", " \n")])
def test_input_query_rejects_blank(title, abstract):
    with pytest.raises(ValueError):
        InputQuery(title, abstract)


class TestCacheKey:
    def test_deterministic(self):
        assert cache_key("fetch", b"payload") == cache_key("fetch", b"payload")

    def test_one_byte_differs(self):
        assert cache_key("fetch", b"payloaa") != cache_key("fetch", b"payload")

    def test_stage_in_key(self):
        assert cache_key("a", b"x") != cache_key("b", b"x")

    def test_canonical_dict(self):
        assert cache_key("s", {"b": 1, "a": [1, 2]}) == cache_key("s", {"a": [1, 2], "b": 1})
        assert canonical_json({"b": 1, "a": 2}) == b'{"a":2,"b":1}'

    def test_stable_across_processes(self):
        code = "from litsieve.cache import cache_key; print(cache_key('embed', {'x': [1, 'é']}))"
        keys = {subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                               check=True, env={"PYTHONHASHSEED": str(seed),
                                                "PATH": ""}).stdout.strip()
                for seed in (1, 2)}
        assert keys == {cache_key("embed", {"x": [1, "é"]})}


def test_stage_cache_layout(tmp_path):
    c = StageCache(tmp_path)
    key = cache_key("fetch", b"u")
    assert c.get("fetch", key) is None
    c.put("fetch", key, b"data")
    assert (tmp_path / "fetch" / key).read_bytes() == b"data"
    assert c.get("fetch", key) == b"data"
    assert (c.hits, c.misses) == (1, 1)


def test_disabled_cache():
    c = StageCache(None)
    c.put("x", "k", b"d")
    assert c.get("x", "k") is None
