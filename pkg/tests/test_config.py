import pytest

from ettd.config import Config, load_config
from ettd.errors import ConfigError


def test_defaults():
    cfg = load_config(None)
    assert (cfg.filter_threshold, cfg.classify_max_ed, cfg.iou_threshold) == (0.8, 3, 0.5)
    assert cfg.temperature == 0.0 and cfg.concurrency == 4 and cfg.solver_tol == 1e-3


def test_load_ini(tmp_path):
    (tmp_path / "v.txt").write_text("a 1 2\n")
    (tmp_path / "cfg.ini").write_text(
        "[annotator]\nendpoint = http://localhost:9/v1\nmodel_id = m\nconcurrency = 2\n"
        "[metrics]\nvectors = v.txt\nclassify_max_ed = 5\n"
        "[filter]\nthreshold = 0.9\n"
        "[solver]\ntol = 1e-4\n"
    )
    cfg = load_config(tmp_path / "cfg.ini")
    assert cfg.endpoint == "http://localhost:9/v1" and cfg.model_id == "m" and cfg.concurrency == 2
    assert cfg.vectors == str((tmp_path / "v.txt").resolve())
    assert (cfg.classify_max_ed, cfg.filter_threshold, cfg.solver_tol) == (5, 0.9, 1e-4)


@pytest.mark.parametrize("body", [
    "[nope]\nx = 1\n",
    "[annotator]\ncolour = red\n",
    "[annotator]\nconcurrency = many\n",
    "[annotator]\nconcurrency = 0\n",
    "[filter]\nthreshold = 1.5\n",
    "[metrics]\nvectors = missing.txt\n",
    "not ini at all",
])
def test_bad_configs(tmp_path, body):
    (tmp_path / "cfg.ini").write_text(body)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "cfg.ini")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


def test_override_ignores_none():
    cfg = Config().override(model_id=None, concurrency=8)
    assert cfg.model_id == "gpt-4o" and cfg.concurrency == 8
