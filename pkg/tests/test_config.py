import json

import pytest

from chime.config import PipelineConfig, load_config, make_backend, make_embedder
from chime.errors import InvalidInputError
from chime.llm import HashedBagOfWordsProvider, LiveChatBackend, ScriptedBackend


def test_defaults():
    config = load_config(env={})
    assert config == PipelineConfig()
    assert config.threshold == 0.7
    assert config.k == 4
    assert config.mt_enabled and config.cove_enabled


def test_file_layer(tmp_path):
    path = tmp_path / "chime.json"
    path.write_text(json.dumps({"threshold": 0.8, "k": 2, "backend_model": "m9"}))
    config = load_config(path, env={})
    assert (config.threshold, config.k, config.backend_model) == (0.8, 2, "m9")


def test_env_overrides_file(tmp_path):
    path = tmp_path / "chime.json"
    path.write_text(json.dumps({"threshold": 0.8}))
    config = load_config(path, env={"CHIME_THRESHOLD": "0.75", "CHIME_K": "6"})
    assert config.threshold == 0.75
    assert config.k == 6


def test_cli_overrides_env_and_file(tmp_path):
    path = tmp_path / "chime.json"
    path.write_text(json.dumps({"threshold": 0.8, "store_path": "file.db"}))
    config = load_config(
        path,
        env={"CHIME_THRESHOLD": "0.75", "CHIME_STORE_PATH": "env.db"},
        overrides={"threshold": 0.65, "store_path": None},
    )
    assert config.threshold == 0.65
    assert config.store_path == "env.db"


def test_bool_coercion():
    assert load_config(env={"CHIME_MT_ENABLED": "off"}).mt_enabled is False
    assert load_config(env={"CHIME_COVE_ENABLED": "1"}).cove_enabled is True
    with pytest.raises(InvalidInputError):
        load_config(env={"CHIME_MT_ENABLED": "perhaps"})


def test_numeric_coercion_errors():
    with pytest.raises(InvalidInputError):
        load_config(env={"CHIME_K": "four"})
    with pytest.raises(InvalidInputError):
        load_config(env={"CHIME_TEMPERATURE": "warm"})


def test_validation_bounds():
    with pytest.raises(InvalidInputError):
        PipelineConfig(threshold=0.0)
    with pytest.raises(InvalidInputError):
        PipelineConfig(threshold=1.0)
    with pytest.raises(InvalidInputError):
        PipelineConfig(k=0)
    with pytest.raises(InvalidInputError):
        PipelineConfig(temperature=-1.0)


def test_unknown_file_keys_rejected(tmp_path):
    path = tmp_path / "chime.json"
    path.write_text(json.dumps({"treshold": 0.8}))
    with pytest.raises(InvalidInputError, match="treshold"):
        load_config(path, env={})


def test_malformed_file_rejected(tmp_path):
    path = tmp_path / "chime.json"
    path.write_text("[1, 2]")
    with pytest.raises(InvalidInputError):
        load_config(path, env={})
    path.write_text("{broken")
    with pytest.raises(InvalidInputError):
        load_config(path, env={})
    with pytest.raises(InvalidInputError):
        load_config(tmp_path / "absent.json", env={})


def test_ablation_stages_follow_flags():
    assert PipelineConfig().ablation_stages() == ()
    assert PipelineConfig(cove_enabled=False).ablation_stages() == ("cove",)
    assert PipelineConfig(mt_enabled=False).ablation_stages() == ("mt",)
    assert PipelineConfig(cove_enabled=False, mt_enabled=False).ablation_stages() == (
        "cove",
        "mt",
    )


def test_make_backend_script(tmp_path):
    path = tmp_path / "script.json"
    path.write_text(json.dumps([{"match_key_source_text": "q", "response": "r"}]))
    backend = make_backend(PipelineConfig(backend_script=str(path)))
    assert isinstance(backend, ScriptedBackend)


def test_make_backend_missing_script(tmp_path):
    config = PipelineConfig(backend_script=str(tmp_path / "absent.json"))
    with pytest.raises(InvalidInputError):
        make_backend(config)


def test_make_backend_live_and_unconfigured():
    assert isinstance(
        make_backend(PipelineConfig(backend_url="http://llm.local/v1")), LiveChatBackend
    )
    with pytest.raises(InvalidInputError):
        make_backend(PipelineConfig())


def test_make_embedder_default():
    assert isinstance(make_embedder(PipelineConfig()), HashedBagOfWordsProvider)
