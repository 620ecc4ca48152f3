import orjson
import pytest

from subreg_kit.utils.core.loader import ConfigLoader


def test_yaml_exponents_are_floats(tmp_path):
    path = tmp_path / "settings.yaml"
    path.write_text("tol_act: 1e-7\nmesh_n: 50\ndelta_sweep: [0.1, 0.01]\n", encoding="utf-8")
    config = ConfigLoader.load_config(path)
    assert config.tol_act == 1e-7
    assert config.mesh_n == 50
    assert config.delta_sweep == (0.1, 0.01)


def test_json_config(tmp_path):
    path = tmp_path / "settings.json"
    path.write_bytes(orjson.dumps({"seed": 9, "blocks": ["zeta"]}))
    config = ConfigLoader.load_config(path)
    assert config.seed == 9
    assert config.blocks == ("zeta",)


def test_overrides_win_and_none_is_ignored(tmp_path):
    path = tmp_path / "settings.yaml"
    path.write_text("seed: 1\nmesh_n: 50\n", encoding="utf-8")
    config = ConfigLoader.load_config(path, {"seed": 5, "mesh_n": None})
    assert config.seed == 5
    assert config.mesh_n == 50


def test_unknown_key(tmp_path):
    path = tmp_path / "settings.yaml"
    path.write_text("mesh_size: 50\n", encoding="utf-8")
    with pytest.raises(ValueError, match="Invalid configuration"):
        ConfigLoader.load_config(path)


def test_invalid_value_is_rejected():
    with pytest.raises(ValueError):
        ConfigLoader.from_mapping({"mesh_n": 0})


@pytest.mark.parametrize("name", ["mesh_n", "counterexample_mesh_n"])
def test_single_interval_mesh_is_rejected(name):
    with pytest.raises(ValueError, match=f"{name} must be at least 2"):
        ConfigLoader.from_mapping({name: 1})


def test_two_interval_mesh_is_accepted():
    assert ConfigLoader.from_mapping({"mesh_n": 2}).mesh_n == 2


@pytest.mark.parametrize(
    "name, content",
    [("broken.yaml", "a: [1, 2\n"), ("broken.json", "{not json"), ("list.yaml", "- 1\n")],
)
def test_malformed_files(tmp_path, name, content):
    path = tmp_path / name
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ValueError):
        ConfigLoader.load_mapping(path)


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("", encoding="utf-8")
    assert ConfigLoader.load_config(path).mesh_n == 200
