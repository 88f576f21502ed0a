import pytest

from config import Settings, check_grid, deep_merge, get_settings, load_settings, update_settings
from errors import ValidationError


def test_defaults():
    settings = get_settings()
    assert settings == Settings()
    assert settings.grid_size == 4096
    assert settings.clark_n == 64
    assert settings.redis_url is None


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("HB_GRID", "1024")
    monkeypatch.setenv("HB_TAIL_TOL", "1e-6")
    monkeypatch.setenv("HB_PROGRESS", "true")
    settings = load_settings()
    assert settings.grid_size == 1024
    assert settings.tail_tol == 1e-6
    assert settings.progress is True


def test_bad_grid_from_environment(monkeypatch):
    monkeypatch.setenv("HB_GRID", "1000")
    with pytest.raises(ValidationError):
        load_settings()


def test_yaml_overrides(tmp_path):
    path = tmp_path / "hb.yaml"
    path.write_text("clark_n: 16\nstall_rtol: 0.01\n")
    settings = load_settings(str(path))
    assert settings.clark_n == 16
    assert settings.stall_rtol == 0.01
    assert settings.grid_size == 4096


def test_yaml_unknown_key(tmp_path):
    path = tmp_path / "hb.yaml"
    path.write_text("grid: 64\n")
    with pytest.raises(ValidationError) as exc:
        load_settings(str(path))
    assert exc.value.details['unknown'] == ['grid']


def test_update_settings():
    update_settings(taylor_degree=64)
    assert get_settings().taylor_degree == 64
    with pytest.raises(ValidationError):
        update_settings(clark_grid=12)
    with pytest.raises(ValidationError):
        update_settings(colour="red")


@pytest.mark.parametrize("M", [16, 4096, 2 ** 20])
def test_grid_sizes_accepted(M):
    assert check_grid(M) == M


@pytest.mark.parametrize("M", [8, 100, 2 ** 21])
def test_grid_sizes_rejected(M):
    with pytest.raises(ValidationError):
        check_grid(M)


def test_deep_merge():
    base = {'a': 1, 'nested': {'x': 1, 'y': 2}}
    merged = deep_merge(base, {'nested': {'y': 3}, 'b': 2})
    assert merged == {'a': 1, 'b': 2, 'nested': {'x': 1, 'y': 3}}
    assert base['nested']['y'] == 2
