import pytest

from funcspace import Poly
from dbr_rational import mate
from cyclicity import certify_rational
from presets import PresetManager
from report import TABLE_COLUMNS, ReportBuilder


@pytest.fixture
def certificate():
    return certify_rational(Poly([1, 1]), mate(Poly([0.5, 0.5])), [0, 2, 4, 8])


class TestReportBuilder:
    def test_table_from_certificate(self, certificate):
        table = ReportBuilder.convergence_table(certificate)
        assert list(table.columns) == TABLE_COLUMNS
        assert table['degree'].tolist() == [0, 2, 4, 8]

    def test_table_from_result_dict(self, certificate):
        table = ReportBuilder.convergence_table(certificate.to_dict())
        assert len(table) == 4

    def test_certificate_report(self, certificate):
        text = ReportBuilder().generate_report('certify', certificate.to_dict())
        assert "CERTIFICATE (rational, equivalent norm)" in text
        assert "Verdict: converging" in text

    def test_generic_report(self):
        text = ReportBuilder().generate_report('witness', {'point': [1.0, 0.0], 'bound': 1.5})
        assert "bound: 1.5" in text

    def test_history(self, tmp_path, certificate):
        builder = ReportBuilder()
        builder.record('certify', certificate.to_dict())
        builder.record('mate', {'N': 1})
        summary = builder.summary()
        assert summary['total_runs'] == 2
        assert summary['verdicts'] == {'converging': 1}

        path = str(tmp_path / "history.json")
        builder.save_history(path)
        other = ReportBuilder()
        other.load_history(path)
        assert len(other.history) == 2


class TestPresets:
    def test_builtins(self, tmp_path):
        manager = PresetManager(str(tmp_path / "presets"))
        assert manager.get_preset('half_z')['spec']['kind'] == 'rational'
        spaces = manager.list_presets('space')
        assert {'half_z', 'half_singular'} <= {p['id'] for p in spaces}
        assert all(p['category'] == 'space' for p in spaces)

    def test_custom_preset(self, tmp_path):
        manager = PresetManager(str(tmp_path / "presets"))
        manager.save_preset('two', {'name': 'f = 2', 'description': '', 'category': 'function',
                                    'spec': {'type': 'poly', 'coeffs': [2]}})
        assert manager.get_preset('two')['spec']['coeffs'] == [2]
        assert 'two' in {p['id'] for p in manager.list_presets('function')}
        manager.delete_preset('two')
        assert manager.get_preset('two') is None

    def test_apply_settings(self, tmp_path):
        manager = PresetManager(str(tmp_path / "presets"))
        merged = manager.apply_preset('kernel_half_singular', {'clark_n': 8, 'grid_size': 4096})
        assert merged == {'clark_n': 128, 'grid_size': 4096}
        assert manager.apply_preset('missing', {'a': 1}) == {'a': 1}

    def test_export_defaults(self, tmp_path):
        manager = PresetManager(str(tmp_path / "presets"))
        assert not (tmp_path / "presets").exists()
        paths = manager.export_defaults()
        assert len(paths) == len(manager.default_presets)
        assert (tmp_path / "presets" / "half_z.yaml").exists()
        other = PresetManager(str(tmp_path / "presets"))
        assert len(other.list_presets()) == len(manager.default_presets)
