import pytest

from msk_pinn import config as C


def write(tmp_path, text):
    path = tmp_path / "exp.ini"
    path.write_text(text)
    return path


class TestLoad:
    def test_defaults_when_sections_missing(self, tmp_path):
        cfg = C.load_config(write(tmp_path, "[model]\nkind = ridge\n"), seed=3)
        assert cfg.model.kind == "ridge"
        assert cfg.simulator.preset == "wrist"
        assert cfg.schedule.max_iter == 1200
        assert cfg.schedule.seed == 3
        assert cfg.split.seed == 3

    def test_unknown_section_rejected(self, tmp_path):
        with pytest.raises(C.ConfigError, match="unknown config section"):
            C.load_config(write(tmp_path, "[optimizer]\nlr = 1\n"))

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(C.ConfigError, match="unknown key 'dropout'"):
            C.load_config(write(tmp_path, "[model]\ndropout = 0.5\n"))

    def test_bad_value_rejected(self, tmp_path):
        with pytest.raises(C.ConfigError, match="bad value"):
            C.load_config(write(tmp_path, "[schedule]\nmax_iter = soon\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(C.ConfigError, match="cannot read"):
            C.load_config(tmp_path / "absent.ini")

    def test_lists_parsed(self, tmp_path):
        cfg = C.load_config(write(
            tmp_path, "[experiment]\nseeds = 1,2,3\nfractions = 0.5,1.0\n"))
        assert cfg.experiment.seeds == (1, 2, 3)
        assert cfg.experiment.fractions == (0.5, 1.0)

    def test_unknown_preset(self, tmp_path):
        with pytest.raises(C.ConfigError, match="preset"):
            C.load_config(write(tmp_path, "[simulator]\npreset = elbow\n"))

    def test_fraction_bounds(self, tmp_path):
        with pytest.raises(C.ConfigError, match="fractions"):
            C.load_config(write(tmp_path, "[experiment]\nfractions = 0.0,1.0\n"))


class TestEcho:
    def test_round_trip(self, tmp_path):
        cfg = C.load_config(write(
            tmp_path, "[loss]\nphysics = 0.01\n[data]\nwindow = 50\n"), seed=7)
        echo = tmp_path / "resolved.ini"
        C.write_config(cfg, echo)
        back = C.load_config(echo, seed=7)
        assert back == cfg

    def test_echo_deterministic(self, tmp_path):
        cfg = C.build_config({}, seed=0)
        C.write_config(cfg, tmp_path / "a.ini")
        C.write_config(cfg, tmp_path / "b.ini")
        assert (tmp_path / "a.ini").read_bytes() == (tmp_path / "b.ini").read_bytes()
