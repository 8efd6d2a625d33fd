import numpy as np
import pytest

from atomchip_sta.chip_model import z_wire
from atomchip_sta.config import (CONFIG_ENV, parse_config, parse_config_text, preset_path, read_sections,
                                 resolve_config_path)
from atomchip_sta.constants import GAUSS, MM, MS
from atomchip_sta.errors import ParseError, ValidationError


def test_preset_values():
    chip, species, d = parse_config(preset_path())
    assert len(chip.segments) == 3
    assert [s.current for s in chip.segments] == [5.0] * 3
    assert [s.length for s in chip.segments] == pytest.approx([16 * MM, 4 * MM, 16 * MM])
    np.testing.assert_array_equal(chip.bias_direction, [0, 1, 0])
    assert chip == z_wire()
    assert species.a_s == pytest.approx(98 * 5.29177210903e-11)
    assert d.ramp_time == pytest.approx(75 * MS)
    assert d.bias_start == pytest.approx(21.5 * GAUSS)
    assert d.lens_frequencies == (1.7, 7.2, 7.2)


def test_empty_file_is_parse_error(tmp_path):
    p = tmp_path / "empty.cfg"
    p.write_text("")
    with pytest.raises(ParseError) as exc:
        parse_config(p)
    assert exc.value.line == 1 and exc.value.column == 1


def test_negative_bias_rejected():
    with pytest.raises(ValidationError):
        parse_config_text("[chip]\nbias_G = -1\n")


def test_unknown_key_located():
    with pytest.raises(ParseError) as exc:
        parse_config_text("[chip]\n  bias_gauss = 3\n")
    assert exc.value.line == 2
    assert exc.value.column == 3
    assert "bias_gauss" in str(exc.value)


def test_unknown_section_and_bad_value():
    with pytest.raises(ParseError):
        parse_config_text("[wires]\nn = 1\n")
    with pytest.raises(ParseError) as exc:
        parse_config_text("[chip]\ncurrent_A = five\n")
    assert exc.value.line == 2


def test_syntax_errors():
    with pytest.raises(ParseError):
        parse_config_text("current_A = 5\n")
    with pytest.raises(ParseError):
        parse_config_text("[chip]\nbias_G = 1\nbias_G = 2\n")


def test_missing_sections_take_defaults():
    chip, species, d = parse_config_text("[chip]\nbias_G = 10\n")
    assert chip.bias_magnitude == pytest.approx(10 * GAUSS)
    assert d.dkc_hold == pytest.approx(31.4 * MS)


def test_segment_layout():
    text = ("[chip]\nlayout = segments\nbias_G = 20\nbias_axis = -y\n"
            "[segment.1]\nstart_mm = -2, 0, 0\nend_mm = 2, 0, 0\ncurrent_A = 3\n")
    chip, _, _ = parse_config_text(text)
    assert len(chip.segments) == 1 and chip.segments[0].current == 3.0
    np.testing.assert_array_equal(chip.bias_direction, [0, -1, 0])
    with pytest.raises(ValidationError):
        parse_config_text("[chip]\nlayout = segments\n")


def test_validation_messages():
    with pytest.raises(ValidationError):
        parse_config_text("[tables]\nbias_min_G = 5\nbias_max_G = 4\n")
    with pytest.raises(ValidationError):
        parse_config_text("[dkc]\nlens_Hz = 1, 2\n")
    with pytest.raises(ValidationError):
        parse_config_text("[chip]\nbias_axis = w\n")


def test_inline_comments():
    s = read_sections("[chip]\nbias_G = 12 ; tighter\n")
    assert s["chip"]["bias_G"] == 12.0


def test_resolution_order(tmp_path, monkeypatch):
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    assert resolve_config_path() == preset_path()
    env = tmp_path / "env.cfg"
    monkeypatch.setenv(CONFIG_ENV, str(env))
    assert resolve_config_path() == env
    assert resolve_config_path("x.cfg").name == "x.cfg"


def test_missing_file():
    with pytest.raises(ParseError):
        parse_config("/nonexistent/file.cfg")
