import logging

import numpy as np
import pytest

from dipole_jumps.cli import ConfigError, main, parse_config
from dipole_jumps.liouville import build_superoperator, load_liouvillian
from dipole_jumps.model import SystemSpec
from dipole_jumps.rates import SWEEP_COLUMNS

HG_CFG = """\
# Hg+ reference parameters
scheme = two_d
A_1 = 1
A_2 = 1
A_3 = 4e8
omega_3 = 5e7
delta_3 = 0
"""


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    lines = open(path).read().splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    cols = header[-1][2:].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines if not ln.startswith("#")])
    return header, dict(zip(cols, data.T))


# parsing


def test_reference_config_parses_to_spec():
    cfg = parse_config(HG_CFG)
    ref = SystemSpec.two_d(A1=1, A2=1, A3=4e8, omega3=5e7, delta3=0, r=1.0)
    assert cfg.spec == ref
    assert cfg.mode == "rates"


def test_missing_window_defaults_with_notice(caplog):
    with caplog.at_level(logging.INFO, logger="dipole_jumps"):
        cfg = parse_config(HG_CFG)
    assert cfg.delta_T_DJ == 1e-3
    assert "delta_T_DJ" in caplog.text


def test_negative_rate_names_constraint():
    with pytest.raises(ConfigError, match=r"line 2: .*A_3 must be >= 0"):
        parse_config("scheme = two_d\nA_3 = -1\n")


@pytest.mark.parametrize(
    "text,pattern",
    [
        ("scheme = two_d\nA_33 = 1\n", r"line 2: unknown key 'A_33'"),
        ("scheme = two_d\nomga_3 = 1\n", r"line 2: unknown key"),
        ("scheme = two_d\nA_1 = one\n", r"line 2: malformed value for A_1"),
        ("scheme = two_d\nA_1 = 1\nA_1 = 2\n", r"line 3: duplicate key"),
        ("A_1 = 1\n", r"missing required key 'scheme'"),
        ("scheme = three_d\n", r"line 1: scheme must be"),
        ("scheme = two_d\nA_4 = 1\n", r"line 2: A_4 is not a transition"),
        ("scheme = two_d\nW = 1\n", r"line 2: W is only defined"),
        ("scheme = two_d\njust text\n", r"line 2: expected 'key = value'"),
        ("scheme = two_d\nmode = sweep\nr_min = 0\n", r"line 3: r_min must be > 0"),
        ("scheme = two_d\nn_points = 0\n", r"line 2: n_points"),
        ("scheme = two_d\nmode = trajectory\nduration = 0\n", r"line 3: duration must be > 0"),
        ("scheme = two_d\nthreshold_low = 1\n", r"line 2: threshold_low and threshold_high"),
        ("scheme = two_d\nzero_coupling = maybe\n", r"line 2: malformed"),
    ],
)
def test_config_errors_carry_line_numbers(text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        parse_config(text)


def test_comments_and_blank_lines_ignored():
    cfg = parse_config("\n# comment\nscheme = four_level  # trailing\n\nW = 2\n")
    assert cfg.spec.lamp_W == 2.0
    assert cfg.spec.rabi_omega3 == pytest.approx(0.5 * np.sqrt(np.sqrt(5) - 1) * 4e8)


def test_distance_in_wavelength_units():
    cfg = parse_config("scheme = two_d\nr = 2.5\nlambda_3 = 2\n")
    assert cfg.spec.distance_r == 5.0


# exit codes


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["--config", write(tmp_path, "scheme = two_d\nfoo = 1\n")]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["--config", str(tmp_path / "missing.cfg")]) == 2


def test_validate_passes_at_reference_parameters(tmp_path, capsys):
    assert main(["--config", write(tmp_path, HG_CFG), "--mode", "validate"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "ALL PASS" in out


def test_validate_detects_corrupted_reset(tmp_path, capsys):
    assert main(["--config", write(tmp_path, HG_CFG + "fault = reset_sign\n"), "--mode", "validate"]) == 1
    out = capsys.readouterr().out
    assert "FAIL trace preservation" in out


@pytest.mark.parametrize("placement", ["paper", "transition_42"])
def test_validate_four_level_both_placements(tmp_path, capsys, placement):
    path = write(tmp_path, "scheme = four_level\n")
    assert main(["--config", path, "--mode", "validate", "--c2-placement", placement]) == 0
    assert "ALL PASS" in capsys.readouterr().out


# sweeps


def test_sweep_is_deterministic_and_well_formed(tmp_path):
    cfg = write(tmp_path, HG_CFG + "mode = sweep\nr_min = 1\nr_max = 2\nn_points = 11\n")
    a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    assert main(["--config", cfg, "--out", a]) == 0
    assert main(["--config", cfg, "--out", b]) == 0
    assert open(a, "rb").read() == open(b, "rb").read()
    header, cols = read_csv(a)
    assert tuple(cols) == SWEEP_COLUMNS
    assert "# delta_T_DJ_used = 0.001" in header
    assert "# A_3 = 400000000.0" in header
    assert len(cols["r_over_lambda3"]) == 11
    assert 0.20 <= np.abs(cols["rel_dev_nDJ"]).max() <= 0.40
    assert np.allclose(cols["p21_indep"], 2 * 2.5e15 / (1.6e17 + 5e15), rtol=1e-9)


def test_sweep_zero_coupling_flag(tmp_path):
    cfg = write(tmp_path, HG_CFG + "mode = sweep\nn_points = 7\nzero_coupling = true\n")
    out = str(tmp_path / "z.csv")
    assert main(["--config", cfg, "--out", out]) == 0
    _, cols = read_csv(out)
    assert np.all(cols["rel_dev_p21"] == 0) and np.all(cols["rel_dev_nDJ"] == 0)


def test_four_level_deviation_at_one_wavelength(tmp_path):
    out = str(tmp_path / "f.csv")
    assert main(["--config", write(tmp_path, "scheme = four_level\nr = 1\n"), "--out", out]) == 0
    _, cols = read_csv(out)
    assert abs(cols["rel_dev_p21"][0]) <= 0.02


def test_log_spacing_and_scale_flag(tmp_path):
    cfg = write(tmp_path, HG_CFG + "mode = sweep\nr_min = 1\nr_max = 100\nn_points = 3\nspacing = log\n")
    out = str(tmp_path / "s.csv")
    assert main(["--config", cfg, "--out", out, "--scale-kappa", "1e4"]) == 0
    header, cols = read_csv(out)
    assert np.allclose(cols["r_over_lambda3"], [1, 10, 100])
    assert "# scale_kappa_used = 10000.0" in header
    assert cols["p01"][0] == pytest.approx(2e4)


def test_small_distance_warning(tmp_path, caplog):
    with caplog.at_level(logging.WARNING, logger="dipole_jumps"):
        assert main(["--config", write(tmp_path, HG_CFG + "r = 0.05\n"), "--out", str(tmp_path / "o.csv")]) == 0
    assert "k_3 r" not in caplog.text and "k_2 r" in caplog.text


def test_subradiant_distance_is_refused(tmp_path, capsys):
    # at r = 0.01 lambda_3 the antisymmetric states barely decay: more than three zero modes
    assert main(["--config", write(tmp_path, HG_CFG + "r = 0.01\n"), "--out", str(tmp_path / "o.csv")]) == 2
    assert "zero modes" in capsys.readouterr().err


# other modes


def test_describe_lists_basis(tmp_path, capsys):
    assert main(["--config", write(tmp_path, HG_CFG), "--mode", "describe"]) == 0
    out = capsys.readouterr().out
    assert "# dim 9" in out
    assert "g,0,S2" in out and "e2,1,S0" in out and "s12,3,S1" in out


def test_dump_liouvillian(tmp_path):
    path = str(tmp_path / "L.txt")
    assert main(["--config", write(tmp_path, HG_CFG), "--out", str(tmp_path / "r.csv"),
                 "--dump-liouvillian", path]) == 0
    ref = build_superoperator(SystemSpec.two_d(r=1.0)).full
    assert np.array_equal(load_liouvillian(path), ref)


def test_trajectory_mode_writes_records(tmp_path):
    text = "scheme = two_d\nA_1 = 1\nA_2 = 20\nA_3 = 2e4\nomega_3 = 1e4\nr = 50\nmode = trajectory\nduration = 2\n"
    cfg = write(tmp_path, text)
    out = str(tmp_path / "t.csv")
    assert main(["--config", cfg, "--out", out, "--seed", "3"]) == 0
    first = open(out).read()
    assert first.startswith("time_s,channel_id,label\n")
    assert open(out + ".periods.csv").read().startswith("class,start_s,end_s\n")
    assert main(["--config", cfg, "--out", out, "--seed", "3"]) == 0
    assert open(out).read() == first
