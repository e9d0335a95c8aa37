import filecmp
import json

from hypcoords.cli import main

from conftest import HENON_FIXTURE

HENON_ARGS = [
    "--map", "henon", "--a", "1.4", "--b", "0.3",
    "--x0", repr(float(HENON_FIXTURE[0])), "--y0", repr(float(HENON_FIXTURE[1])),
]


def run(argv):
    return main([str(a) for a in argv])


def test_orbit_command(tmp_path):
    assert run(["orbit", *HENON_ARGS, "--k", "6", "--out-dir", tmp_path]) == 0
    lines = (tmp_path / "orbit.csv").read_text().splitlines()
    assert lines[0] == "i,x,y,j11,j12,j21,j22,log_norm,log_conorm,log_absdet"
    assert len(lines) == 8  # header + 7 rows
    first = lines[1].split(",")
    assert first[0] == "0" and float(first[1]) == float(HENON_FIXTURE[0])


def test_frames_command(tmp_path):
    assert run(["frames", *HENON_ARGS, "--k", "6", "--out-dir", tmp_path]) == 0
    lines = (tmp_path / "frames.csv").read_text().splitlines()
    assert len(lines) == 7
    assert lines[0].startswith("k,e_x,e_y,f_x,f_y,")


def test_certify_henon(tmp_path, capsys):
    code = run(["certify", *HENON_ARGS, "--k", "20", "--flavor", "II", "--eta", "1.05",
                "--out-dir", tmp_path])
    assert code == 0
    assert (tmp_path / "ledger.txt").exists()
    report = json.loads((tmp_path / "certificate.json").read_text())
    assert report["verdict"] is True
    assert report["flavor"] == "II"


def test_certify_rotation_fails_with_named_inequality(tmp_path, capsys):
    code = run(["certify", "--map", "linear", "--matrix", "0,1,-1,0",
                "--x0", "0.1", "--y0", "0", "--k", "5", "--flavor", "II",
                "--out-dir", tmp_path])
    assert code == 1
    err = capsys.readouterr().err
    assert "c < 1" in err


def test_aux_constants_command(tmp_path, capsys):
    code = run(["aux-constants", *HENON_ARGS, "--k", "12", "--flavor", "II",
                "--out-dir", tmp_path])
    assert code == 0
    payload = json.loads((tmp_path / "aux_constants.json").read_text())
    assert payload["K1"] > 0 and payload["K2"] > 0
    assert payload["Q1"] is None  # type-(I) branch undefined for a II ledger
    assert payload["branches"] == ["II"]
    out = capsys.readouterr().out
    assert "K2 = " in out


def test_verify_convergence_command(tmp_path):
    code = run(["verify-convergence", *HENON_ARGS, "--k", "10", "--flavor", "II",
                "--out-dir", tmp_path])
    assert code == 0
    for stem in ("apriori_convergence", "explicit_convergence"):
        assert (tmp_path / f"{stem}.csv").exists()
        payload = json.loads((tmp_path / f"{stem}.json").read_text())
        assert payload["verdict"] is True


def test_verify_variation_command(tmp_path):
    code = run(["verify-variation", *HENON_ARGS, "--k", "6", "--flavor", "II",
                "--h", "1e-5", "--out-dir", tmp_path])
    assert code == 0
    payload = json.loads((tmp_path / "slow_variation.json").read_text())
    assert payload["verdict"] is True
    assert "frame_derivative_master_bound" in payload["checks"]


def test_foliate_command(tmp_path):
    code = run(["foliate", "--map", "henon", "--a", "1.4", "--b", "0.3",
                "--k", "1", "--rect=-0.5,0.5,-0.3,0.3", "--spacing", "0.25",
                "--field", "stable", "--length", "0.1", "--step", "0.002",
                "--out-dir", tmp_path])
    assert code == 0
    assert (tmp_path / "curves.csv").read_text().startswith("curve_id,s,x,y")
    svg = (tmp_path / "curves.svg").read_text()
    assert svg.startswith("<svg") and "<polyline" in svg


def test_oracle_check_command(tmp_path):
    code = run(["oracle-check", "--seed", "7", "--trials", "50", "--grid-n", "20001",
                "--out-dir", tmp_path])
    assert code == 0
    payload = json.loads((tmp_path / "oracle_check.json").read_text())
    assert payload["violations"] == 0


def test_scan_constants_command(tmp_path):
    code = run(["scan-constants", "--flavor", "II",
                "--lambda-values", "1.5", "--gamma-values", "1.5,2.0",
                "--c-values", "0.1,1.0", "--b-values", "1.0",
                "--out-dir", tmp_path])
    assert code == 0
    lines = (tmp_path / "scan.csv").read_text().splitlines()
    assert len(lines) == 5
    cells = [line.split(",") for line in lines[1:]]
    # c = 1 cells are never feasible
    for cell in cells:
        if cell[2] == "1":
            assert cell[6] == "0"


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "map = henon\na = 1.4\nb = 0.3\nx0 = 0.0\ny0 = 0.0\nk = 4\n"
        f"out_dir = {tmp_path}\n"
    )
    assert run(["orbit", "--config", cfg]) == 0
    lines = (tmp_path / "orbit.csv").read_text().splitlines()
    assert len(lines) == 6

    # flags override the file
    assert run(["orbit", "--config", cfg, "--k", "2"]) == 0
    lines = (tmp_path / "orbit.csv").read_text().splitlines()
    assert len(lines) == 4


def test_config_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("map = henon\nnonsense = 1\n")
    assert run(["orbit", "--config", cfg]) == 2
    assert "unknown keys" in capsys.readouterr().err


def test_missing_required_arguments_usage_error(tmp_path, capsys):
    assert run(["orbit", "--map", "henon", "--out-dir", tmp_path]) == 2


def test_determinism_byte_identical(tmp_path):
    d1 = tmp_path / "run1"
    d2 = tmp_path / "run2"
    for d in (d1, d2):
        assert run(["certify", *HENON_ARGS, "--k", "10", "--flavor", "II",
                    "--out-dir", d]) == 0
        assert run(["oracle-check", "--seed", "3", "--trials", "20",
                    "--grid-n", "10001", "--out-dir", d]) == 0
        assert run(["verify-convergence", *HENON_ARGS, "--k", "8", "--flavor", "II",
                    "--out-dir", d]) == 0
    names = [
        "ledger.txt",
        "certificate.csv",
        "certificate.json",
        "oracle_check.json",
        "apriori_convergence.csv",
        "apriori_convergence.json",
        "explicit_convergence.csv",
        "explicit_convergence.json",
    ]
    match, mismatch, errors = filecmp.cmpfiles(d1, d2, names, shallow=False)
    assert mismatch == [] and errors == []
    assert set(match) == set(names)


def test_param_flag_selects_lorenz_coefficients(tmp_path):
    code = run(["orbit", "--map", "lorenz2d", "--param", "alpha=0.6",
                "--param", "a1=1.1", "--x0", "0.8", "--y0", "0.1", "--k", "2",
                "--out-dir", tmp_path])
    assert code == 0
    lines = (tmp_path / "orbit.csv").read_text().splitlines()
    assert len(lines) == 4


def test_singular_orbit_reports_error(tmp_path, capsys):
    # the first image of this point lands on the singular line
    x0 = (1.0 / 1.2) ** 2.0
    code = run(["orbit", "--map", "lorenz2d", "--x0", x0, "--y0", "0",
                "--k", "3", "--out-dir", tmp_path])
    assert code == 1
    assert "singular" in capsys.readouterr().err


def test_certify_nonsingular_flavor_on_linear_map(tmp_path):
    code = run(["certify", "--map", "linear", "--matrix", "2,0,0,0.5",
                "--x0", "1", "--y0", "1", "--k", "10", "--flavor", "nonsingular",
                "--out-dir", tmp_path])
    assert code == 0
    text = (tmp_path / "ledger.txt").read_text()
    assert "flavor = nonsingular" in text
    assert "c_tilde = 1.0" in text and "Gamma_tilde = 1.0" in text
