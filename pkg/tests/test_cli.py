import json
import math
import os

import pytest

from orbitcount.cli import load_config, build_parser, main, parse_lambdas


def run(tmp_path, *argv):
    out = tmp_path / "out"
    code = main(list(argv) + ["--out", str(out)])
    return code, out


def read(out, name):
    with open(os.path.join(out, name)) as fh:
        return json.load(fh)


def test_parse_lambdas():
    assert parse_lambdas("1,2.5,4") == [1.0, 2.5, 4.0]
    lams = parse_lambdas("10:1000:3")
    assert lams[0] == pytest.approx(10) and lams[1] == pytest.approx(100) and lams[2] == pytest.approx(1000)
    with pytest.raises(ValueError):
        parse_lambdas("10:1:3")


def test_discreteness_constant_field(tmp_path):
    code, out = run(tmp_path, "--b", "1", "--stage", "discreteness")
    assert code == 0
    assert read(out, "discreteness.json")["discrete"] is False


def test_algebra_stage(tmp_path):
    code, out = run(tmp_path, "--b", "x1^2-x2", "--stage", "algebra")
    assert code == 0
    data = read(out, "algebra.json")
    assert len(data["algebra"]["labels"]) == 5 and data["jacobi_defects"] == 0


def test_chart_stage(tmp_path):
    code, out = run(tmp_path, "--b", "x1^2-x2", "--stage", "chart")
    assert code == 0
    assert read(out, "chart.json")["coords"][2] == "x3^2 - x4"


def test_constants_stage(tmp_path):
    code, out = run(tmp_path, "--stage", "constants", "--set", "k=1")
    assert code == 0
    assert read(out, "constants.json")["constants"]["series_constant"]["value"] == pytest.approx(math.pi ** 2 / 8)


def test_direct_1d(tmp_path):
    code, out = run(tmp_path, "--n", "1", "--V", "x1^2", "--stage", "direct", "--lambdas", "6,10")
    assert code == 0
    assert read(out, "direct.json")["counts"] == [[6.0, 3], [10.0, 5]]


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[spec]\nn = 2\nb = x1*x2\n\n[run]\nstage = chart\nseed = 5\n")
    args = build_parser().parse_args(["--spec", str(cfg), "--seed", "9"])
    c = load_config(args)
    assert c.stage == "chart" and c.seed == 9
    assert c.a[1] == "1/2*x1^2*x2"


def test_hash_is_stable(tmp_path):
    p = build_parser()
    a = load_config(p.parse_args(["--b", "x1*x2", "--stage", "chart"]))
    b = load_config(p.parse_args(["--b", "x1*x2", "--stage", "chart", "--out", "elsewhere"]))
    assert a.digest() == b.digest()


@pytest.mark.parametrize("argv", [
    ["--b", "x1^", "--stage", "chart"],
    ["--b", "x3", "--stage", "chart"],
    ["--b", "x1", "--stage", "nonsense"],
    ["--b", "x1", "--a", "0,x1", "--stage", "chart"],
    ["--b", "x1", "--stage", "direct", "--lambdas", "5:1:3"],
])
def test_bad_input_exit_1(tmp_path, argv, capsys):
    if "nonsense" in argv:
        with pytest.raises(SystemExit):
            main(argv + ["--out", str(tmp_path)])
        return
    assert main(argv + ["--out", str(tmp_path)]) == 1


def test_grid_too_large_exit_2(tmp_path):
    # too-large grids stop the compare stage with exit 2 and a partial report
    code, out = run(tmp_path, "--b", "x1^2-x2", "--stage", "compare", "--lambdas", "20:80:4", "--samples", "20000")
    assert code == 2
    data = read(out, "compare.json")
    assert data["verdict"] == "Inconclusive" and data["direct"]["code"] == "grid_too_large"
