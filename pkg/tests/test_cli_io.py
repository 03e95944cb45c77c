import json
from fractions import Fraction

import numpy as np
import pytest

from renorm_skew import io
from renorm_skew.cli import main
from renorm_skew.errors import ConfigError, InvalidInput, RationalInput
from renorm_skew.surd import Surd
from renorm_skew.temporal import DistTower

GOLDEN_CFG = """\
# golden instance
alpha = (-1+1*sqrt(5))/2
Q = 2
d = 1
phi = [[1], [-1]]
seed = 7
"""


def test_parse_golden():
    cfg = io.parse_config_text(GOLDEN_CFG)
    assert cfg.alpha == Surd(-1, 1, 2, 5) and cfg.Q == 2 and cfg.seed == 7
    assert cfg.phi.tolist() == [[1], [-1]]


def test_non_centered():
    with pytest.raises(InvalidInput, match="centered"):
        io.parse_config_text("alpha = (-1+1*sqrt(5))/2\nphi = [[1], [1]]\n")


def test_rational_alpha():
    with pytest.raises(RationalInput):
        io.parse_config_text("alpha = (1+0*sqrt(2))/2\nphi = [1, -1]\n")


@pytest.mark.parametrize(
    "text, where",
    [
        ("alpha (1+sqrt(5))/2\n", "line 1, column 1"),
        ("alpha = (-1+1*sqrt(5))/2\nphi = [[1], [-1]\n", "line 2"),
        ("alpha = (-1+1*sqrt(5))/2\nphi = [1, -1]\nbogus = 1\n", "unknown"),
        ("alpha = (-1+1*sqrt(5))/2\nphi = [1, -1]\ncap_stream = 0\n", "positive"),
        ("alpha = (-1+1*sqrt(5))/2\nphi = [1, -1]\nQ = 3\n", "shape"),
    ],
)
def test_config_errors(text, where):
    with pytest.raises(ConfigError, match=where):
        io.parse_config_text(text)


def test_config_roundtrip():
    cfg = io.parse_config_text(GOLDEN_CFG)
    again = io.parse_config_text(io.dump_config(cfg))
    assert again.alpha == cfg.alpha and again.phi.tolist() == cfg.phi.tolist()
    assert again.caps == cfg.caps and again.seed == cfg.seed


def test_json_encoding_roundtrip(tmp_path):
    obj = {"r": Fraction(-3, 7), "z": 1 + 2j, "big": 3**60, "arr": np.array([[1, 2]]), "s": Surd(-1, 1, 2, 5)}
    p = io.write_json(tmp_path / "x.json", obj)
    back = json.loads(p.read_text())
    assert io.parse_rational(back["r"]) == Fraction(-3, 7)
    assert back["z"] == [1.0, 2.0]
    assert int(back["big"]) == 3**60
    assert back["arr"] == [[1, 2]]
    assert Surd.parse(back["s"]) == Surd(-1, 1, 2, 5)


def test_dist_csv(tmp_path, ren_a):
    tw = DistTower(ren_a)
    tw.advance_to(1)
    p = io.dist_csv(tmp_path / "v.csv", tw.get(0, 0))
    header, rows, meta = io.read_csv(p)
    assert header == ["nu_1", "weight"]
    assert rows == [["0", "2"], ["1", "3"]]
    assert meta == ["k=1 i=0 eps=0 ell=5"]


def test_empty_ratio_table(tmp_path):
    header, rows, _ = io.read_csv(io.ratio_csv(tmp_path / "r.csv", []))
    assert tuple(header) == io.RATIO_HEADER and rows == []


def test_cli_usage_error(capsys):
    assert main(["bogus"]) == 2
    assert main([]) == 2


def test_cli_dist_dump(tmp_path, capsys):
    assert main(["dist", "--k", "40", "--dump", "--out", str(tmp_path), "--format", "csv"]) == 0
    files = sorted(f.name for f in tmp_path.iterdir())
    assert "dist_k40_i0_e0.csv" in files and "dist_k40.csv" in files
    header, rows, meta = io.read_csv(tmp_path / "dist_k40_i0_e0.csv")
    assert sum(int(r[1]) for r in rows) == int(meta[0].split("ell=")[1])


def test_cli_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("alpha = (1+0*sqrt(2))/2\nphi = [1, -1]\n")
    assert main(["cf", "--config", str(bad)]) == 3
    assert main(["cf", "--config", str(tmp_path / "missing.cfg")]) == 3


def test_cli_cap_exceeded(tmp_path, capsys):
    cfg = tmp_path / "g.cfg"
    cfg.write_text(GOLDEN_CFG + "cap_stream = 10\n")
    assert main(["orbit", "--config", str(cfg), "--k", "11"]) == 4


@pytest.mark.parametrize("cmd", ["cf", "blocks", "orbit", "spectral"])
def test_cli_subcommands_deterministic(cmd, tmp_path, capsys):
    cfg = tmp_path / "b.cfg"
    cfg.write_text("alpha = (-1+1*sqrt(2))/1\nphi = [[1,0],[0,1],[-1,-1]]\n")
    outs = []
    for _ in range(2):
        assert main([cmd, "--config", str(cfg), "--out", str(tmp_path)]) == 0
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1]
    json.loads(outs[0])


def test_cli_rat_replay(tmp_path, capsys):
    args = ["rat", "--k", "4", "--trials", "20000", "--seed", "3", "--dump", "--out", str(tmp_path)]
    assert main(args) == 0
    first = (tmp_path / "samples_k4.csv").read_bytes()
    report = json.loads(capsys.readouterr().out)
    assert max(report["tv"]) < 0.05
    assert main(args) == 0
    assert (tmp_path / "samples_k4.csv").read_bytes() == first
