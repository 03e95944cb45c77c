"""Acceptance criteria on the two reference instances.

Each test prints one ``[PASS]``/``[FAIL]`` line to the terminal, whatever the
capture mode.
"""

import json

import pytest

from renorm_skew.cli import main
from renorm_skew.verify import Suite

ITEMS = [
    (1, "substitution"),
    (2, "parity"),
    (3, "orbit"),
    (4, "distribution"),
    (5, "rat_lemma"),
    (6, "eigenvalue"),
    (7, "displacement"),
    (8, "denjoy_koksma"),
    (9, "spectral"),
    (10, "clt"),
    (11, "wrllt"),
    (12, "rational_ergodicity"),
    (13, "disc_subsequence"),
]


@pytest.fixture(scope="module")
def suite(an_a, an_b):
    return Suite({"A": an_a, "B": an_b})


def _short(detail, limit=240):
    text = json.dumps(detail, default=str)
    return text if len(text) <= limit else text[: limit - 3] + "..."


@pytest.mark.parametrize("item, method", ITEMS, ids=[m for _, m in ITEMS])
def test_criterion(item, method, suite, capsys):
    res = getattr(suite, method)()
    assert res.item == item
    with capsys.disabled():
        print(f"\n{res.line()} :: {_short(res.detail)}")
    assert res.passed, res.detail


def test_verify_cli_golden(tmp_path, capsys):
    cfg = tmp_path / "golden.cfg"
    cfg.write_text("alpha = (-1+1*sqrt(5))/2\nphi = [[1], [-1]]\n")
    code = main(["verify", "--config", str(cfg), "--out", str(tmp_path)])
    report = json.loads((tmp_path / "verify.json").read_text())
    with capsys.disabled():
        print(f"\n[{'PASS' if code == 0 else 'FAIL'}] verify CLI on the golden instance (exit {code})")
    assert code == 0 and report["passed"]
    header = (tmp_path / "ratios_config.csv").read_text().splitlines()[0]
    assert header == "k,ratio0,ratio1,ks,wrllt_p1,wrllt_p2"
