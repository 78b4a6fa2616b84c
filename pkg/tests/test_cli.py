import json

import pytest

from eardynamic.cli import main, parse_sweep
from eardynamic.store import load_template


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli")
    assert main(["simulate", "--subjects", "3", "--seed", "9", "--test-sessions", "2", "--out", str(out)]) == 0
    return out


def session_args(d, sid, stem):
    return ["--recording", str(d / sid / f"{stem}.wav"), "--annotations", str(d / sid / f"{stem}.phn.tsv"),
            "--imu", str(d / sid / f"{stem}.imu.tsv")]


@pytest.fixture(scope="module")
def template(dataset):
    path = dataset / "S001.tpl"
    assert main(["enroll", "--user", "S001", "--manifest", str(dataset / "manifest.json"), "--out", str(path)]) == 0
    return path


def test_default_five_categories(dataset):
    m = json.loads((dataset / "manifest.json").read_text())
    for subj in m["subjects"]:
        for sess in subj["sessions"]["test"]:
            assert len(set(sess["categories"])) == 5
        for sess in subj["sessions"]["enroll"]:
            assert len(set(sess["categories"])) == 7


def test_template_loads(template):
    tf = load_template(template.read_bytes())
    assert tf.template.user_id == "S001" and tf.classifier is not None


def test_genuine_accept(template, dataset, capsys):
    assert main(["auth", "--template", str(template)] + session_args(dataset, "S001", "test_00")) == 0
    assert capsys.readouterr().out.startswith("ACCEPT")


def test_impostor_reject(template, dataset):
    assert main(["auth", "--template", str(template)] + session_args(dataset, "S002", "test_00")) == 1


def test_no_evidence(template, dataset, tmp_path):
    (tmp_path / "a.tsv").write_text("0.240\t0.400\t[p]\n")
    (tmp_path / "i.tsv").write_text("")
    args = ["auth", "--template", str(template), "--recording", str(dataset / "S001" / "test_00.wav"),
            "--annotations", str(tmp_path / "a.tsv"), "--imu", str(tmp_path / "i.tsv")]
    assert main(args) == 4


def test_usage_errors(tmp_path):
    assert main(["simulate", "--subjects", "1", "--seed", "1", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as err:
        main(["simulate", "--subjects", "3", "--out", str(tmp_path)])  # seed required
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main(["simulate", "--subjects", "3", "--seed", "1", "--bogus", "--out", str(tmp_path)])
    assert err.value.code == 2
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["simulate", "--subjects", "2", "--seed", "1", "--out", str(blocker / "sub")]) == 2


def test_data_errors(dataset, tmp_path):
    manifest = str(dataset / "manifest.json")
    assert main(["enroll", "--user", "S999", "--manifest", manifest, "--out", str(tmp_path / "t")]) == 3
    m = json.loads((dataset / "manifest.json").read_text())
    m["subjects"][0]["sessions"]["enroll"] = m["subjects"][0]["sessions"]["enroll"][:2]
    for subj in m["subjects"]:
        for sessions in subj["sessions"].values():
            for s in sessions:
                for field in ("recording", "annotations", "imu"):
                    s[field] = str(dataset / s[field])
    (tmp_path / "m.json").write_text(json.dumps(m))
    assert main(["enroll", "--user", "S000", "--manifest", str(tmp_path / "m.json"), "--out", str(tmp_path / "t")]) == 3
    assert main(["evaluate", "--manifest", str(tmp_path / "m.json"), "--out", str(tmp_path / "r.json")]) == 3
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["evaluate", "--manifest", str(tmp_path / "bad.json"), "--out", str(tmp_path / "r.json")]) == 3


def test_evaluate_report(dataset, tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["evaluate", "--manifest", str(dataset / "manifest.json"), "--phoneme-sweep", "1..5",
                 "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    for field in ("accuracy", "recall", "precision", "f1", "auc", "roc", "counts"):
        assert field in report
    assert sorted(report["phoneme_sweep"]) == ["1", "2", "3", "4", "5"]
    rows = [line.split("\t") for line in out.with_suffix(".roc.tsv").read_text().splitlines()]
    assert len(rows) == len(report["roc"]) and all(len(r) == 3 for r in rows)
    printed = capsys.readouterr().out
    assert "0.9304" in printed and "0.9738" in printed and "0.9502" in printed and "0.9684" in printed


def test_parse_sweep():
    assert parse_sweep("1..5") == (1, 2, 3, 4, 5)
    assert parse_sweep("1,3") == (1, 3)
    with pytest.raises(Exception):
        parse_sweep("0..3")
