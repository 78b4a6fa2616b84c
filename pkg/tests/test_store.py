import json
import shutil

import numpy as np
import pytest
from hypothesis import given, strategies as st

from authkit import BAND, BIN, basis, key
from eardynamic.auth import BoostedClassifier, BoostRound, TemplateEntry, UserTemplate, WeakClassifier, enroll
from eardynamic.channel import FeatureVector
from eardynamic.cli import main
from eardynamic.errors import DatasetError, TemplateLoadError
from eardynamic.store import load_dataset, load_template, save_template


def sample_template(seed=0, n_keys=3):
    r = np.random.default_rng(seed)
    samples = []
    for i in range(n_keys):
        (m,) = basis(seed * 10 + i, 1)
        for _ in range(3):
            v = m + 0.05 * r.normal(size=m.size)
            samples.append((key(i), FeatureVector((v - v.mean()) / np.linalg.norm(v - v.mean()), BAND, BIN)))
    t = enroll("user-1", samples)
    clf = BoostedClassifier(tuple(BoostRound(WeakClassifier(k, float(r.uniform(-1, 1))), float(r.uniform(0.1, 7)),
                                             float(r.uniform(1e-6, 0.49))) for k in t.keys()))
    return t, clf


@given(st.integers(0, 10_000), st.integers(1, 6))
def test_roundtrip_exact(seed, n_keys):
    t, clf = sample_template(seed, n_keys)
    tf = load_template(save_template(t, clf))
    assert tf.template == t
    assert tf.classifier == clf
    assert tf.format_version == "v1"


def test_roundtrip_without_classifier():
    t, _ = sample_template()
    tf = load_template(save_template(t))
    assert tf.template == t and tf.classifier is None


def test_byte_deterministic():
    assert save_template(*sample_template(3)) == save_template(*sample_template(3))


def test_layout():
    t, clf = sample_template()
    lines = save_template(t, clf).decode().splitlines()
    assert lines[0] == "EARDYN-TEMPLATE v1"
    assert lines[1] == "user user-1"
    assert lines[2].split()[0] == "band"
    assert lines[3].startswith("entry STATIC FORWARD 3 ")
    assert len(lines[4].split()) == 85
    assert lines[-4] == "boost 3"
    assert lines[-1].startswith("round C2 FORWARD ")


def corrupt(text, line_index, new):
    lines = text.splitlines()
    lines[line_index] = new(lines[line_index])
    return "\n".join(lines) + "\n"


class TestLoadErrors:
    text = save_template(*sample_template()).decode()

    def test_version(self):
        with pytest.raises(TemplateLoadError, match="line 1.*version"):
            load_template(corrupt(self.text, 0, lambda s: "EARDYN-TEMPLATE v2"))

    def test_nan(self):
        with pytest.raises(TemplateLoadError, match="line 5.*non-finite"):
            load_template(corrupt(self.text, 4, lambda s: "nan " + s.split(" ", 1)[1]))

    def test_inf_in_round(self):
        n = len(self.text.splitlines())
        with pytest.raises(TemplateLoadError, match=f"line {n}"):
            load_template(corrupt(self.text, n - 1, lambda s: s.rsplit(" ", 1)[0] + " inf"))

    def test_truncated_entry(self):
        lines = self.text.splitlines()
        with pytest.raises(TemplateLoadError, match="truncated"):
            load_template("\n".join(lines[:4]) + "\n")

    def test_truncated_rounds(self):
        lines = self.text.splitlines()
        with pytest.raises(TemplateLoadError, match="truncated"):
            load_template("\n".join(lines[:-1]) + "\n")

    def test_wrong_length_vector(self):
        with pytest.raises(TemplateLoadError, match="line 7"):
            load_template(corrupt(self.text, 6, lambda s: s.rsplit(" ", 1)[0]))

    def test_trailing_garbage(self):
        with pytest.raises(TemplateLoadError):
            load_template(self.text + "hello\n")

    def test_empty(self):
        with pytest.raises(TemplateLoadError, match="line 1"):
            load_template(b"")


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    assert main(["simulate", "--subjects", "2", "--seed", "5", "--test-sessions", "1",
                 "--attack-sessions", "0", "--out", str(out)]) == 0
    return out


def copy(src, tmp_path):
    dst = tmp_path / "copy"
    shutil.copytree(src, dst)
    return dst


def test_simulated_manifest_loads(small_dataset, caplog):
    ds = load_dataset(small_dataset / "manifest.json")
    assert [s.subject_id for s in ds.subjects] == ["S000", "S001"]
    assert len(ds.subjects[0].sessions["enroll"]) == 3
    assert not [r for r in caplog.records if r.levelname == "WARNING"]


def test_manifest_sorted_keys(small_dataset):
    text = (small_dataset / "manifest.json").read_text()
    assert text == json.dumps(json.loads(text), indent=2, sort_keys=True) + "\n"


def test_annotation_past_end(small_dataset, tmp_path):
    d = copy(small_dataset, tmp_path)
    (d / "S001" / "test_00.phn.tsv").write_text("0.000\t99.000\t[A]\n")
    with pytest.raises(DatasetError) as err:
        load_dataset(d / "manifest.json")
    assert err.value.subject_ids == ("S001",)


def test_missing_file(small_dataset, tmp_path):
    d = copy(small_dataset, tmp_path)
    (d / "S000" / "enroll_01.wav").unlink()
    with pytest.raises(DatasetError) as err:
        load_dataset(d / "manifest.json")
    assert err.value.subject_ids == ("S000",)


def test_empty_subjects(tmp_path):
    (tmp_path / "manifest.json").write_text(json.dumps({"version": 1, "subjects": []}))
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "manifest.json")


def test_rate_mismatch(small_dataset, tmp_path):
    d = copy(small_dataset, tmp_path)
    m = json.loads((d / "manifest.json").read_text())
    m["sample_rate"] = 44100
    (d / "manifest.json").write_text(json.dumps(m))
    with pytest.raises(DatasetError) as err:
        load_dataset(d / "manifest.json")
    assert set(err.value.subject_ids) == {"S000", "S001"}
