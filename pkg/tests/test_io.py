"""File formats and artifact plumbing."""

import json

import numpy as np
import pytest

from msical.errors import DataError
from msical.io import (
    RunManifest,
    file_digest,
    load_model,
    load_replicate,
    load_sensor_model,
    read_artifact,
    save_model,
    save_sensor_model,
    write_artifact,
    write_csv,
    write_replicate,
)
from msical.models import Ar1, BetaMarginal, CompositeModel, InternalSensorModel, WhiteNoise


def test_replicate_f64le_round_trip(tmp_path):
    samples = np.linspace(-1.0, 1.0, 257)
    path = tmp_path / "sig.f64le"
    write_replicate(path, samples, rate_hz=250.0, label="bench")
    rep = load_replicate(path)
    np.testing.assert_array_equal(rep.samples, samples)
    assert rep.rate_hz == 250.0
    assert rep.label == "bench"


def test_sidecar_length_mismatch_is_refused(tmp_path):
    path = tmp_path / "sig.f64le"
    write_replicate(path, np.zeros(64))
    side = json.loads((tmp_path / "sig.f64le.json").read_text())
    side["length"] = 63
    (tmp_path / "sig.f64le.json").write_text(json.dumps(side))
    with pytest.raises(DataError):
        load_replicate(path)


def test_csv_replicate_defaults_to_1hz(tmp_path):
    path = tmp_path / "sig.csv"
    np.savetxt(path, np.arange(16.0), delimiter=",")
    rep = load_replicate(path)
    assert rep.rate_hz == 1.0
    assert rep.label == "sig"
    np.testing.assert_array_equal(rep.samples, np.arange(16.0))


def test_non_numeric_csv_is_refused(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1.0\nbanana\n")
    with pytest.raises(DataError):
        load_replicate(path)


def test_unknown_extension_is_refused(tmp_path):
    path = tmp_path / "sig.wav"
    path.write_text("")
    with pytest.raises(DataError):
        load_replicate(path)


def test_missing_file_is_refused(tmp_path):
    with pytest.raises(DataError):
        load_replicate(tmp_path / "absent.f64le")
    with pytest.raises(DataError):
        load_model(tmp_path / "absent.json")


def test_model_files_round_trip(tmp_path):
    model = CompositeModel((WhiteNoise(2.0), Ar1(0.95, 0.25)))
    path = tmp_path / "m.json"
    save_model(model, path)
    assert load_model(path) == model

    g = InternalSensorModel(
        model,
        (
            BetaMarginal(1.0, 3.0, 2, 2),
            BetaMarginal(0.9, 0.99, 3, 4),
            BetaMarginal(0.1, 0.5, 2, 5),
        ),
    )
    gpath = tmp_path / "g.json"
    save_sensor_model(g, gpath)
    assert load_sensor_model(gpath) == g


def test_malformed_model_json_is_refused(tmp_path):
    path = tmp_path / "m.json"
    path.write_text("{not json")
    with pytest.raises(DataError):
        load_model(path)
    path.write_text(json.dumps({"blocks": [{"type": "XX", "params": [1.0]}]}))
    with pytest.raises(DataError):
        load_model(path)


def test_artifact_embeds_manifest_and_payload(tmp_path):
    path = tmp_path / "art.json"
    manifest = RunManifest.create("wv", {"depth": 5}, seed=3)
    write_artifact(path, {"nu": [1.0, 0.5]}, manifest)
    doc = read_artifact(path)
    assert doc["payload"] == {"nu": [1.0, 0.5]}
    assert doc["manifest"]["command"] == "wv"
    assert doc["manifest"]["seed"] == 3
    assert doc["manifest"]["version"]
    assert doc["manifest"]["timestamp"]


def test_manifest_digests_inputs(tmp_path):
    data = tmp_path / "in.bin"
    data.write_bytes(b"\x00\x01")
    manifest = RunManifest.create("fit", {}, seed=0, inputs={"sig": data})
    digest = manifest.input_digests["sig"]
    assert digest.startswith("sha256:")
    assert digest == file_digest(data)


def test_csv_cells_keep_full_precision(tmp_path):
    path = tmp_path / "t.csv"
    value = 0.1 + 0.2  # not representable exactly; repr must round-trip
    write_csv(path, ["a", "b"], [[value, 7]])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "a,b"
    cell = lines[1].split(",")[0]
    assert float(cell) == value
