import csv

import numpy as np
import pytest

from gitrack import DecoderConfig, build_model, decode_study
from gitrack import io
from gitrack.cli import main
from gitrack.metrics import aggregate, study_metrics

DURATIONS = "10-30,200-600,400-1000,200-600"


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    studies = root / "studies.csv"
    assert main(["simulate", str(studies), "--studies", "6", "--seed", "4",
                 "--correct", "0.9", "--durations", DURATIONS]) == 0
    model = root / "model.json"
    io.write_model_file(model, build_model(0.999999, 0.9), DecoderConfig(window=2))
    return root, studies, model


def decode(workspace, name, *extra):
    root, studies, model = workspace
    out = root / name
    code = main(["decode", str(model), str(studies), str(out), *extra])
    return code, out


def report_of(text):
    return text[text.index("study_id"):]


def test_simulate_output(workspace):
    _, studies, _ = workspace
    corpus = io.parse_studies_csv(studies)
    assert len(corpus) == 6 and all(s.has_truth for s in corpus)


def test_decode_prints_metrics(workspace, capsys):
    code, out = decode(workspace, "dec.csv", "--window", "300")
    assert code == 0
    text = capsys.readouterr().out
    assert "Accuracy [%]" in text and "Average Delay (# Frames)" in text
    studies, decoded = io.parse_decoded_csv(out)
    agg_raw = aggregate([study_metrics(s.study_id, s.observed, s.truth) for s in studies])
    agg_dec = aggregate([study_metrics(s.study_id, d, s.truth) for s, d in zip(studies, decoded)])
    assert agg_dec.mean_accuracy > agg_raw.mean_accuracy


def test_window_override_beats_file(workspace, capsys):
    _, out = decode(workspace, "dec300.csv", "--window", "300")
    _, decoded = io.parse_decoded_csv(out)
    corpus = io.parse_studies_csv(workspace[1])
    model = build_model(0.999999, 0.9)
    lib300 = [decode_study(model, DecoderConfig(window=300), s.observed).labels for s in corpus]
    lib2 = [decode_study(model, DecoderConfig(window=2), s.observed).labels for s in corpus]
    assert all(np.array_equal(a, b) for a, b in zip(decoded, lib300))
    assert not all(np.array_equal(a, b) for a, b in zip(lib300, lib2))


def test_missing_model_file(workspace, tmp_path, capsys):
    missing = tmp_path / "nope.json"
    code = main(["decode", str(missing), str(workspace[1]), str(tmp_path / "o.csv")])
    assert code == 2
    assert str(missing) in capsys.readouterr().err


def test_malformed_input(workspace, tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("study_id,frame_index,observed_label\nx,0,9\n")
    assert main(["decode", str(workspace[2]), str(bad), str(tmp_path / "o.csv")]) == 2
    assert "line 2" in capsys.readouterr().err


def test_evaluate_reproduces_decode(workspace, capsys):
    _, out = decode(workspace, "dec_eval.csv", "--window", "300")
    decode_text = report_of(capsys.readouterr().out)
    assert main(["evaluate", str(out)]) == 0
    assert report_of(capsys.readouterr().out) == decode_text


def test_evaluate_perfect_file(tmp_path, capsys):
    truth = [0] * 3 + [1] * 5 + [2] * 5 + [3] * 2
    p = tmp_path / "perfect.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(io.DECODED_COLUMNS + ["true_label"])
        for k, t in enumerate(truth):
            w.writerow(["p", k, t, t, t])
    assert main(["evaluate", str(p)]) == 0
    text = capsys.readouterr().out
    lines = {line.split("  ")[0]: line.split() for line in text.splitlines()}
    assert lines["Accuracy [%]"][-1] == "100.0000"
    assert lines["Averaged MAE"][-1] == "0.0000"
    assert lines["Averaged R2-Score"][-1] == "1.0000"
    assert lines["Average Delay (# Frames)"][-1] == "0.0000"


def test_evaluate_errors(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("study_id,frame_index,observed_label,decoded_label\nx,0,1\n")
    assert main(["evaluate", str(bad)]) == 2
    no_truth = tmp_path / "nt.csv"
    no_truth.write_text("study_id,frame_index,observed_label,decoded_label\nx,0,1,1\n")
    assert main(["evaluate", str(no_truth)]) == 1
    assert main(["evaluate", str(tmp_path / "missing.csv")]) == 2


def test_decode_is_byte_deterministic(workspace):
    _, a = decode(workspace, "det_a.csv")
    _, b = decode(workspace, "det_b.csv")
    assert a.read_bytes() == b.read_bytes()
    assert io.events_path(a).read_bytes() == io.events_path(b).read_bytes()


def read_sweep(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_sweep_rows(workspace, tmp_path, capsys):
    _, studies, model = workspace
    out = tmp_path / "sweep.csv"
    assert main(["sweep-window", str(model), str(studies), str(out), "--windows", "25,50,300"]) == 0
    rows = read_sweep(out)
    assert [int(r["window"]) for r in rows] == [25, 50, 300]
    assert list(rows[0]) == io.SWEEP_COLUMNS


def test_sweep_matches_decode(workspace, tmp_path, capsys):
    _, studies, model = workspace
    out = tmp_path / "sweep.csv"
    assert main(["sweep-window", str(model), str(studies), str(out), "--windows", "120"]) == 0
    (row,) = read_sweep(out)
    _, dec = decode(workspace, "dec120.csv", "--window", "120")
    corpus, decoded = io.parse_decoded_csv(dec)
    events = io.parse_events_csv(io.events_path(dec))
    agg = aggregate([study_metrics(s.study_id, d, s.truth, events.get(s.study_id, []))
                     for s, d in zip(corpus, decoded)])
    assert float(row["mean_accuracy"]) == agg.mean_accuracy
    assert float(row["mean_delay"]) == agg.delay_stats.mean
    assert float(row["delay_q3"]) == agg.delay_stats.q3


def test_sweep_errors(workspace, tmp_path, capsys):
    _, studies, model = workspace
    out = tmp_path / "sweep.csv"
    assert main(["sweep-window", str(model), str(studies), str(out), "--windows", ""]) == 2
    no_truth = tmp_path / "nt.csv"
    no_truth.write_text("study_id,frame_index,observed_label\nx,0,0\nx,1,1\n")
    assert main(["sweep-window", str(model), str(no_truth), str(out), "--windows", "25"]) == 1


def test_calibrate(workspace, tmp_path, capsys):
    _, studies, _ = workspace
    out = tmp_path / "best.json"
    assert main(["calibrate", str(studies), str(out), "--d-values", "0.999,0.999999",
                 "--c-values", "0.8,0.9", "--window", "100"]) == 0
    model, config = io.read_model_file(out)
    assert config.window == 100
    assert model.transition[0, 0] in (0.999, 0.999999)
    table = read_sweep(tmp_path / "best.grid.csv")
    assert len(table) == 4


def test_calibrate_empty_grid(workspace, tmp_path, capsys):
    _, studies, _ = workspace
    assert main(["calibrate", str(studies), str(tmp_path / "m.json"), "--d-values", ""]) == 2


def test_simulate_invalid(tmp_path, capsys):
    assert main(["simulate", str(tmp_path / "s.csv"), "--correct", "1.5"]) == 2
    assert main(["simulate", str(tmp_path / "s.csv"), "--durations", "5-1,1-2,1-2,1-2"]) == 2
