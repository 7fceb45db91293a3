"""Command-line behaviors: config validation, exit codes, output files,
train/eval agreement, determinism."""
import subprocess
import sys

import numpy as np
import pytest

from rmdl import cli

from test_data import write_idx_pair
from test_ensemble import tiny_image_data


def write_config(path, text):
    path.write_text(text)
    return str(path)


def image_files(tmp_path, seed=0):
    """40 train / 8 test images of the two-blob toy task, as IDX files."""
    import struct
    x, y = tiny_image_data(n_per_class=24, seed=seed)
    tr = write_idx_pair(tmp_path, x[:40], y[:40])
    ip = tmp_path / "tim.idx"
    lp = tmp_path / "tlb.idx"
    ib = struct.pack(">i3i", 2051, *x[40:].shape) + x[40:].astype(np.uint8).tobytes()
    lb = struct.pack(">ii", 2049, len(y[40:])) + y[40:].astype(np.uint8).tobytes()
    ip.write_bytes(ib)
    lp.write_bytes(lb)
    return tr[0], tr[1], str(ip), str(lp)


IMAGE_CONFIG = """
[task]
kind = image

[data]
train_images = {ti}
train_labels = {tl}
test_images = {si}
test_labels = {sl}
valid_fraction = 0.2

[ensemble]
dnn = 1
cnn = 1
rnn = 1
seed = 13
epochs = 2
batch_size = 16

[ranges]
dnn_layers = 1,1
dnn_units = 8,8
dnn_dropout = 0.0,0.1
cnn_blocks = 1,1
cnn_filters = 4,4
cnn_kernels = 3
rnn_layers = 1,1
rnn_units = 8,8

[output]
checkpoint = {out}/model.rmdl
history = {out}/history.csv
report = {out}/report.txt
"""

TEXT_DOCS = [
    ("pos", "great wonderful fun delightful charming"),
    ("pos", "wonderful great charming movie fun"),
    ("pos", "delightful fun great wonderful"),
    ("pos", "charming delightful wonderful great"),
    ("neg", "awful dreadful boring tedious dull"),
    ("neg", "dreadful awful dull boring film"),
    ("neg", "tedious boring awful dreadful"),
    ("neg", "dull tedious dreadful awful"),
]


def text_files(tmp_path):
    train = tmp_path / "train.tsv"
    test = tmp_path / "test.tsv"
    lines = [f"{lab}\t{txt}" for lab, txt in TEXT_DOCS]
    train.write_text("\n".join(lines * 4) + "\n")
    test.write_text("\n".join(lines) + "\n")
    return str(train), str(test)


TEXT_CONFIG = """
[task]
kind = text

[data]
train = {train}
test = {test}
valid_fraction = 0.0

[ensemble]
dnn = 1
cnn = 1
rnn = 1
seed = 5
epochs = 2
batch_size = 8

[ranges]
dnn_layers = 1,1
dnn_units = 8,8
dnn_dropout = 0.0,0.1
cnn_blocks = 1,1
cnn_filters = 4,4
cnn_kernels = 3
rnn_layers = 1,1
rnn_units = 8,8

[features]
max_len = 8
embed_dim = 8

[output]
checkpoint = {out}/model.rmdl
history = {out}/history.csv
report = {out}/report.txt
"""


class TestConfigErrors:
    def test_missing_config_file(self, tmp_path, capsys):
        rc = cli.main(["train", str(tmp_path / "none.ini")])
        assert rc == 1
        assert "config file does not exist" in capsys.readouterr().err

    def test_missing_required_output_key(self, tmp_path, capsys):
        ti, tl, si, sl = image_files(tmp_path)
        cfg = write_config(tmp_path / "c.ini", f"""
[task]
kind = image
[data]
train_images = {ti}
train_labels = {tl}
test_images = {si}
test_labels = {sl}
[output]
checkpoint = {tmp_path}/m.rmdl
history = {tmp_path}/h.csv
""")
        rc = cli.main(["train", cfg])
        assert rc == 1
        assert "output.report" in capsys.readouterr().err

    def test_bad_task_kind(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.ini", "[task]\nkind = tabular\n")
        assert cli.main(["train", cfg]) == 1
        assert "task.kind" in capsys.readouterr().err

    def test_nonexistent_input_path(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.ini", f"""
[task]
kind = text
[data]
train = {tmp_path}/missing.tsv
test = {tmp_path}/missing.tsv
[output]
checkpoint = x
history = y
report = z
""")
        assert cli.main(["train", cfg]) == 1
        err = capsys.readouterr().err
        assert "data.train" in err and "does not exist" in err

    def test_non_integer_epochs(self, tmp_path, capsys):
        ti, tl, si, sl = image_files(tmp_path)
        cfg = write_config(tmp_path / "c.ini", IMAGE_CONFIG.format(
            ti=ti, tl=tl, si=si, sl=sl, out=tmp_path).replace(
                "epochs = 2", "epochs = two"))
        assert cli.main(["train", cfg]) == 1
        assert "ensemble.epochs" in capsys.readouterr().err

    def test_bad_range_pair(self, tmp_path, capsys):
        ti, tl, si, sl = image_files(tmp_path)
        cfg = write_config(tmp_path / "c.ini", IMAGE_CONFIG.format(
            ti=ti, tl=tl, si=si, sl=sl, out=tmp_path).replace(
                "dnn_units = 8,8", "dnn_units = 8"))
        assert cli.main(["train", cfg]) == 1
        assert "ranges.dnn_units" in capsys.readouterr().err

    def test_unknown_optimizer(self, tmp_path, capsys):
        ti, tl, si, sl = image_files(tmp_path)
        cfg = write_config(tmp_path / "c.ini", IMAGE_CONFIG.format(
            ti=ti, tl=tl, si=si, sl=sl, out=tmp_path).replace(
                "[ranges]", "optimizers = lion\n[ranges]"))
        assert cli.main(["train", cfg]) == 1
        assert "lion" in capsys.readouterr().err

    def test_bad_valid_fraction(self, tmp_path, capsys):
        ti, tl, si, sl = image_files(tmp_path)
        cfg = write_config(tmp_path / "c.ini", IMAGE_CONFIG.format(
            ti=ti, tl=tl, si=si, sl=sl, out=tmp_path).replace(
                "valid_fraction = 0.2", "valid_fraction = 1.5"))
        assert cli.main(["train", cfg]) == 1
        assert "valid_fraction" in capsys.readouterr().err


class TestDataErrors:
    def test_corrupt_idx_is_data_error(self, tmp_path, capsys):
        ti, tl, si, sl = image_files(tmp_path)
        with open(ti, "r+b") as fh:
            fh.write(b"\x00\x00\x09\x99")  # clobber the magic
        cfg = write_config(tmp_path / "c.ini", IMAGE_CONFIG.format(
            ti=ti, tl=tl, si=si, sl=sl, out=tmp_path))
        assert cli.main(["train", cfg]) == 2
        assert "data error" in capsys.readouterr().err

    def test_malformed_tsv_is_data_error(self, tmp_path, capsys):
        train, test = text_files(tmp_path)
        with open(train, "a") as fh:
            fh.write("no tab here\n")
        cfg = write_config(tmp_path / "c.ini", TEXT_CONFIG.format(
            train=train, test=test, out=tmp_path))
        assert cli.main(["train", cfg]) == 2

    def test_training_failure_is_exit_3(self, tmp_path, capsys, monkeypatch):
        from rmdl.ensemble import TrainingError

        def bomb(*args, **kwargs):
            raise TrainingError("all models failed")

        monkeypatch.setattr(cli, "train_ensemble", bomb)
        ti, tl, si, sl = image_files(tmp_path)
        cfg = write_config(tmp_path / "c.ini", IMAGE_CONFIG.format(
            ti=ti, tl=tl, si=si, sl=sl, out=tmp_path))
        assert cli.main(["train", cfg]) == 3
        assert "training failed" in capsys.readouterr().err


@pytest.fixture(scope="class")
def trained_image_run(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("imgrun")
    ti, tl, si, sl = image_files(tmp_path)
    out = tmp_path / "out"
    cfg = write_config(tmp_path / "c.ini", IMAGE_CONFIG.format(
        ti=ti, tl=tl, si=si, sl=sl, out=out))
    rc = cli.main(["train", cfg])
    assert rc == 0
    return {"tmp": tmp_path, "cfg": cfg, "out": out,
            "test_images": si, "test_labels": sl}


class TestImageRun:
    def test_outputs_written(self, trained_image_run, capsys):
        out = trained_image_run["out"]
        assert (out / "model.rmdl").exists()
        report = (out / "report.txt").read_text().splitlines()
        assert len(report) == 4
        for line in report:
            key, val = line.split("=")
            assert key in ("accuracy", "micro_precision", "micro_recall",
                           "micro_f1")
            float(val)

    def test_history_csv_shape(self, trained_image_run):
        rows = (trained_image_run["out"] / "history.csv").read_text().splitlines()
        assert rows[0] == "epoch,model_id,family,loss,accuracy"
        assert len(rows) == 1 + 3 * 2  # 3 models x 2 epochs
        first = rows[1].split(",")
        assert first[0] == "1" and first[1] == "0" and first[2] == "dnn"
        float(first[3]); float(first[4])

    def test_eval_matches_report(self, trained_image_run, capsys):
        out = trained_image_run["out"]
        rc = cli.main(["eval", str(out / "model.rmdl"),
                       "--images", trained_image_run["test_images"],
                       "--labels", trained_image_run["test_labels"]])
        assert rc == 0
        got = capsys.readouterr().out.strip().splitlines()
        assert got == (out / "report.txt").read_text().splitlines()

    def test_predict_prints_one_label_per_image(self, trained_image_run, capsys):
        out = trained_image_run["out"]
        rc = cli.main(["predict", str(out / "model.rmdl"),
                       "--images", trained_image_run["test_images"]])
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 8  # 48 images total, 40 train / 8 test
        assert set(lines) <= {"0", "1"}

    def test_eval_missing_labels(self, trained_image_run, capsys):
        out = trained_image_run["out"]
        rc = cli.main(["eval", str(out / "model.rmdl"),
                       "--images", trained_image_run["test_images"]])
        assert rc == 2
        assert "labels" in capsys.readouterr().err

    def test_eval_wrong_modality(self, trained_image_run, tmp_path, capsys):
        corpus = tmp_path / "t.tsv"
        corpus.write_text("a\thello\n")
        rc = cli.main(["eval", str(trained_image_run["out"] / "model.rmdl"),
                       "--text", str(corpus)])
        assert rc == 2
        assert "expects image input" in capsys.readouterr().err

    def test_eval_class_coverage_mismatch(self, trained_image_run, tmp_path,
                                          capsys):
        import struct
        x, y = tiny_image_data(n_per_class=6)
        y[:] = 0  # only one of the checkpoint's two classes present
        ip = tmp_path / "one.idx"
        lp = tmp_path / "onelab.idx"
        ip.write_bytes(struct.pack(">i3i", 2051, *x.shape)
                       + x.astype(np.uint8).tobytes())
        lp.write_bytes(struct.pack(">ii", 2049, len(y))
                       + y.astype(np.uint8).tobytes())
        rc = cli.main(["eval", str(trained_image_run["out"] / "model.rmdl"),
                       "--images", str(ip), "--labels", str(lp)])
        assert rc == 2
        err = capsys.readouterr().err
        assert "covers 1 classes" in err and "expects 2" in err

    def test_bad_checkpoint_is_exit_1(self, tmp_path, capsys):
        junk = tmp_path / "junk.rmdl"
        junk.write_bytes(b"not a checkpoint")
        assert cli.main(["eval", str(junk), "--images", "x"]) == 1
        assert "checkpoint error" in capsys.readouterr().err

    def test_missing_checkpoint_is_exit_1(self, tmp_path, capsys):
        assert cli.main(["predict", str(tmp_path / "gone.rmdl"),
                         "--images", "x"]) == 1


class TestTextRun:
    def test_end_to_end(self, tmp_path, capsys):
        train, test = text_files(tmp_path)
        out = tmp_path / "out"
        cfg = write_config(tmp_path / "c.ini", TEXT_CONFIG.format(
            train=train, test=test, out=out))
        assert cli.main(["train", cfg]) == 0
        capsys.readouterr()

        # eval on the test corpus reproduces the report exactly
        rc = cli.main(["eval", str(out / "model.rmdl"), "--text", test])
        assert rc == 0
        got = capsys.readouterr().out.strip().splitlines()
        assert got == (out / "report.txt").read_text().splitlines()

        # predict prints class names, one per line
        plain = tmp_path / "plain.txt"
        plain.write_text("great fun movie\nawful boring film\n")
        rc = cli.main(["predict", str(out / "model.rmdl"), "--text", str(plain)])
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 2
        assert set(lines) <= {"neg", "pos"}

    def test_eval_unknown_label_name(self, tmp_path, capsys):
        train, test = text_files(tmp_path)
        out = tmp_path / "out"
        cfg = write_config(tmp_path / "c.ini", TEXT_CONFIG.format(
            train=train, test=test, out=out))
        assert cli.main(["train", cfg]) == 0
        capsys.readouterr()
        alien = tmp_path / "alien.tsv"
        alien.write_text("neutral\tsome words here\nneg\tawful stuff\n")
        rc = cli.main(["eval", str(out / "model.rmdl"), "--text", str(alien)])
        assert rc == 2
        assert "neutral" in capsys.readouterr().err


class TestDeterminism:
    def test_two_runs_byte_identical(self, tmp_path, capsys):
        ti, tl, si, sl = image_files(tmp_path)
        blobs = []
        reports = []
        histories = []
        for name in ("a", "b"):
            out = tmp_path / name
            cfg = write_config(tmp_path / f"{name}.ini", IMAGE_CONFIG.format(
                ti=ti, tl=tl, si=si, sl=sl, out=out))
            assert cli.main(["train", cfg]) == 0
            blobs.append((out / "model.rmdl").read_bytes())
            reports.append((out / "report.txt").read_bytes())
            histories.append((out / "history.csv").read_bytes())
        capsys.readouterr()
        assert blobs[0] == blobs[1]
        assert reports[0] == reports[1]
        assert histories[0] == histories[1]


class TestEntryPoints:
    def test_module_and_script_help(self):
        r = subprocess.run([sys.executable, "-m", "rmdl.cli", "--help"],
                           capture_output=True, text=True)
        assert r.returncode == 0
        assert "train" in r.stdout and "predict" in r.stdout

    def test_console_script_installed(self):
        r = subprocess.run(["rmdl", "--help"], capture_output=True, text=True)
        assert r.returncode == 0
        assert "majority vote" in r.stdout
