import numpy as np
import pytest

from lapepi import __version__
from lapepi.checkpoint import load_checkpoint, save_checkpoint
from lapepi.cli import CKPT_ENV, main
from lapepi.lightfield import LightField4D, load_lightfield, save_lightfield
from lapepi.train import init_params


@pytest.fixture(scope="module")
def toy_png(tmp_path_factory):
    path = tmp_path_factory.mktemp("toy") / "toy.png"
    assert main(["synth", "--kind", "toy", "--out", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def small_ckpt(tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "m.bin"
    save_checkpoint(init_params(0, scheme="scaled", n_features=4, n_shrink=3, n_mapping=2), path)
    return path


def synth_lf(path, views=3, views_t=1, seed=0, extra=()):
    argv = ["synth", "--kind", "random", "--views", str(views), "--views-t", str(views_t), "--height", "4",
            "--width", "24", "--seed", str(seed), "--out", str(path), *extra]
    assert main(argv) == 0
    return path


class TestDispatch:
    def test_no_subcommand(self, capsys):
        assert main([]) == 2
        assert "usage" in capsys.readouterr().err

    def test_unknown_flag(self, capsys):
        assert main(["analyze", "--bogus"]) == 2

    def test_missing_required(self):
        assert main(["analyze"]) == 2

    def test_bad_threads(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path / "a.png"), "--threads", "0"]) == 2

    def test_domain_error_is_one_line(self, tmp_path, capsys):
        assert main(["eval", "--recon", str(tmp_path / "x"), "--truth", str(tmp_path / "y")]) == 1
        err = capsys.readouterr().err
        assert err.startswith("lapepi: error:") and err.count("\n") == 1

    def test_prints_version_and_config_first(self, tmp_path, capsys):
        main(["synth", "--out", str(tmp_path / "t.png"), "--width", "96", "--dmax", "3", "--n-input", "3"])
        out = capsys.readouterr().out.splitlines()
        assert out[0] == f"lapepi {__version__}"
        assert out[1].startswith("config: ") and "seed=0" in out[1] and "threads=1" in out[1]


class TestAnalyze:
    def test_nine_rows(self, toy_png, tmp_path):
        out = tmp_path / "alias_report.csv"
        argv = ["analyze", "--epi", str(toy_png), "--dmax", "9", "--rate", "3", "--scales", "1,2,4",
                "--betas", "10,100,300", "--out", str(out)]
        assert main(argv) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "scale,beta,sigma,kernel_size"
        assert len(lines) == 10

    def test_byte_identical_reruns(self, toy_png, tmp_path):
        for name in ("a.csv", "b.csv"):
            main(["analyze", "--epi", str(toy_png), "--dmax", "9", "--rate", "3", "--out", str(tmp_path / name)])
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


class TestDecompose:
    def test_levels(self, toy_png, tmp_path):
        out = tmp_path / "pyr.npz"
        assert main(["decompose", "--epi", str(toy_png), "--out", str(out)]) == 0
        with np.load(out) as z:
            assert set(z.files) == {"level1", "residual2", "blurred2", "residual3", "blurred3", "pads"}
            assert z["level1"].shape == (31, 288)


class TestReconstructAndEval:
    def test_4d_grid(self, tmp_path, small_ckpt):
        synth_lf(tmp_path / "in", views=3, views_t=3)
        argv = ["reconstruct", "--lf", str(tmp_path / "in"), "--ckpt", str(small_ckpt), "--alpha", "3",
                "--mode", "4d", "--out", str(tmp_path / "out")]
        assert main(argv) == 0
        assert load_lightfield(tmp_path / "out").grid == (7, 7)

    def test_3d_rejects_grid(self, tmp_path, small_ckpt):
        synth_lf(tmp_path / "in", views=3, views_t=2)
        argv = ["reconstruct", "--lf", str(tmp_path / "in"), "--ckpt", str(small_ckpt), "--out", str(tmp_path / "o")]
        assert main(argv) == 1

    def test_checkpoint_from_environment(self, tmp_path, small_ckpt, monkeypatch):
        monkeypatch.setenv(CKPT_ENV, str(small_ckpt.parent))
        synth_lf(tmp_path / "in")
        argv = ["reconstruct", "--lf", str(tmp_path / "in"), "--ckpt", small_ckpt.name, "--out", str(tmp_path / "o")]
        assert main(argv) == 0
        assert load_lightfield(tmp_path / "o").grid == (1, 7)

    def test_eval_csv_is_reproducible(self, tmp_path, small_ckpt):
        synth_lf(tmp_path / "truth", views=7)
        truth = load_lightfield(tmp_path / "truth")
        sparse = tmp_path / "sparse"
        save_lightfield(LightField4D(truth.samples[:, ::3], truth.colorspace), sparse)
        for name in ("r1", "r2"):
            assert main(["reconstruct", "--lf", str(sparse), "--ckpt", str(small_ckpt),
                         "--out", str(tmp_path / name)]) == 0
            assert main(["eval", "--recon", str(tmp_path / name), "--truth", str(tmp_path / "truth"),
                         "--out", str(tmp_path / f"{name}.csv")]) == 0
        a, b = (tmp_path / "r1.csv").read_bytes(), (tmp_path / "r2.csv").read_bytes()
        assert a == b
        rows = a.decode().splitlines()
        assert rows[0] == "view_t,view_s,psnr,ssim" and len(rows) == 5


class TestTrainAndConfig:
    def test_train_writes_checkpoint_and_trace(self, tmp_path, capsys):
        ckpt = tmp_path / "m.bin"
        argv = ["train", "--source", "bundled", "--kind", "epi", "--steps", "4", "--batch", "2",
                "--patch-in", "3,44", "--ckpt", str(ckpt)]
        assert main(argv) == 0
        assert load_checkpoint(ckpt).n_params() == 252033
        trace = (tmp_path / "loss_trace.csv").read_text().splitlines()
        assert trace[0] == "step,loss" and trace[-1].startswith("4,")

    def test_traces_reproducible(self, tmp_path):
        for name in ("a", "b"):
            argv = ["train", "--source", "bundled", "--kind", "epi", "--steps", "3", "--batch", "2",
                    "--patch-in", "3,44", "--ckpt", str(tmp_path / f"{name}.bin"),
                    "--trace", str(tmp_path / f"{name}.csv")]
            assert main(argv) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()

    def test_finetune_needs_init(self, tmp_path):
        argv = ["train", "--stage", "finetune", "--steps", "1", "--patch-in", "3,44",
                "--ckpt", str(tmp_path / "m.bin")]
        assert main(argv) == 1

    def test_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[global]\nseed = 5\n[synth]\nwidth = 96\ndmax = 3\nn-input = 3\n")
        assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "t.png")]) == 0
        line = capsys.readouterr().out.splitlines()[1]
        assert "seed=5" in line and "width=96" in line

    def test_flags_override_config(self, tmp_path, capsys):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[global]\nseed = 5\n")
        main(["synth", "--config", str(cfg), "--seed", "7", "--width", "96", "--dmax", "3", "--n-input", "3",
              "--out", str(tmp_path / "t.png")])
        assert "seed=7" in capsys.readouterr().out

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[synth]\ncolour = red\n")
        assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "t.png")]) == 2

    def test_missing_config(self, tmp_path):
        assert main(["synth", "--config", str(tmp_path / "none.ini"), "--out", str(tmp_path / "t.png")]) == 1
