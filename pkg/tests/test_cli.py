import numpy as np

from triseg.cli import main

TINY_CFG = """
mode = tri
seed = 4
epochs = 2
count = 6
shape = 16,16,16
deterministic = true
"""


def write_cfg(tmp_path, text=TINY_CFG):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return str(p)


def test_gen_data_writes_samples(tmp_path):
    out = tmp_path / "data"
    rc = main(["gen-data", "--seed", "1", "--count", "3",
               "--shape", "16,16,16", "--out", str(out)])
    assert rc == 0
    files = sorted(out.glob("*.mmv"))
    assert len(files) == 3


def test_train_and_eval_cycle(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    run_dir = tmp_path / "run"
    assert main(["train", "--config", cfg, "--out", str(run_dir)]) == 0
    assert (run_dir / "checkpoint.pt").exists()
    assert (run_dir / "report.json").exists()

    data_dir = tmp_path / "data"
    assert main(["gen-data", "--seed", "9", "--count", "2",
                 "--shape", "16,16,16", "--out", str(data_dir)]) == 0
    eval_dir = tmp_path / "eval"
    rc = main(["eval", "--ckpt", str(run_dir / "checkpoint.pt"),
               "--data", str(data_dir), "--out", str(eval_dir)])
    assert rc == 0
    lines = (eval_dir / "metrics.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 3  # header + samples x regions


def test_metrics_csv_row_count_and_undefined(tmp_path):
    cfg = write_cfg(tmp_path)
    run_dir = tmp_path / "run"
    main(["train", "--config", cfg, "--out", str(run_dir)])
    rows = (run_dir / "metrics.csv").read_text().splitlines()
    # 6 samples at 20% test fraction -> 1 test sample x 3 regions
    assert rows[0] == "sample_id,region,dice,hausdorff_mm"
    assert len(rows) == 1 + 1 * 3


def test_hist_command(tmp_path):
    data_dir = tmp_path / "data"
    main(["gen-data", "--seed", "3", "--count", "1",
          "--shape", "16,16,16", "--out", str(data_dir)])
    sample = next(data_dir.glob("*.mmv"))
    out = tmp_path / "hist"
    rc = main(["hist", "--a", f"{sample}:1", "--b", f"{sample}:3",
               "--bins", "16", "--mask", "wt", "--out", str(out)])
    assert rc == 0
    counts = np.loadtxt(out / "hist.csv", delimiter=",")
    assert counts.shape == (16, 16)
    assert (out / "hist.png").exists()


def test_hist_command_on_nifti(tmp_path):
    from test_nifti import build_nii

    rng = np.random.default_rng(0)
    vol = rng.uniform(1, 10, (8, 8, 8))
    a, b = tmp_path / "a.nii", tmp_path / "b.nii"
    build_nii(a, vol, datatype=16)
    build_nii(b, vol * 2.0, datatype=16)
    out = tmp_path / "h"
    rc = main(["hist", "--a", str(a), "--b", str(b), "--bins", "8",
               "--mask", "all", "--out", str(out)])
    assert rc == 0
    assert np.loadtxt(out / "hist.csv", delimiter=",").sum() == 8 ** 3


def test_ablate_command(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "abl"
    rc = main(["ablate", "--config", cfg, "--seeds", "4", "--out", str(out)])
    assert rc == 0
    table = (out / "ablation.csv").read_text().splitlines()
    assert len(table) == 4  # header + 3 methods


def test_exit_code_config_error(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("mode = warp\n")
    assert main(["train", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2


def test_exit_code_missing_data(tmp_path):
    cfg = write_cfg(tmp_path)
    run_dir = tmp_path / "run2"
    main(["train", "--config", cfg, "--out", str(run_dir)])
    rc = main(["eval", "--ckpt", str(run_dir / "checkpoint.pt"),
               "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path / "y")])
    assert rc == 3


def test_exit_code_corrupt_mmv(tmp_path):
    data_dir = tmp_path / "data"
    main(["gen-data", "--seed", "1", "--count", "1",
          "--shape", "16,16,16", "--out", str(data_dir)])
    victim = next(data_dir.glob("*.mmv"))
    victim.write_bytes(b"JUNK" + victim.read_bytes()[4:])
    cfg = write_cfg(tmp_path)
    run_dir = tmp_path / "run3"
    main(["train", "--config", cfg, "--out", str(run_dir)])
    rc = main(["eval", "--ckpt", str(run_dir / "checkpoint.pt"),
               "--data", str(data_dir), "--out", str(tmp_path / "z")])
    assert rc == 3


def test_exit_code_shape_mismatch(tmp_path):
    data_dir = tmp_path / "data32"
    main(["gen-data", "--seed", "1", "--count", "1",
          "--shape", "32,32,32", "--out", str(data_dir)])
    cfg = write_cfg(tmp_path)
    run_dir = tmp_path / "run4"
    main(["train", "--config", cfg, "--out", str(run_dir)])
    rc = main(["eval", "--ckpt", str(run_dir / "checkpoint.pt"),
               "--data", str(data_dir), "--out", str(tmp_path / "w")])
    assert rc == 4
