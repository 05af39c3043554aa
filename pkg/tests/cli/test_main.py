import json

import pytest

from src.app_config import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE
from src.cli.main import DECODE_KEYS, _resolve, build_parser, main
from src.errors import GradCheckFailed

TINY_FLAGS = [
    "--d-model", "16", "--n-layers", "1", "--n-heads", "2", "--d-ff", "32",
    "--max-positions", "32", "--prefix-len", "2", "--mlp-hidden", "16",
    "--epochs", "1", "--batch-size", "8", "--warmup-steps", "0", "--lr", "0.01",
]


@pytest.fixture
def world_dir(tmp_path):
    out = tmp_path / "world"
    code = main(["make-synthetic", "--out", str(out), "--seed", "3",
                 "--train-size", "24", "--val-size", "8"])
    assert code == EXIT_OK
    return out


def test_make_synthetic_output(world_dir, capsys):
    assert (world_dir / "train.jsonl").is_file()
    assert (world_dir / "val.jsonl").is_file()
    assert (world_dir / "features.inlgfeat").is_file()
    lines = (world_dir / "train.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 24


def test_story_with_paper_hparams_flags(tmp_path):
    """--task-preset story --paper-hparams: lambda=0.2, N=15, max_len=150, beam=10"""
    args = build_parser().parse_args([
        "generate", "--ckpt", "m.inlgckpt", "--in", "in.jsonl", "--out", "out.jsonl",
        "--task-preset", "story", "--paper-hparams",
    ])
    config = _resolve(args, DECODE_KEYS)
    assert config["lambda"] == 0.2
    assert config["n_no_contra"] == 15
    assert config["max_len"] == 150
    assert config["beam"] == 10


def test_train_generate_and_metrics(world_dir, tmp_path, capsys):
    """Полный цикл: обучение, генерация, метрики"""
    run = tmp_path / "run"
    code = main([
        "train", "--run-dir", str(run), "--seed", "1",
        "--train", str(world_dir / "train.jsonl"), "--val", str(world_dir / "val.jsonl"),
        "--features", str(world_dir / "features.inlgfeat"),
        "--lambda", "0.5", "--n-no-contra", "0", *TINY_FLAGS,
    ])
    assert code == EXIT_OK
    assert (run / "config.snapshot").is_file()
    assert (run / "vocab.txt").is_file()
    assert (run / "ckpt" / "ep000.inlgckpt").is_file()
    log_lines = (run / "train.log.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(log_lines) == 3
    assert json.loads(log_lines[0])["lambda_effective"] == 0.5

    gen = tmp_path / "gen.jsonl"
    code = main([
        "generate", "--ckpt", str(run / "ckpt" / "best.inlgckpt"),
        "--in", str(world_dir / "val.jsonl"), "--features", str(world_dir / "features.inlgfeat"),
        "--out", str(gen), "--beam", "2", "--max-len", "5", "--workers", "2",
    ])
    assert code == EXIT_OK
    records = [json.loads(line) for line in gen.read_text(encoding="utf-8").splitlines()]
    assert len(records) == 8
    assert all("text" in r for r in records)

    capsys.readouterr()
    report_path = tmp_path / "report.json"
    code = main(["eval-metrics", "--in", str(gen), "--out", str(report_path),
                 "--csv", str(tmp_path / "per_text.csv")])
    assert code == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed["texts"] == 8
    assert json.loads(report_path.read_text(encoding="utf-8")) == printed


def test_snapshot_rerun_reproduces_training(world_dir, tmp_path):
    """Повторный запуск по снимку конфигурации даёт те же веса и тот же журнал шагов"""
    first = tmp_path / "first"
    assert main([
        "train", "--run-dir", str(first), "--seed", "2",
        "--train", str(world_dir / "train.jsonl"),
        "--features", str(world_dir / "features.inlgfeat"), *TINY_FLAGS,
    ]) == EXIT_OK
    second = tmp_path / "second"
    assert main(["train", "--run-dir", str(second),
                 "--config", str(first / "config.snapshot")]) == EXIT_OK
    assert (first / "ckpt" / "ep000.inlgckpt").read_bytes() == \
        (second / "ckpt" / "ep000.inlgckpt").read_bytes()
    log = (first / "train.log.jsonl").read_bytes()
    assert log
    assert log == (second / "train.log.jsonl").read_bytes()


def test_pretrain_then_train(world_dir, tmp_path, capsys):
    pre = tmp_path / "pre"
    assert main([
        "pretrain-map", "--run-dir", str(pre), "--seed", "1",
        "--train", str(world_dir / "train.jsonl"),
        "--features", str(world_dir / "features.inlgfeat"),
        "--pretrain-epochs", "1", "--pretrain-batch-size", "8", *TINY_FLAGS,
    ]) == EXIT_OK
    mapping = pre / "ckpt" / "mapping.inlgckpt"
    assert mapping.is_file()

    run = tmp_path / "run"
    assert main([
        "train", "--run-dir", str(run), "--seed", "1",
        "--train", str(world_dir / "train.jsonl"),
        "--features", str(world_dir / "features.inlgfeat"),
        "--pretrain-map", "--map-ckpt", str(mapping), "--tune-lm", "false", *TINY_FLAGS,
    ]) == EXIT_OK


def test_pretrain_map_without_checkpoint(world_dir, tmp_path):
    code = main([
        "train", "--run-dir", str(tmp_path / "run"), "--seed", "1",
        "--train", str(world_dir / "train.jsonl"),
        "--features", str(world_dir / "features.inlgfeat"),
        "--pretrain-map", "--map-ckpt", str(tmp_path / "absent.inlgckpt"), *TINY_FLAGS,
    ])
    assert code == EXIT_USAGE


def test_train_requires_seed(world_dir, tmp_path, capsys):
    code = main(["train", "--run-dir", str(tmp_path / "run"),
                 "--train", str(world_dir / "train.jsonl")])
    assert code == EXIT_USAGE
    assert "seed" in capsys.readouterr().err


def test_empty_metrics_input(tmp_path):
    """Пустой вход: код 2, отчёт не создаётся"""
    source = tmp_path / "empty.jsonl"
    source.write_text("", encoding="utf-8")
    out = tmp_path / "report.json"
    assert main(["eval-metrics", "--in", str(source), "--out", str(out)]) == EXIT_USAGE
    assert not out.exists()


def test_missing_input_file(tmp_path):
    assert main(["eval-metrics", "--in", str(tmp_path / "none.jsonl"),
                 "--out", str(tmp_path / "r.json")]) == EXIT_USAGE


@pytest.mark.parametrize("argv", [
    ["train", "--bogus-flag"],
    ["generate"],
    ["no-such-command"],
    ["train", "--run-dir", "x", "--mapping", "lstm"],
])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_gradcheck_passes(capsys):
    assert main(["gradcheck", "--model", "tiny", "--seed", "0", "--max-entries", "4"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[-1].startswith("max\t")
    assert float(out[-1].split("\t")[1]) < 1e-3


def test_gradcheck_failure_exit_code(mocker):
    mocker.patch("src.cli.main.tiny_model_gradcheck", return_value={"teacher": 0.5})
    assert main(["gradcheck"]) == EXIT_NUMERIC
    assert GradCheckFailed.exit_code == EXIT_NUMERIC


def test_unexpected_error_exit_code(mocker, capsys):
    """Непредвиденное исключение в подкоманде: код 3 и сообщение в stderr без трассировки"""
    mocker.patch("src.cli.main.tiny_model_gradcheck", side_effect=RuntimeError("сломалось"))
    assert main(["gradcheck"]) == EXIT_NUMERIC
    err = capsys.readouterr().err
    assert "RuntimeError: сломалось" in err
    assert "Traceback" not in err


def test_inspect_checkpoint(world_dir, tmp_path, capsys):
    run = tmp_path / "run"
    assert main([
        "train", "--run-dir", str(run), "--seed", "1",
        "--train", str(world_dir / "train.jsonl"),
        "--features", str(world_dir / "features.inlgfeat"), *TINY_FLAGS,
    ]) == EXIT_OK
    capsys.readouterr()
    assert main(["inspect-ckpt", "--ckpt", str(run / "ckpt" / "ep000.inlgckpt")]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert "model.prefix_len=2" in out
    assert any(line.startswith("vocab=<") for line in out)
    assert out[-1].startswith("params\t")


def test_inspect_corrupted_checkpoint(tmp_path):
    path = tmp_path / "bad.inlgckpt"
    path.write_bytes(b"NOTACKPT" + b"\x00" * 16)
    assert main(["inspect-ckpt", "--ckpt", str(path)]) == EXIT_USAGE


def test_ablate_contrastive(world_dir, tmp_path, capsys):
    run = tmp_path / "abl"
    code = main([
        "ablate", "--run-dir", str(run), "--grid", "contrastive", "--seeds", "1",
        "--train", str(world_dir / "train.jsonl"), "--val", str(world_dir / "val.jsonl"),
        "--features", str(world_dir / "features.inlgfeat"), *TINY_FLAGS,
    ])
    assert code == EXIT_OK
    result = json.loads((run / "ablation.json").read_text(encoding="utf-8"))
    assert len(result["cells"]) == 2
    assert "seed=1" in (run / "config.snapshot").read_text(encoding="utf-8").splitlines()


def test_ablate_bad_seeds(tmp_path):
    assert main(["ablate", "--run-dir", str(tmp_path), "--grid", "tuning",
                 "--seeds", "a,b"]) == EXIT_USAGE
