"""
Точка входа командной строки.

Коды выхода: 0 - успех, 2 - ошибка использования или входных данных,
3 - численный сбой, проваленная проверка градиента или иной сбой во время выполнения.
"""
import argparse
import json
import traceback
from pathlib import Path

from src.app_config import (
    ABLATION_GRIDS, APP_NAME, DEFAULT_D_V, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, GRADCHECK_EPS,
    GRADCHECK_MAX_ENTRIES, GRADCHECK_THRESHOLD, SYNTHETIC_NOISE_STD,
    SYNTHETIC_NUM_ATTRIBUTES, SYNTHETIC_SPLITS, VOCAB_MODES
)
from src.cli.config import SCHEMA, RunConfig, parse_value, resolve_config
from src.cli.console import ConsoleLogger
from src.decoding.generate import generate, write_generations
from src.errors import ConfigError, GradCheckFailed, InlgError, StartupError
from src.metrics.degeneration import DISTINCT_DENOMINATORS
from src.metrics.report import read_texts, report, write_report
from src.model.vglm import VisuallyGuidedLM
from src.numcore.checkpoint import load_checkpoint
from src.textdata.corpus import load_corpus, read_jsonl_records
from src.textdata.features import read_features
from src.textdata.synthetic import SyntheticWorldSpec, gen_synthetic
from src.training.ablation import run_ablation
from src.training.diagnostics import tiny_model_gradcheck
from src.training.finetune import build_initial_model
from src.training.run_dir import RunDir
from src.training.worker import TrainingWorker

DECODE_KEYS = ("beam", "max_len", "alpha", "task_preset", "paper_hparams", "lowercase")


def _add_config_flags(parser: argparse.ArgumentParser, keys) -> None:
    group = parser.add_argument_group("конфигурация (перекрывает --config)")
    for key in keys:
        spec = SCHEMA[key]
        flag = "--" + key.replace("_", "-")
        kwargs = {"dest": key, "default": None, "help": spec.help or None}
        if spec.kind == "bool":
            kwargs.update(nargs="?", const="true", metavar="true|false")
        elif spec.choices is not None:
            kwargs["choices"] = spec.choices
        group.add_argument(flag, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", action="store_true", help="отладочные сообщения")

    configured = argparse.ArgumentParser(add_help=False)
    configured.add_argument("--config", type=Path, help="файл key=value")

    parser = argparse.ArgumentParser(
        prog=APP_NAME,
        description="Генерация текста с визуальным префиксом (настольный масштаб)",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="<команда>")

    p = sub.add_parser("make-synthetic", parents=[common], help="синтетический мир")
    p.add_argument("--out", type=Path, required=True, help="каталог для JSONL и признаков")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d-v", type=int, default=DEFAULT_D_V)
    p.add_argument("--num-attributes", type=int, default=SYNTHETIC_NUM_ATTRIBUTES)
    p.add_argument("--noise-std", type=float, default=SYNTHETIC_NOISE_STD)
    p.add_argument("--train-size", type=int, default=SYNTHETIC_SPLITS["train"])
    p.add_argument("--val-size", type=int, default=SYNTHETIC_SPLITS["val"])
    p.set_defaults(handler=cmd_make_synthetic)

    for name, handler, help_text in (
        ("pretrain-map", cmd_pretrain_map, "предобучение отображающей сети"),
        ("train", cmd_train, "дообучение"),
    ):
        p = sub.add_parser(name, parents=[common, configured], help=help_text)
        p.add_argument("--run-dir", type=Path, required=True)
        _add_config_flags(p, SCHEMA)
        p.set_defaults(handler=handler)

    p = sub.add_parser("generate", parents=[common, configured], help="лучевой поиск")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--in", dest="input", type=Path, required=True, help="JSONL с контекстами")
    p.add_argument("--features", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True, help="выходной JSONL")
    p.add_argument("--workers", type=int, default=1)
    _add_config_flags(p, DECODE_KEYS)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("eval-metrics", parents=[common], help="метрики вырождения")
    p.add_argument("--in", dest="input", type=Path, required=True, help="JSONL {id, text}")
    p.add_argument("--out", type=Path, required=True, help="JSON-отчёт")
    p.add_argument("--csv", type=Path, default=None, help="таблица по текстам")
    p.add_argument("--vocab-mode", choices=VOCAB_MODES, default="word")
    p.add_argument("--lowercase", nargs="?", const="true", default="true", metavar="true|false")
    p.add_argument("--distinct-denominator", choices=DISTINCT_DENOMINATORS, default="tokens")
    p.set_defaults(handler=cmd_eval_metrics)

    p = sub.add_parser("gradcheck", parents=[common], help="проверка градиентов")
    p.add_argument("--model", choices=("tiny",), default="tiny")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=GRADCHECK_EPS)
    p.add_argument("--max-entries", type=int, default=GRADCHECK_MAX_ENTRIES)
    p.add_argument("--threshold", type=float, default=GRADCHECK_THRESHOLD)
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser("inspect-ckpt", parents=[common], help="заголовок и тензоры чекпоинта")
    p.add_argument("--ckpt", type=Path, required=True)
    p.set_defaults(handler=cmd_inspect_ckpt)

    p = sub.add_parser("ablate", parents=[common, configured], help="абляции")
    p.add_argument("--run-dir", type=Path, required=True)
    p.add_argument("--grid", choices=ABLATION_GRIDS, required=True)
    p.add_argument("--seeds", default="1,2,3", help="список через запятую")
    _add_config_flags(p, SCHEMA)
    p.set_defaults(handler=cmd_ablate)
    return parser


def _resolve(args, keys=SCHEMA) -> RunConfig:
    flags = {key: getattr(args, key, None) for key in keys}
    return resolve_config(file=args.config, flags=flags)


def _require_seed(run_config: RunConfig) -> int:
    if run_config["seed"] is None:
        raise ConfigError("Не задан --seed: обучение без явного seed не запускается", key="seed")
    return run_config["seed"]


def _require_path(run_config: RunConfig, key: str) -> Path:
    path = run_config.path(key)
    if path is None:
        raise StartupError(f"Не задан путь '{key}' (--{key.replace('_', '-')})")
    return path


def _read_features(run_config: RunConfig):
    path = run_config.path("features")
    return read_features(path) if path is not None else None


def _start_run(args, run_config: RunConfig, log) -> RunDir:
    run_dir = RunDir(args.run_dir).prepare()
    run_config.write_snapshot(run_dir.snapshot_path)
    log(f"Конфигурация сохранена: {run_dir.snapshot_path}", "debug")
    return run_dir


def _run_worker(worker: TrainingWorker, log):
    worker.log_message.connect(log)
    worker.run()
    if worker.error is not None:
        raise worker.error
    return worker.result


def cmd_make_synthetic(args, log) -> None:
    spec = SyntheticWorldSpec(
        num_attributes=args.num_attributes,
        d_v=args.d_v,
        noise_std=args.noise_std,
        examples_per_split={"train": args.train_size, "val": args.val_size},
    )
    paths = gen_synthetic(spec, args.seed, args.out, log_callback=log)
    for key, path in paths.items():
        print(f"{key}\t{path}")


def cmd_pretrain_map(args, log) -> None:
    run_config = _resolve(args)
    seed = _require_seed(run_config)
    run_dir = _start_run(args, run_config, log)
    features = _read_features(run_config)
    train, vocab = load_corpus(
        _require_path(run_config, "train"), run_config["vocab_mode"], features,
        lowercase=run_config["lowercase"], log_callback=log
    )
    vocab.save(run_dir.vocab_path)

    model = VisuallyGuidedLM.init(run_config.model_config(len(vocab)), seed, vocab)
    worker = TrainingWorker(model, train, run_config.pretrain_config(), run_dir=run_dir)
    _run_worker(worker, log)
    print(run_dir.mapping_path)


def cmd_train(args, log) -> None:
    run_config = _resolve(args)
    _require_seed(run_config)
    run_dir = _start_run(args, run_config, log)
    train_cfg = run_config.train_config()

    map_ckpt = run_config.path("map_ckpt")
    lm_ckpt = run_config.path("lm_ckpt")
    if lm_ckpt is None and train_cfg.pretrain_map:
        # LM предобучалась вместе с отображающей сетью
        lm_ckpt = map_ckpt
    vocab = None
    if lm_ckpt is not None:
        if not lm_ckpt.is_file():
            raise StartupError(f"Чекпоинт LM не найден: {lm_ckpt}")
        vocab = VisuallyGuidedLM.load(lm_ckpt)[0].vocab

    features = _read_features(run_config)
    train, vocab = load_corpus(
        _require_path(run_config, "train"), run_config["vocab_mode"], features, vocab,
        lowercase=run_config["lowercase"], log_callback=log
    )
    vocab.save(run_dir.vocab_path)
    val = None
    if run_config.path("val") is not None:
        val, _ = load_corpus(run_config.path("val"), run_config["vocab_mode"], features, vocab,
                             lowercase=run_config["lowercase"], log_callback=log)

    model = build_initial_model(
        run_config.model_config(len(vocab)), vocab, train_cfg,
        lm_ckpt=lm_ckpt, map_ckpt=map_ckpt if train_cfg.pretrain_map else None,
        log_callback=log
    )
    result = _run_worker(TrainingWorker(model, train, train_cfg, val, run_dir), log)
    if result.best_val_ce is not None:
        log(f"Лучшая валидационная CE: {result.best_val_ce:.4f} ({run_dir.best_path})", "success")
    print(run_dir.path)


def cmd_generate(args, log) -> None:
    run_config = _resolve(args, DECODE_KEYS)
    model, _ = VisuallyGuidedLM.load(args.ckpt)
    records = read_jsonl_records(args.input, require_target=False)
    features = read_features(args.features) if args.features is not None else None
    results = generate(model, records, features, run_config.decode_config(),
                       workers=args.workers, lowercase=run_config["lowercase"],
                       log_callback=log)
    write_generations(results, args.out)
    for r in results:
        if r.error is None:
            print(f"{r.id}\t{r.text}")


def cmd_eval_metrics(args, log) -> None:
    lowercase = parse_value("lowercase", args.lowercase)
    texts = read_texts(args.input, log_callback=log)
    result = report(texts, args.vocab_mode, lowercase, args.distinct_denominator)
    write_report(result, args.out, args.csv)
    print(json.dumps(result.as_dict(), ensure_ascii=False))


def cmd_gradcheck(args, log) -> None:
    errors = tiny_model_gradcheck(seed=args.seed, eps=args.eps,
                                  max_entries=args.max_entries, log_callback=log)
    for name, error in errors.items():
        print(f"{name}\t{error:.3e}")
    worst = max(errors.values())
    print(f"max\t{worst:.3e}")
    if worst >= args.threshold:
        raise GradCheckFailed(
            f"Относительная ошибка {worst:.3e} >= порога {args.threshold:g}", max_error=worst
        )
    log(f"Градиенты совпадают с конечными разностями ({worst:.3e})", "success")


def cmd_inspect_ckpt(args, log) -> None:
    tensors, header = load_checkpoint(args.ckpt)
    for key, value in header.items():
        if key == "vocab":
            value = f"<{len(json.loads(value)['tokens'])} токенов>"
        print(f"{key}={value}")
    total = 0
    for name, array in tensors.items():
        total += array.size
        print(f"{name}\t{tuple(array.shape)}")
    print(f"params\t{total}")


def cmd_ablate(args, log) -> None:
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"Некорректный список seed: '{args.seeds}'", key="seeds")
    if not seeds:
        raise ConfigError("Пустой список seed", key="seeds")
    run_config = _resolve(args)
    if run_config["seed"] is None:
        run_config.values["seed"] = seeds[0]
    run_dir = _start_run(args, run_config, log)

    features = _read_features(run_config)
    train, vocab = load_corpus(
        _require_path(run_config, "train"), run_config["vocab_mode"], features,
        lowercase=run_config["lowercase"], log_callback=log
    )
    val, _ = load_corpus(_require_path(run_config, "val"), run_config["vocab_mode"],
                         features, vocab, lowercase=run_config["lowercase"])
    vocab.save(run_dir.vocab_path)
    result = run_ablation(
        args.grid, run_config.model_config(len(vocab)), run_config.train_config(), vocab,
        train, val, seeds, pretrain_cfg=run_config.pretrain_config(),
        out_dir=run_dir.path, log_callback=log
    )
    log(f"Лучшая ячейка: {result['best']}", "success")
    print(json.dumps(result, ensure_ascii=False))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse уже напечатал usage
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    log = ConsoleLogger(verbose=args.verbose)
    try:
        args.handler(args, log)
    except InlgError as e:
        log(f"{type(e).__name__}: {e}", "error")
        return e.exit_code
    except FileNotFoundError as e:
        log(str(e), "error")
        return EXIT_USAGE
    except Exception as e:
        # прочие сбои во время выполнения попадают в тот же код, что и численные
        log(f"Непредвиденная ошибка {type(e).__name__}: {e}", "error")
        log(traceback.format_exc(), "debug")
        return EXIT_NUMERIC
    return EXIT_OK
