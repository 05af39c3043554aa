import dataclasses

import numpy as np
import pytest

from src.errors import ContractViolation, StartupError
from src.model.vglm import VisuallyGuidedLM
from src.training.config import TrainConfig
from src.training.finetune import (
    TrainingHooks, assemble_model, build_initial_model, finetune, train_step, trainable_names
)
from src.model.projection import PREFIX as HEAD_PREFIX
from src.numcore.optim import OptimizerState
from src.training.run_dir import LOG_KEYS, RunDir, read_log


def _cfg(**overrides):
    base = dict(seed=3, epochs=2, batch_size=8, lr=1e-2, warmup_steps=0,
                n_no_contra=0, lambda_=0.0)
    return TrainConfig(**{**base, **overrides})


def _same_params(a, b):
    return a.keys() == b.keys() and all(np.array_equal(a[n], b[n]) for n in a)


def test_frozen_lm_stays_bitwise(world_corpus):
    """tune_lm=false: параметры LM побитово неизменны, отображающая сеть обучается"""
    train, _, vocab, cfg = world_corpus
    model = VisuallyGuidedLM.init(cfg, 3, vocab)
    result = finetune(model, train, _cfg(tune_lm=False, lambda_=1.0))

    for name in model.lm_names:
        assert np.array_equal(result.model.params[name], model.params[name]), name
    assert any(
        not np.array_equal(result.model.params[n], model.params[n]) for n in model.map_names
    )


def test_all_frozen_warns(world_corpus, mock_logger):
    train, _, vocab, cfg = world_corpus
    model = VisuallyGuidedLM.init(cfg, 3, vocab)
    result = finetune(model, train, _cfg(epochs=1, tune_lm=False, tune_map=False),
                      hooks=TrainingHooks(log_callback=mock_logger))
    assert _same_params(result.model.params, model.params)
    assert any(level == "warning" for _, level in mock_logger.logs)


def test_phase_one_matches_teacher_only(world_corpus):
    """До эпохи n_no_contra обучение с lambda=1 совпадает с lambda=0"""
    train, _, vocab, cfg = world_corpus
    model = VisuallyGuidedLM.init(cfg, 3, vocab)
    with_contra = finetune(model, train, _cfg(lambda_=1.0, n_no_contra=2))
    teacher_only = finetune(model, train, _cfg(lambda_=0.0, n_no_contra=2))

    assert _same_params(with_contra.model.params, teacher_only.model.params)
    assert all(r["contrastive"] == 0.0 and r["lambda_effective"] == 0.0
               for r in with_contra.log)


def test_phase_two_changes_training(world_corpus):
    train, _, vocab, cfg = world_corpus
    model = VisuallyGuidedLM.init(cfg, 3, vocab)
    with_contra = finetune(model, train, _cfg(epochs=2, lambda_=1.0, n_no_contra=1))
    teacher_only = finetune(model, train, _cfg(epochs=2, lambda_=0.0, n_no_contra=1))

    assert not _same_params(with_contra.model.params, teacher_only.model.params)
    second = [r for r in with_contra.log if r["ep"] == 1]
    assert second and all(r["lambda_effective"] == 1.0 for r in second)
    assert all(r["contrastive"] > 0 for r in second)


def test_lambda_zero_ignores_contrastive_settings(world_corpus):
    """lambda=0: tau и режим знаменателя не влияют на обучение"""
    train, _, vocab, cfg = world_corpus
    model = VisuallyGuidedLM.init(cfg, 3, vocab)
    a = finetune(model, train, _cfg(tau=0.07))
    b = finetune(model, train, _cfg(tau=2.0, denominator_mode="paper"))
    assert _same_params(a.model.params, b.model.params)


def test_training_is_deterministic(world_corpus):
    train, _, vocab, cfg = world_corpus
    model = VisuallyGuidedLM.init(cfg, 3, vocab)
    a = finetune(model, train, _cfg(lambda_=0.5))
    b = finetune(model, train, _cfg(lambda_=0.5))
    assert _same_params(a.model.params, b.model.params)
    assert a.log == b.log


def test_run_dir_outputs(world_corpus, tmp_path):
    """Журнал шагов, чекпоинты эпох и лучший чекпоинт"""
    train, val, vocab, cfg = world_corpus
    run_dir = RunDir(tmp_path / "run").prepare()
    model = VisuallyGuidedLM.init(cfg, 3, vocab)
    result = finetune(model, train, _cfg(), val_examples=val, run_dir=run_dir)

    records = read_log(run_dir.log_path)
    assert len(records) == result.steps == 2 * 6
    assert all(tuple(r) == LOG_KEYS for r in records)
    assert [r["step"] for r in records] == list(range(1, 13))
    assert run_dir.epoch_path(0).is_file() and run_dir.epoch_path(1).is_file()
    assert run_dir.best_path.is_file()
    assert result.best_val_ce == min(s["val_ce"] for s in result.epoch_losses)

    loaded, header = VisuallyGuidedLM.load(run_dir.epoch_path(1))
    assert header["epoch"] == "1"
    assert _same_params(loaded.params, result.model.params)


def test_stop_request(world_corpus, mock_logger):
    train, _, vocab, cfg = world_corpus
    model = VisuallyGuidedLM.init(cfg, 3, vocab)
    hooks = TrainingHooks(log_callback=mock_logger, should_stop=lambda: True)
    result = finetune(model, train, _cfg(), hooks=hooks)
    assert result.stopped
    assert result.steps == 0
    assert any("остановлено" in msg for msg, _ in mock_logger.logs)


def test_empty_corpus(world_corpus):
    _, _, vocab, cfg = world_corpus
    with pytest.raises(ContractViolation):
        finetune(VisuallyGuidedLM.init(cfg, 3, vocab), [], _cfg())


def test_trainable_names(tiny_config):
    model = VisuallyGuidedLM.init(tiny_config, 0)
    assert trainable_names(model, True, True) == model.lm_names + model.map_names
    assert trainable_names(model, False, True) == model.map_names
    assert trainable_names(model, False, False) == []


def test_assemble_copies_groups(world_corpus):
    _, _, vocab, cfg = world_corpus
    lm_source = VisuallyGuidedLM.init(cfg, 11, vocab)
    map_source = VisuallyGuidedLM.init(cfg, 12, vocab)
    model = assemble_model(cfg, vocab, 3, lm_source=lm_source, map_source=map_source)
    for name in model.lm_names:
        assert np.array_equal(model.params[name], lm_source.params[name])
    for name in model.map_names:
        assert np.array_equal(model.params[name], map_source.params[name])


def test_pretrain_map_requires_checkpoint(world_corpus, tmp_path):
    _, _, vocab, cfg = world_corpus
    with pytest.raises(StartupError):
        build_initial_model(cfg, vocab, _cfg(pretrain_map=True),
                            map_ckpt=tmp_path / "missing.inlgckpt")


def test_pretrain_map_requires_prefix(world_corpus, tmp_path):
    _, _, vocab, cfg = world_corpus
    text_only = dataclasses.replace(cfg, prefix_len=0)
    with pytest.raises(StartupError):
        build_initial_model(text_only, vocab, _cfg(pretrain_map=True),
                            map_ckpt=tmp_path / "mapping.inlgckpt")


def test_build_initial_model_loads_mapping(world_corpus, tmp_path):
    _, _, vocab, cfg = world_corpus
    source = VisuallyGuidedLM.init(cfg, 21, vocab)
    path = source.save(tmp_path / "mapping.inlgckpt")
    model = build_initial_model(cfg, vocab, _cfg(pretrain_map=True), map_ckpt=path)
    for name in model.map_names:
        assert np.array_equal(model.params[name], source.params[name])
    fresh = VisuallyGuidedLM.init(cfg, 3, vocab)
    for name in model.lm_names:
        assert np.array_equal(model.params[name], fresh.params[name])


@pytest.mark.parametrize("kwargs", [
    {"epochs": 0},
    {"batch_size": 0},
    {"lr": -1.0},
    {"tau": 0.0},
    {"loss_reduction": "max"},
])
def test_invalid_train_config(kwargs):
    with pytest.raises(ContractViolation):
        _cfg(**kwargs)


@pytest.mark.parametrize("grad_clip", [1.0, 1e-4])
def test_teacher_only_step_with_head_in_lm_group(tiny_config, tiny_batch, grad_clip):
    """lambda=0: голова не попадает в граф, шаг идёт, голова получает только затухание"""
    model = VisuallyGuidedLM.init(tiny_config, 0)
    cfg = _cfg(lambda_=0.0, tune_lm=True, grad_clip=grad_clip)
    names = trainable_names(model, cfg.tune_lm, cfg.tune_map)
    lr = 1e-2
    state = OptimizerState(lr=lr, weight_decay=cfg.weight_decay)

    updated, state, breakdown = train_step(model, state, tiny_batch, 0, lr, names, cfg)

    assert state.step == 1
    assert np.isfinite(breakdown.teacher)
    head = [n for n in model.params if n.startswith(HEAD_PREFIX)]
    assert head
    for name in head:
        w = model.params[name]
        expected = (w - lr * cfg.weight_decay * w).astype(w.dtype)
        np.testing.assert_allclose(updated.params[name], expected, rtol=1e-6, atol=1e-9)
    decoder = [n for n in model.lm_names if n not in head]
    assert any(not np.array_equal(updated.params[n], model.params[n]) for n in decoder)
