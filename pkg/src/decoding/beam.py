"""
Лучевой поиск по лог-вероятностям следующего токена.

Проход ширины w: кандидаты ранжируются по (-logprob, id токена, порядок
вставки родителя); кандидат с EOS, попавший в первые w мест, уходит в пул
завершённых; остальные продолжают, пока живых не станет w.
Итоговый пул - объединение проходов ширины 1, 2, 4, ... < W и W, поэтому
ширина 1 совпадает с жадным декодированием, а лучший результат не убывает с W.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from src.app_config import DEFAULT_BEAM_WIDTH, DEFAULT_LENGTH_ALPHA, EOS_ID
from src.errors import ContractViolation

# список продолжений одинаковой длины -> лог-вероятности (k, V)
Scorer = Callable[[list[list[int]]], np.ndarray]


@dataclass(frozen=True)
class DecodeConfig:
    beam_width: int = DEFAULT_BEAM_WIDTH
    max_output_len: int = 100
    length_alpha: float = DEFAULT_LENGTH_ALPHA
    eos_id: int = EOS_ID

    def __post_init__(self):
        if self.beam_width < 1:
            raise ContractViolation(f"beam_width должен быть >= 1: {self.beam_width}")
        if self.max_output_len < 1:
            raise ContractViolation(f"max_output_len должен быть >= 1: {self.max_output_len}")
        if self.length_alpha < 0:
            raise ContractViolation(f"alpha не может быть отрицательной: {self.length_alpha}")


@dataclass(frozen=True)
class BeamHypothesis:
    tokens: tuple[int, ...]
    logprob: float
    finished: bool
    order: int = 0

    def score(self, alpha: float = 0.0) -> float:
        if alpha > 0 and self.tokens:
            return self.logprob / (len(self.tokens) ** alpha)
        return self.logprob


def width_ladder(width: int) -> list[int]:
    ladder = []
    w = 1
    while w < width:
        ladder.append(w)
        w *= 2
    ladder.append(width)
    return ladder


def _rank(alive: list[BeamHypothesis], logprobs: np.ndarray) -> list[tuple[int, int, float]]:
    """Все кандидаты (родитель, токен, logprob) в порядке ранжирования."""
    k, vocab = logprobs.shape
    base = np.array([h.logprob for h in alive], dtype=np.float64)
    totals = (base[:, None] + logprobs).reshape(-1)
    parents = np.repeat(np.arange(k), vocab)
    tokens = np.tile(np.arange(vocab), k)
    # lexsort: последний ключ главный
    order = np.lexsort((parents, tokens, -totals))
    return [(int(parents[i]), int(tokens[i]), float(totals[i])) for i in order]


def beam_pass(scorer: Scorer, width: int, cfg: DecodeConfig) -> list[BeamHypothesis]:
    alive = [BeamHypothesis(tokens=(), logprob=0.0, finished=False, order=0)]
    completed: list[BeamHypothesis] = []
    counter = 1

    for _ in range(cfg.max_output_len):
        logprobs = np.asarray(scorer([list(h.tokens) for h in alive]), dtype=np.float64)
        if logprobs.ndim != 2 or logprobs.shape[0] != len(alive):
            raise ContractViolation(
                f"Оценщик вернул форму {logprobs.shape}, ожидалось ({len(alive)}, V)"
            )
        next_alive = []
        for rank, (parent, token, total) in enumerate(_rank(alive, logprobs)):
            if len(next_alive) >= width and rank >= width:
                break
            hyp = BeamHypothesis(
                tokens=alive[parent].tokens + (token,), logprob=total,
                finished=token == cfg.eos_id, order=counter,
            )
            counter += 1
            if hyp.finished:
                if rank < width:
                    completed.append(hyp)
            elif len(next_alive) < width:
                next_alive.append(hyp)
        alive = next_alive
        if not alive:
            break
        # ширина 1 - жадный проход: EOS на первом месте завершает его
        if width == 1 and completed:
            alive = []
            break
        # без нормировки длины логарифм вероятности только убывает
        if cfg.length_alpha == 0 and completed:
            if max(h.logprob for h in completed) >= max(h.logprob for h in alive):
                alive = []
                break

    # достигнут предел длины: принудительное завершение
    completed.extend(alive)
    return completed


def _ranking_key(hyp: BeamHypothesis, alpha: float):
    return (-hyp.score(alpha), hyp.tokens, hyp.order)


def beam_search(scorer: Scorer, cfg: DecodeConfig) -> list[BeamHypothesis]:
    """До beam_width гипотез, отсортированных по убыванию score."""
    pool: dict[tuple[int, ...], BeamHypothesis] = {}
    for width in width_ladder(cfg.beam_width):
        for hyp in beam_pass(scorer, width, cfg):
            if hyp.tokens not in pool:
                pool[hyp.tokens] = hyp
    ranked = sorted(pool.values(), key=lambda h: _ranking_key(h, cfg.length_alpha))
    return ranked[:cfg.beam_width]


def greedy_decode(scorer: Scorer, max_output_len: int, eos_id: int = EOS_ID) -> BeamHypothesis:
    """Жадный выбор argmax (при равенстве - меньший id токена)."""
    tokens: list[int] = []
    logprob = 0.0
    for _ in range(max_output_len):
        row = np.asarray(scorer([tokens]), dtype=np.float64)[0]
        token = int(np.argmax(row))
        tokens.append(token)
        logprob += float(row[token])
        if token == eos_id:
            return BeamHypothesis(tuple(tokens), logprob, finished=True)
    return BeamHypothesis(tuple(tokens), logprob, finished=False)
