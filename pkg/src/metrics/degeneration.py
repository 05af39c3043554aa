"""
Метрики вырождения текста:

rep-n      = 1 - |уникальные n-граммы| / |все n-граммы|;
diversity  = (1 - rep-2)(1 - rep-3)(1 - rep-4);
distinct-n = |уникальные n-граммы| / |длина текста| (или / |все n-граммы|).
"""
from dataclasses import dataclass

from src.errors import ContractViolation

DISTINCT_DENOMINATORS = ("tokens", "ngrams")
REP_ORDERS = (2, 3, 4)


def ngrams(tokens, n: int) -> list[tuple]:
    if n < 1:
        raise ContractViolation(f"Порядок n-грамм должен быть >= 1: {n}")
    tokens = list(tokens)
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def rep_n(tokens, n: int) -> float:
    grams = ngrams(tokens, n)
    if not grams:
        return 0.0
    return 1.0 - len(set(grams)) / len(grams)


def diversity(tokens) -> float:
    result = 1.0
    for n in REP_ORDERS:
        result *= 1.0 - rep_n(tokens, n)
    return result


def distinct_n(tokens, n: int, denominator: str = "tokens") -> float | None:
    """None для пустого текста: метрика для него не определена."""
    if denominator not in DISTINCT_DENOMINATORS:
        raise ContractViolation(f"Неизвестный знаменатель distinct-n: {denominator}")
    tokens = list(tokens)
    grams = ngrams(tokens, n)
    if not tokens:
        return None
    if denominator == "tokens":
        return len(set(grams)) / len(tokens)
    return len(set(grams)) / len(grams) if grams else 0.0


@dataclass
class TextMetrics:
    id: str
    tokens: int
    rep_2: float
    rep_3: float
    rep_4: float
    diversity: float
    distinct_2: float | None

    @classmethod
    def compute(cls, text_id: str, tokens, denominator: str = "tokens") -> "TextMetrics":
        tokens = list(tokens)
        reps = {n: rep_n(tokens, n) for n in REP_ORDERS}
        return cls(
            id=text_id,
            tokens=len(tokens),
            rep_2=reps[2],
            rep_3=reps[3],
            rep_4=reps[4],
            # произведение уже вычисленных rep-n
            diversity=(1.0 - reps[2]) * (1.0 - reps[3]) * (1.0 - reps[4]),
            distinct_2=distinct_n(tokens, 2, denominator),
        )
