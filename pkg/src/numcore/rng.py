"""
Детерминированные генераторы случайных чисел.

Используется счётчиковый генератор Philox из NumPy. Один корневой seed
расщепляется по потребителям через SeedSequence, поэтому, например,
включение dropout не сдвигает порядок батчей.
"""
import numpy as np

CONSUMERS = {
    "init": 1,
    "data": 2,
    "dropout": 3,
    "synthetic": 4,
    "gradcheck": 5,
}


def make_rng(seed: int, consumer: str, *extra: int) -> np.random.Generator:
    """Генератор для потребителя consumer; extra - дополнительные ключи (например, эпоха)."""
    if consumer not in CONSUMERS:
        raise KeyError(f"Неизвестный потребитель RNG: {consumer}")
    entropy = [int(seed), CONSUMERS[consumer], *[int(e) for e in extra]]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def epoch_seed(seed: int, epoch: int) -> int:
    """Seed перемешивания для конкретной эпохи."""
    return int(make_rng(seed, "data", epoch).integers(0, 2 ** 31 - 1))
