class InlgError(Exception):
    """Базовое исключение проекта. exit_code используется CLI."""

    exit_code = 2


class ContractViolation(InlgError, ValueError):
    """Нарушение контракта: несовпадение форм, пустая маска и т.п."""


class NumericFault(InlgError):
    """NaN/Inf в вычислениях. node_id указывает на узел графа."""

    exit_code = 3

    def __init__(self, message: str, node_id: int | None = None,
                 step: int | None = None):
        super().__init__(message)
        self.node_id = node_id
        self.step = step

    def __str__(self):
        parts = [super().__str__()]
        if self.node_id is not None:
            parts.append(f"узел #{self.node_id}")
        if self.step is not None:
            parts.append(f"шаг {self.step}")
        return " | ".join(parts)


class IngestError(InlgError):
    """Ошибка чтения корпуса (битый JSON, пустая цель)."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"строка {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class DanglingReferenceError(InlgError):
    """feature_id из корпуса отсутствует в таблице признаков."""

    def __init__(self, feature_id: str, line_no: int | None = None):
        message = f"Признак '{feature_id}' не найден в таблице признаков"
        if line_no is not None:
            message = f"строка {line_no}: {message}"
        super().__init__(message)
        self.feature_id = feature_id
        self.line_no = line_no


class FormatError(InlgError):
    """Повреждённый или неизвестный бинарный формат."""


class LengthOverflowError(InlgError):
    """Последовательность не помещается в max_positions."""

    def __init__(self, message: str, example_id: str | None = None):
        if example_id is not None:
            message = f"[{example_id}] {message}"
        super().__init__(message)
        self.example_id = example_id


class StartupError(InlgError):
    """Запуск невозможен: не хватает файлов или чекпоинтов."""


class ConfigError(InlgError):
    """Неизвестный ключ или некорректное значение конфигурации."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class GradCheckFailed(InlgError):
    """Аналитический градиент расходится с конечными разностями."""

    exit_code = 3

    def __init__(self, message: str, max_error: float):
        super().__init__(message)
        self.max_error = max_error
