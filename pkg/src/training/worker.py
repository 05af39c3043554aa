import math
import time
import traceback

from PyQt6.QtCore import QObject, pyqtSignal

from src.errors import InlgError
from src.model.vglm import VisuallyGuidedLM
from src.textdata.corpus import Example
from src.training.config import PretrainConfig, TrainConfig
from src.training.finetune import TrainingHooks, TrainingResult, finetune
from src.training.pretrain import pretrain_mapping
from src.training.run_dir import RunDir


def format_duration(seconds: float | None) -> str:
    """Длительность обучения: секунды с десятыми, минуты с секундами или часы с минутами."""
    if seconds is None or not math.isfinite(seconds) or seconds < 0:
        return "?"
    if seconds < 60:
        return f"{seconds:.1f} с"
    total = int(seconds)
    if total < 3600:
        return f"{total // 60} мин {total % 60:02d} с"
    return f"{total // 3600} ч {total % 3600 // 60:02d} мин"


class TrainingWorker(QObject):
    """
    Обучение в отдельном объекте с сигналами Qt.
    CLI вызывает run() синхронно; GUI может перенести объект в QThread.
    После run() результат лежит в self.result, ошибка - в self.error.
    """
    progress = pyqtSignal(int, str)
    log_message = pyqtSignal(str, str)
    step_logged = pyqtSignal(dict)
    epoch_finished = pyqtSignal(int, dict)
    finished = pyqtSignal(bool)

    def __init__(
        self,
        model: VisuallyGuidedLM,
        train_examples: list[Example],
        config: TrainConfig | PretrainConfig,
        val_examples: list[Example] | None = None,
        run_dir: RunDir | None = None
    ):
        super().__init__()
        self.model = model
        self.train_examples = train_examples
        self.val_examples = val_examples
        self.config = config
        self.run_dir = run_dir
        self.is_pretrain = isinstance(config, PretrainConfig)

        self._is_running = True
        self._was_stopped_manually = False
        self.total_start_time = None
        self.result: TrainingResult | None = None
        self.error: Exception | None = None

    def _log(self, message, level="info"):
        self.log_message.emit(message, level)

    def calculate_eta(self, epochs_done: int, epochs_total: int) -> str:
        """Прошедшее время и оценка оставшегося по средней длительности эпохи."""
        if not self.total_start_time:
            return None
        elapsed = time.time() - self.total_start_time
        elapsed_str = format_duration(elapsed)
        if epochs_done <= 0:
            eta_str = "?"
        else:
            eta_str = format_duration(elapsed / epochs_done * (epochs_total - epochs_done))
        return f"Прошло: {elapsed_str} | Осталось: {eta_str}"

    def _on_epoch(self, ep: int, summary: dict):
        total = self.config.epochs
        percent = int((ep + 1) * 100 / total) if total else 100
        self.progress.emit(percent, self.calculate_eta(ep + 1, total))
        self.epoch_finished.emit(ep, summary)

    def _should_stop(self) -> bool:
        return not self._is_running

    def run(self):
        self.total_start_time = time.time()
        hooks = TrainingHooks(
            log_callback=self._log,
            on_step=self.step_logged.emit,
            on_epoch=self._on_epoch,
            should_stop=self._should_stop,
        )
        stage = "Предобучение" if self.is_pretrain else "Дообучение"
        self._log(f"--- {stage}: старт ---", "info")
        self.progress.emit(0, self.calculate_eta(0, self.config.epochs))
        try:
            if self.is_pretrain:
                self.result = pretrain_mapping(
                    self.model, self.train_examples, self.config,
                    run_dir=self.run_dir, hooks=hooks
                )
            else:
                self.result = finetune(
                    self.model, self.train_examples, self.config,
                    val_examples=self.val_examples, run_dir=self.run_dir, hooks=hooks
                )
        except InlgError as e:
            self.error = e
            self._log(f"{stage} прервано: {e}", "error")
            self.finished.emit(False)
            return
        except Exception as e:
            self.error = e
            self._log(f"Непредвиденная ошибка: {e}", "error")
            self._log(traceback.format_exc(), "debug")
            self.finished.emit(False)
            return

        elapsed = format_duration(time.time() - self.total_start_time)
        if self.result.stopped:
            self._log(f"--- {stage} остановлено пользователем ({elapsed}) ---", "warning")
        else:
            self._log(f"--- {stage} завершено за {elapsed}, шагов: {self.result.steps} ---", "info")
        self.finished.emit(not self._was_stopped_manually)

    def stop(self):
        self._log("Получен запрос на остановку...", "warning")
        self._is_running = False
        self._was_stopped_manually = True
