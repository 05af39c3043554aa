import sys

MARKERS = {
    "info": "[*]",
    "warning": "[!]",
    "error": "[✗]",
    "debug": "[.]",
    "success": "[✓]",
}


class ConsoleLogger:
    """log_callback(message, level) в stderr; debug только при verbose."""

    def __init__(self, verbose: bool = False, stream=None):
        self.verbose = verbose
        self.stream = stream

    def __call__(self, message: str, level: str = "info") -> None:
        if level == "debug" and not self.verbose:
            return
        stream = self.stream if self.stream is not None else sys.stderr
        marker = MARKERS.get(level, "[*]")
        for line in str(message).strip("\n").splitlines() or [""]:
            print(f"{marker} {line}", file=stream)
        stream.flush()
