"""
Exception types shared by the voting pipeline and the exit codes the CLI maps them to.
"""
from typing import Optional, Sequence

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_EXTERNAL = 3


class VotingDataError(ValueError):
    """Input data (hypotheses, llocs, GT, predictions) is inconsistent or malformed."""


class LlocsFormatError(VotingDataError):
    def __init__(self, message: str, line_no: Optional[int] = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class DegenerateTableError(VotingDataError):
    """A 2x2 contingency table with an empty margin has no chi-square statistic."""


class ConfigError(ValueError):
    pass


class ExternalCommandError(RuntimeError):
    def __init__(self, command: Sequence[str], returncode: int):
        self.command = list(command)
        self.returncode = returncode
        super().__init__(f"External command failed with exit status {returncode}: {' '.join(self.command)}")
