"""Line-oriented exchange with an external command.

The child reads one UTF-8 line per input on stdin and must write exactly one
line per input on stdout, in order.
"""

from __future__ import annotations

import shlex
import subprocess
from typing import Sequence, Union


class ExternalProcessError(RuntimeError):
    pass


class ExternalStartError(ExternalProcessError):
    pass


class ExternalExitError(ExternalProcessError):
    def __init__(self, command, returncode, stderr=""):
        msg = f"{command!r} exited with status {returncode}"
        if stderr:
            msg += f": {stderr.strip()[-500:]}"
        super().__init__(msg)
        self.returncode = returncode


class ExternalTimeoutError(ExternalProcessError):
    pass


class LineCountMismatch(ExternalProcessError):
    def __init__(self, expected: int, actual: int):
        super().__init__(f"expected {expected} output lines, got {actual}")
        self.expected = expected
        self.actual = actual


Command = Union[str, Sequence[str]]


def split_command(command: Command) -> list[str]:
    if isinstance(command, str):
        return shlex.split(command)
    return list(command)


def run_lines(command: Command, lines: Sequence[str], timeout: float = 600.0) -> list[str]:
    argv = split_command(command)
    for line in lines:
        if "\n" in line or "\r" in line:
            raise ValueError(f"input line contains a line break: {line!r}")
    payload = "".join(line + "\n" for line in lines)
    try:
        proc = subprocess.run(argv, input=payload, capture_output=True, text=True,
                              encoding="utf-8", timeout=timeout)
    except FileNotFoundError as e:
        raise ExternalStartError(f"cannot start {argv!r}: {e}") from e
    except PermissionError as e:
        raise ExternalStartError(f"cannot start {argv!r}: {e}") from e
    except subprocess.TimeoutExpired as e:
        raise ExternalTimeoutError(f"{argv!r} timed out after {timeout}s") from e
    if proc.returncode != 0:
        raise ExternalExitError(argv, proc.returncode, proc.stderr)
    out = proc.stdout.split("\n")
    if out and out[-1] == "":
        out.pop()
    if len(out) != len(lines):
        raise LineCountMismatch(len(lines), len(out))
    return [line.rstrip("\r") for line in out]
