import sys
import textwrap
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from noisycorpus.corpus import LabeledSentence, parse_conll  # noqa: E402

CLEAN_SENTENCE = "No new fixtures reported from New York ."
NOISY_SENTENCE = "No nzw fixtuvzs reported from New Vork ."
SENTENCE_LABELS = ["O", "O", "O", "O", "O", "B-LOC", "I-LOC", "O"]

# noisy token, clean token, label
NOISY_CONLL = """\
No\tNo\tO
nzw\tnew\tO
fixtuvzs\tfixtures\tO
reported\treported\tO
from\tfrom\tO
New\tNew\tB-LOC
Vork\tYork\tI-LOC
.\t.\tO
"""

CLEAN_CONLL = """\
No\tO
new\tO
fixtures\tO
reported\tO
from\tO
New\tB-LOC
York\tI-LOC
.\tO
"""


@pytest.fixture
def clean_sentence():
    return LabeledSentence(CLEAN_SENTENCE.split(), SENTENCE_LABELS)


@pytest.fixture
def clean_dataset():
    return parse_conll(CLEAN_CONLL)


def _script(tmp_path, name, body):
    path = tmp_path / f"{name}.py"
    path.write_text(textwrap.dedent(body))
    return [sys.executable, str(path)]


@pytest.fixture
def scripts(tmp_path):
    """Small line-protocol commands used as external generators and correctors."""
    return {
        "identity": _script(tmp_path, "identity", """
            import sys
            for line in sys.stdin:
                sys.stdout.write(line)
            """),
        "upper": _script(tmp_path, "upper", """
            import sys
            for line in sys.stdin:
                sys.stdout.write(line.upper())
            """),
        "fewer": _script(tmp_path, "fewer", """
            import sys
            lines = sys.stdin.readlines()
            sys.stdout.writelines(lines[:-1])
            """),
        "fail": _script(tmp_path, "fail", """
            import sys
            sys.stdin.read()
            sys.stderr.write("boom\\n")
            sys.exit(3)
            """),
        "slow": _script(tmp_path, "slow", """
            import sys, time
            sys.stdin.read()
            time.sleep(30)
            """),
        "fix_vork": _script(tmp_path, "fix_vork", """
            import sys
            for line in sys.stdin:
                sys.stdout.write(line.replace("Vork", "York"))
            """),
        "merge_first": _script(tmp_path, "merge_first", """
            import sys
            for line in sys.stdin:
                words = line.split()
                sys.stdout.write(" ".join([words[0] + words[1]] + words[2:]) + "\\n")
            """),
        "paper_noise": _script(tmp_path, "paper_noise", f"""
            import sys
            for line in sys.stdin:
                sys.stdout.write({NOISY_SENTENCE!r} + "\\n")
            """),
    }


# -- acceptance summary -------------------------------------------------------

# criterion id -> (passed, title, detail); filled by test_acceptance
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, title, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
