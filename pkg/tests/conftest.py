from __future__ import annotations

import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from refhist.ingest import EditorIdentity, EditorKind, RevisionRecord  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"
T0 = datetime(2010, 1, 1, tzinfo=timezone.utc)


def editor(name="Alice", kind=EditorKind.REGISTERED):
    if kind is EditorKind.NONREGISTERED:
        return EditorIdentity(kind, ip=name)
    return EditorIdentity(kind, user_name=name)


def revisions(texts, article_id=1, start_id=1, step=timedelta(days=1), editors=None, title="T"):
    """RevisionRecords for consecutive texts."""
    out = []
    for i, text in enumerate(texts):
        e = editors[i] if editors else editor(f"Ed{i % 3}")
        out.append(RevisionRecord(article_id, title, start_id + i, T0 + i * step, e, text))
    return out


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    verdicts = getattr(sys.modules.get("test_acceptance"), "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for line in verdicts:
            terminalreporter.write_line(line)
