import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent / "oracles"))

from authorprof.graph import CommunityGraph
from authorprof.text import LabeledDocument, normalize


@pytest.fixture
def triangle_pendant():
    """Triangle a-b-c with pendant d hanging off c."""
    return CommunityGraph.from_edges([("a", "b"), ("b", "c"), ("a", "c"), ("c", "d")])


def make_doc(i, author, label, text):
    return LabeledDocument(f"d{i}", author, text, label, normalize(text))


@pytest.fixture
def toy_docs():
    """Linearly separable toy corpus: one cue word per class."""
    rng = np.random.default_rng(0)
    filler = ["alpha", "beta", "gamma", "delta", "omega", "sigma"]
    cue = {"racism": "rrr", "sexism": "sss", "none": "nnn"}
    docs = []
    for i in range(60):
        label = ("racism", "sexism", "none")[i % 3]
        words = list(rng.choice(filler, size=3)) + [cue[label]]
        docs.append(make_doc(i, f"u{i % 7}", label, " ".join(words)))
    return docs


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
