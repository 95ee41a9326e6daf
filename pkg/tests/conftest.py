import numpy as np
import pytest

from stylecast.corpus import StyledExample, Task, Vocab
from stylecast.model import ModelConfig, Seq2Seq
from stylecast.schemes import ControlScheme, Style

TOY_TOKENS = [f"w{i}" for i in range(13)]


def toy_vocab():
    return Vocab(TOY_TOKENS)


def toy_model(scheme=ControlScheme.TAG_SRC_TGT, seed=1, size=8, dropout=0.0, jitter=0.05):
    vocab = toy_vocab()
    model = Seq2Seq(ModelConfig(len(vocab), embed_size=size, hidden_size=size, dropout=dropout, scheme=scheme),
                    vocab, seed=seed)
    if jitter:
        # move zero-initialised biases off their symmetric starting point
        noise = np.random.default_rng(seed + 100)
        for value in model.params.params.values():
            value += noise.normal(0.0, jitter, value.shape)
    return model


def toy_examples(seed=0):
    rng = np.random.default_rng(seed)

    def rs(n):
        return tuple(rng.choice(TOY_TOKENS, size=n))

    return [
        StyledExample(rs(3), rs(4), Style.FORMAL),
        StyledExample(rs(5), rs(2), Style.INFORMAL),
        StyledExample(rs(2), rs(3), Style.UNKNOWN),
        StyledExample(rs(3), rs(3), None),
    ]


def uniform_model(scheme=ControlScheme.TAG_SRC_TGT):
    """Model whose output distribution is uniform for every input."""
    model = toy_model(scheme, jitter=0.0)
    for name in ("out.ln.g", "out.ln.b", "out.bias"):
        model.params[name][...] = 0.0
    if "style.bias" in model.params:
        model.params["style.bias"][...] = 0.0
    return model


@pytest.fixture
def tmp_cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def pytest_configure(config):
    config.acceptance_lines = {}


@pytest.fixture
def record(request):
    """Stores one PASS/FAIL line per acceptance criterion, printed at the end of the run."""

    def write(number, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.acceptance_lines[number] = line
        print(line)

    return write


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
