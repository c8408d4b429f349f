import numpy as np
import pytest

from tbcough.audio_io import load_manifest
from tbcough.features import FeatureConfig, build_table, extract_manifest
from tbcough.synth import SyntheticCorpusSpec, generate_corpus


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def separable_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("separable")
    path = generate_corpus(SyntheticCorpusSpec(n_participants=40, clips_min=5, clips_max=5,
                                               metadata_signal=0.0, missing_rate=0.02, seed=7),
                           root)
    return load_manifest(path)


@pytest.fixture(scope="session")
def separable_table(separable_corpus):
    cfg = FeatureConfig()
    return build_table(separable_corpus, extract_manifest(separable_corpus, cfg), cfg)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
