import hypothesis
import pytest

from diarefine import mockgen
from diarefine.mock import mock_backends
from diarefine.pipeline import PipelineBackends

hypothesis.settings.register_profile("default", deadline=None, max_examples=100)
hypothesis.settings.load_profile("default")


@pytest.fixture(scope="session")
def clean_script():
    return mockgen.clean_script(duration=300.0)


@pytest.fixture(scope="session")
def split_script():
    return mockgen.split_speaker_script(duration=300.0)


@pytest.fixture(scope="session")
def drift_script():
    return mockgen.drift_script()


@pytest.fixture
def pipeline_for():
    """Factory: fresh backends for a script (the oracle LLM is stateful)."""

    def make(script, seed=0, llm=None):
        mocks = mock_backends(script, seed=seed, relabel_per_window=True, llm=llm)
        backends = PipelineBackends(
            mocks.diarizer, mocks.transcriber, mocks.embedder, mocks.llm
        )
        return mocks.audio, backends

    return make
