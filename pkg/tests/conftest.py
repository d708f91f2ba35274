import pytest

from berta import asr, llm, model
from berta.audio import make_wav
from berta.orchestrator import Orchestrator
from berta.store import Store


@pytest.fixture
def store(tmp_path):
    st = Store(tmp_path / "data")
    yield st
    st.close()


@pytest.fixture
def clinician(store):
    user = model.UserProfile(
        id="u1", display_name="Dr. One", role="clinician", created_at=model.utc_now()
    )
    store.save_entity(user)
    return user


@pytest.fixture
def admin(store):
    user = model.UserProfile(
        id="admin1", display_name="Admin", role="admin", created_at=model.utc_now()
    )
    store.save_entity(user)
    return user


@pytest.fixture
def mock_asr(tmp_path):
    sidecar = tmp_path / "sidecars"
    sidecar.mkdir(exist_ok=True)
    return asr.AsrBackendDescriptor(
        backend_id="mock-asr", kind="mock", model_id="mock-asr-1",
        sidecar_dir=str(sidecar),
    )


@pytest.fixture
def mock_llm():
    return llm.LlmBackendDescriptor(
        backend_id="mock-llm", kind="mock", model_id="mock-llm-1", temperature=0.0
    )


@pytest.fixture
def orch(store, mock_asr, mock_llm, clinician):
    o = Orchestrator(store, mock_asr, mock_llm)
    yield o
    o.shutdown()


@pytest.fixture
def wav_5s():
    return make_wav(5.0)


def write_sidecar(backend: asr.AsrBackendDescriptor, audio: bytes, text: str) -> None:
    import hashlib
    from pathlib import Path

    digest = hashlib.sha256(audio).hexdigest()
    (Path(backend.sidecar_dir) / f"{digest}.txt").write_text(text, encoding="utf-8")
