import numpy as np
import pytest

from bankfactory import demo_bank_bytes
from fmtone.sysex import parse_sysex_bank, unpack_voice

EPIANO_VOICE_INDEX = 10


@pytest.fixture(scope="session")
def bank_bytes() -> bytes:
    return demo_bank_bytes()


@pytest.fixture(scope="session")
def bank(bank_bytes):
    return parse_sysex_bank(bank_bytes)


@pytest.fixture(scope="session")
def epiano_patch(bank):
    return unpack_voice(bank, EPIANO_VOICE_INDEX)


@pytest.fixture(scope="session")
def bank_file(tmp_path_factory, bank_bytes):
    path = tmp_path_factory.mktemp("bank") / "demo.syx"
    path.write_bytes(bank_bytes)
    return path


@pytest.fixture(scope="session")
def desk_bundle(epiano_patch):
    """Desk-scale end-to-end run shared by the acceptance tests:
    200 notes, K=1000, hidden 64, 8000 steps, batch 16.  Takes on the
    order of fifteen minutes; everything that needs a trained model
    reuses this one."""
    from fmtone.dataset import build_dataset, split_dataset
    from fmtone.gru import ModelConfig
    from fmtone.training import TrainConfig, train

    data = build_dataset(epiano_patch, n=200, length=1000, seed=2024)
    train_split, valid_split, test_split = split_dataset(data, seed=2024)
    model_config = ModelConfig(hidden_dim=64)
    train_config = TrainConfig(batch_size=16, total_steps=8000, seed=7)
    params, reports = train(train_split, valid_split, model_config, train_config)
    return {
        "params": params,
        "reports": reports,
        "train": train_split,
        "valid": valid_split,
        "test": test_split,
        "patch": epiano_patch,
    }


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
