from pathlib import Path

import numpy as np
import pytest

from sepquant.container import read_container

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def fixture_dataset():
    tensors, _ = read_container(FIXTURES / "dataset.fmap")
    by = {t.name: t.data for t in tensors}
    return by["images"], by["labels"].astype(np.int64)


@pytest.fixture(scope="session")
def fixture_reference_logits():
    tensors, _ = read_container(FIXTURES / "logits.fmap")
    return tensors[0].data
