from __future__ import annotations

import os
import tempfile

os.environ.setdefault("VCTR_LOG_DIR", os.path.join(tempfile.gettempdir(), "visual_ctr_test_logs"))

import pytest

from config.config import PipelineConfig, config_from_mapping
from Src.dataset.storage import SyntheticDataset, generate_dataset
from tests.helpers import tiny_mapping


@pytest.fixture
def tiny_config(tmp_path) -> PipelineConfig:
    payload = tiny_mapping()
    payload["output_dir"] = str(tmp_path / "out")
    return config_from_mapping(payload)


@pytest.fixture
def tiny_dataset(tiny_config) -> SyntheticDataset:
    return generate_dataset(tiny_config.generator)
