import os
import pathlib
import shutil

import pytest

SOURCE_DIR = pathlib.Path(os.environ.get("AYA_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))


@pytest.fixture(scope="session")
def source_dir():
    return SOURCE_DIR


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("AYA_CLI") or shutil.which("aya")
    if not path:
        candidate = SOURCE_DIR / "build" / "aya"
        path = str(candidate) if candidate.exists() else None
    if not path:
        pytest.skip("aya binary not found")
    return path
