import textwrap

import pytest

from csaeo.models.config import DTJSCCConfig
from csaeo.semantic.data import generate_synthetic
from csaeo.semantic.dtjscc import Codec, pooled_statistics, train
from csaeo.utils.rng import derive_rng


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    monkeypatch.setenv("LANGUAGE", "en_US")
    monkeypatch.delenv("CSAEO_JOBS", raising=False)


@pytest.fixture(scope="session")
def small_dataset():
    """10 classes x 20 images of 8 x 8 x 3"""
    return generate_synthetic(10, 20, 8, 8, 3, 0.1, seed=0)


@pytest.fixture(scope="session")
def small_codec_cfg():
    return DTJSCCConfig(epochs=15, codebook_sizes=[16])


@pytest.fixture(scope="session")
def trained_codec(small_dataset, small_codec_cfg):
    """Shared trained codec; copy it before changing anything"""
    codec = Codec.create(small_dataset, 16, small_codec_cfg, derive_rng(0, "fixture"))
    train(small_dataset, codec, small_codec_cfg, derive_rng(0, "fixture-train"))
    return codec


@pytest.fixture(scope="session")
def small_stats(small_dataset):
    return pooled_statistics(small_dataset.images)


@pytest.fixture
def write_config(tmp_path):
    """Write a TOML run file under tmp_path and return its path"""
    def _write(body: str, name: str = "run.toml"):
        path = tmp_path / name
        path.write_text(textwrap.dedent(body), encoding="utf-8")
        return str(path)
    return _write


TINY_RUN = """
[data]
n_classes = 10
n_per_class = 12
height = 8
width = 8
bands = 3

[dtjscc]
codebook_sizes = [16, 32]
epochs = 4

[scenario]
k_q = 16
n_timesteps = 2
batch_size = 16
psnr_db = 8.0

[sweep]
psnr_list = [4.0, 12.0]
kq_list = [16]
channel_kinds = ["awgn", "rayleigh"]
constellations = ["16psk"]
seeds = [0]
csa_psnr_list = [8.0]

[harness]
n_seeds = 1
probe_draws = 2000
"""


@pytest.fixture
def tiny_run(write_config, tmp_path):
    """(config path, output dir) for a run that finishes in seconds"""
    out = tmp_path / "out"
    return write_config(TINY_RUN + f'output_dir = "{out.as_posix()}"\n'), out
