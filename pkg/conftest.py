# Copyright © 2024 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Shared fixtures: a micro model shape and a tiny synthetic dataset."""

import logging
import sys
from contextlib import suppress

import pytest

with suppress(ImportError):
    import icecream

    icecream.install()

from omniclip import data_synth
from omniclip.config import ModelConfig, TrainConfig
from omniclip.model import OmniClip

logging.basicConfig(level=logging.DEBUG, stream=sys.stdout)

MICRO_SHAPE = {
    "image_size": 16,
    "patch_size": 8,
    "depth": 2,
    "width": 16,
    "heads": 2,
    "frames": 4,
    "out_dim": 8,
    "agg_heads": 2,
    "text_layers": 1,
}


def micro(**changes):
    return ModelConfig(**{**MICRO_SHAPE, **changes})


@pytest.fixture
def micro_config():
    return micro()


@pytest.fixture
def micro_model(micro_config):
    return OmniClip(micro_config)


@pytest.fixture(scope="session")
def tiny_manifest():
    # 16px canvas of 4 frames fits speed 1 with the default scale rate
    return data_synth.make_dataset(
        "motion_only", 4, 0, canvas=16, frames=4, noise=0.0
    )


@pytest.fixture
def quick_train():
    return TrainConfig(
        epochs=2,
        batch_size=4,
        warmup_epochs=1,
        peak_lr=1e-2,
        min_lr=1e-4,
        label_smoothing=0.0,
    )
