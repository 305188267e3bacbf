# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

""" """

import typing as ty

VARIANTS: ty.Final = ("block_parallel", "attention_parallel", "cascade")
POOLING_MODES: ty.Final = ("avg", "max")
LABEL_MAPS: ty.Final = ("motion_only", "scale_only", "joint")

MOTIONS: ty.Final = ("up", "down", "left", "right", "static")
MOTION_CLASSES: ty.Final = ("up", "down", "left", "right")
SCALES: ty.Final = ("grow", "shrink", "constant")
SHAPES: ty.Final = ("square", "disc", "cross")

# text template "a video of [CLS] action"
TEMPLATE_PREFIX: ty.Final = ("a", "video", "of")
TEMPLATE_SUFFIX: ty.Final = ("action",)

# checkpoint container
CKPT_MAGIC: ty.Final = b"OMNI"
CKPT_VERSION: ty.Final = 1

MANIFEST_VERSION: ty.Final = 1

# ablation suites
ABLATION_SUITES: ty.Final = ("modules", "ratio", "locations", "variants", "pooling")
ABLATION_RATIOS: ty.Final = (0.125, 0.25, 0.5, 1.0)
LOCATION_GROUPS: ty.Final = 4

FEW_SHOT_KS: ty.Final = (2, 4, 8, 16)
