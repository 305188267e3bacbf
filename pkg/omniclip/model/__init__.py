# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

from .backbone import (
    Encodings,
    PatchEmbedder,
    ViTBlock,
    add_encodings,
    patch_embed,
    patchify,
    vit_block_forward,
)
from .encoder import (
    AttentionMap,
    EncoderTrace,
    LayerIndexError,
    OmniVideoEncoder,
    SpatialTemporalBlock,
    attention_heatmap,
    block_forward,
    encode_video,
)
from .objective import (
    LabelError,
    SimilarityHead,
    ZeroNormError,
    classification_loss,
    per_class_accuracy,
    similarity_matrix,
    top_k_accuracy,
)
from .omniclip import EncoderState, OmniClip
from .pta import FusionGate, ParallelTemporalAdapter, fuse, pta_forward
from .spg import SelfPromptGenerator, concat_prompts, generate_prompts
from .text import TextEncoder, Vocabulary, VocabularyError, text_encode

__all__ = [
    "AttentionMap",
    "EncoderState",
    "EncoderTrace",
    "Encodings",
    "FusionGate",
    "LabelError",
    "LayerIndexError",
    "OmniClip",
    "OmniVideoEncoder",
    "ParallelTemporalAdapter",
    "PatchEmbedder",
    "SelfPromptGenerator",
    "SimilarityHead",
    "SpatialTemporalBlock",
    "TextEncoder",
    "ViTBlock",
    "Vocabulary",
    "VocabularyError",
    "ZeroNormError",
    "add_encodings",
    "attention_heatmap",
    "block_forward",
    "classification_loss",
    "concat_prompts",
    "encode_video",
    "fuse",
    "generate_prompts",
    "patch_embed",
    "patchify",
    "per_class_accuracy",
    "pta_forward",
    "similarity_matrix",
    "text_encode",
    "top_k_accuracy",
    "vit_block_forward",
]
