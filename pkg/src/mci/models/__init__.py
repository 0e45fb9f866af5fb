from .backbone import BackboneConfig, SiameseBackbone, images_to_tensor
from .bi3 import (
    Bi3Config,
    Bi3Layer,
    Bi3Stack,
    DifferenceFusionAttention,
    LocalPerceptionEnhance,
)
from .captioning import (
    CaptionConfig,
    CaptionHead,
    DecoderLayer,
    DomainBridge,
    MultiHeadAttention,
    ids_to_sentence,
    sinusoidal_positions,
)
from .detection import (
    ConvBitemporalFusion,
    DetectionConfig,
    DetectionHead,
    cosine_map,
    logits_to_mask,
)
from .full import ChangeCaptioner, ModelConfig, build_model

__all__ = [
    "BackboneConfig",
    "SiameseBackbone",
    "images_to_tensor",
    "Bi3Config",
    "Bi3Layer",
    "Bi3Stack",
    "DifferenceFusionAttention",
    "LocalPerceptionEnhance",
    "CaptionConfig",
    "CaptionHead",
    "DecoderLayer",
    "DomainBridge",
    "MultiHeadAttention",
    "ids_to_sentence",
    "sinusoidal_positions",
    "ConvBitemporalFusion",
    "DetectionConfig",
    "DetectionHead",
    "cosine_map",
    "logits_to_mask",
    "ChangeCaptioner",
    "ModelConfig",
    "build_model",
]
