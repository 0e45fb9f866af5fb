from .codec import (
    BACKGROUND,
    BUILDING,
    CLASS_COLORS,
    CLASS_NAMES,
    NUM_CLASSES,
    ROAD,
    MaskDecodeError,
    class_id,
    decode_mask,
    encode_mask,
    load_mask,
    save_mask,
)
from .corpus import (
    CaptionRecord,
    ChangeMask,
    CorpusError,
    ImagePair,
    corpus_captions,
    load_corpus,
    read_captions_index,
)
from .stats import DatasetStats, ObjectRecord, component_objects, compute_stats, count_components
from .synth import EditRecord, synthesize_corpus, synthesize_pair
from .vocab import (
    BOS_ID,
    EOS_ID,
    PAD_ID,
    UNK_ID,
    Vocabulary,
    build_vocabulary,
    tokenize,
)

__all__ = [
    "BACKGROUND",
    "BUILDING",
    "ROAD",
    "CLASS_COLORS",
    "CLASS_NAMES",
    "NUM_CLASSES",
    "MaskDecodeError",
    "class_id",
    "encode_mask",
    "decode_mask",
    "save_mask",
    "load_mask",
    "CaptionRecord",
    "ChangeMask",
    "CorpusError",
    "ImagePair",
    "load_corpus",
    "corpus_captions",
    "read_captions_index",
    "DatasetStats",
    "ObjectRecord",
    "compute_stats",
    "component_objects",
    "count_components",
    "EditRecord",
    "synthesize_corpus",
    "synthesize_pair",
    "Vocabulary",
    "build_vocabulary",
    "PAD_ID",
    "BOS_ID",
    "EOS_ID",
    "UNK_ID",
    "tokenize",
]
