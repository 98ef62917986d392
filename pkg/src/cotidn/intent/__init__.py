from .clustering import IntentCluster, cluster_intents, kmeans
from .corpus import CASE_STUDY_INTENT, load_corpus
from .embedding import (
    HashingEmbedder,
    HttpEmbedder,
    IntentEmbedding,
    IntentText,
    embed_intent,
    embed_intents,
    fnv1a64,
    tokenize,
)
from .parsing import OBJECTIVES, ParsedIntent, parse_intent

__all__ = [
    "CASE_STUDY_INTENT",
    "OBJECTIVES",
    "HashingEmbedder",
    "HttpEmbedder",
    "IntentCluster",
    "IntentEmbedding",
    "IntentText",
    "ParsedIntent",
    "cluster_intents",
    "embed_intent",
    "embed_intents",
    "fnv1a64",
    "kmeans",
    "load_corpus",
    "parse_intent",
    "tokenize",
]
