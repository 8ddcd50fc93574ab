from .kos import KnowledgeBase, load_kos
from .pipeline import Linker, PipelineConfig, link_corpus, link_document
from .xmr import XmrModel

__version__ = "0.1.0"
__all__ = [
    "KnowledgeBase",
    "Linker",
    "PipelineConfig",
    "XmrModel",
    "link_corpus",
    "link_document",
    "load_kos",
]
