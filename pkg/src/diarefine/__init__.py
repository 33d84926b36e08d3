"""Training-free speaker-diarization refinement.

Reconciles diarization segments with ASR word timestamps, re-verifies
speaker labels acoustically, refines low-confidence labels with an LLM,
assigns real-world identities, and scores results with DER/WER.
"""

__version__ = "0.1.0"

from .core import UNKNOWN, DiarSegment, TimeInterval, Word, interval_overlap, word_in_segment
from .metrics import Annotation, DerReport, der, wer

__all__ = [
    "UNKNOWN",
    "Annotation",
    "DerReport",
    "DiarSegment",
    "TimeInterval",
    "Word",
    "der",
    "interval_overlap",
    "wer",
    "word_in_segment",
    "__version__",
]
