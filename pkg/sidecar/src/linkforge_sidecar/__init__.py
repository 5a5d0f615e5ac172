"""linkforge-sidecar: transformer embeddings over JSON-HTTP plus Bi-/Cross-
Encoder fine-tuning on exported pair files."""

from .model import SidecarEncoder
from .server import make_server, serve
from .training import finetune_bi, finetune_cross, load_pair_examples, mention_distance

__version__ = "0.1.0"

__all__ = [
    "SidecarEncoder",
    "finetune_bi",
    "finetune_cross",
    "load_pair_examples",
    "make_server",
    "mention_distance",
    "serve",
]
