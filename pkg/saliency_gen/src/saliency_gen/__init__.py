"""saliency_gen: visual-attention inference emitting FSEQ saliency files."""

__version__ = "0.1.0"

from .fseq import FseqError, read_gray_fseq, write_saliency_fseq  # noqa: F401
from .infer import ModelLoadError, infer_saliency, predict_frames  # noqa: F401
from .model import SaliencyNet, init_weights_file, load_model  # noqa: F401
