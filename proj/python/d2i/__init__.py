"""Document-to-image text classification toolkit.

Converts token sequences into banded inner-product images, trains a small
CNN on them, and numerically exercises the embedding reconstruction bound.
The heavy lifting lives in the compiled `_core` extension.
"""

from d2i._core import (
    D2IError,
    EmbeddingTable,
    __version__,
    d2i_image,
    f1_binary,
    glove_weight,
    grouped_mrr,
    mse_labels,
    resize,
    run_cli,
    self_attention,
    tokenize,
    verify_bound,
    write_pgm,
)

__all__ = [
    "D2IError",
    "EmbeddingTable",
    "__version__",
    "d2i_image",
    "f1_binary",
    "glove_weight",
    "grouped_mrr",
    "mse_labels",
    "resize",
    "run_cli",
    "self_attention",
    "tokenize",
    "verify_bound",
    "write_pgm",
]
