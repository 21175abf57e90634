"""Skip-connection equivalence, parameter accounting, metrics and the
command-line tool, exposed from the C++ core."""

from ._sqzgan import (
    __version__,
    block_kernels,
    concat_dimension,
    count_params,
    frechet_distance,
    generate,
    inception_score,
    pixel_byte,
    published_block_formula,
    run_cli,
    verify_equivalence,
)

__all__ = [
    "__version__",
    "block_kernels",
    "concat_dimension",
    "count_params",
    "frechet_distance",
    "generate",
    "inception_score",
    "pixel_byte",
    "published_block_formula",
    "run_cli",
    "verify_equivalence",
]
