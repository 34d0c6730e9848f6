from .bp import BPOptions, DecodeResult, bp_decode, top_k
from .ml import ml_oracle_decode
from .ncomp import default_match_threshold, ncomp_decode
from .pmf import weight_pmf
from .preambles import PreambleMatrix, gen_preambles

__all__ = [
    "BPOptions", "DecodeResult", "PreambleMatrix", "bp_decode", "default_match_threshold",
    "gen_preambles", "ml_oracle_decode", "ncomp_decode", "top_k", "weight_pmf",
]
