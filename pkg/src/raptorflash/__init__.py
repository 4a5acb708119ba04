"""Raptor-coded NAND flash ECC: GF(2) solvers, BCH, Raptor, block recovery and BW-PC."""

from .analysis import (
    block_failure_bound,
    conditional_raptor_failure,
    long_bch_page_error,
    p_ij,
    p_raptor,
)
from .bch import BchCode, bch_decode, bch_encode, bch_for_message, bch_generate, erasure_probability
from .block_recovery import BlockGeometry, recover_block, stream_write, update_word
from .bwpc import BwPcLayout, PageCodeword, decode_page, detect_and_retry, encode_page, layout
from .errors import *  # noqa: F401,F403
from .galois import GaloisField, gf_build
from .gf2 import BitMatrix, gaussian_eliminate, inactivation_solve, solve
from .raptor import (
    LTMode,
    RaptorCode,
    RaptorParams,
    build_erasure_luts,
    build_parity_luts,
    decode,
    encode,
    is_recoverable,
)
from .sim import ExperimentConfig, bsc_corrupt, run_experiment

__version__ = "0.1.0"
