"""Monaural multi-talker speech separation toolkit."""

from pitsep._core import (
    DataError,
    NumericError,
    StftConfig,
    apply_masks,
    best_perm_bruteforce,
    best_perm_hungarian,
    irm,
    istft,
    loss_jx,
    pairwise_cost,
    pit_loss,
    read_wav,
    sdr,
    separate,
    softmax_masks,
    stft,
    write_wav,
)

__all__ = [
    "DataError",
    "NumericError",
    "StftConfig",
    "apply_masks",
    "best_perm_bruteforce",
    "best_perm_hungarian",
    "irm",
    "istft",
    "loss_jx",
    "pairwise_cost",
    "pit_loss",
    "read_wav",
    "sdr",
    "separate",
    "softmax_masks",
    "stft",
    "write_wav",
]
