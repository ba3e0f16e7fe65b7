"""Perceptual-hash verification, quorum probabilities and reproducibility experiments.

Thin wrapper over the compiled ``_genverify`` extension.
"""

import sys

from ._genverify import (
    Error,
    InvalidArgument,
    ParseError,
    collision_experiment,
    decode,
    hamming,
    hash_file,
    hash_image,
    min_verifiers,
    monte_carlo_type1,
    quorum_probability,
    run_cli,
    tolerant_mode,
    toy_logits,
    train_ablation,
    train_deterministic,
)

__all__ = [
    "Error",
    "InvalidArgument",
    "ParseError",
    "collision_experiment",
    "decode",
    "hamming",
    "hash_file",
    "hash_image",
    "main",
    "min_verifiers",
    "monte_carlo_type1",
    "quorum_probability",
    "run_cli",
    "tolerant_mode",
    "toy_logits",
    "train_ablation",
    "train_deterministic",
]


def main(argv=None):
    code, out, err = run_cli(list(sys.argv[1:] if argv is None else argv))
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code
