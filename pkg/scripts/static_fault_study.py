#!/usr/bin/env python3
"""Why the second-order search exists: pairwise vs faulty-reference groupings.

Simulates a glitch site that flips the same state bits in every run (a
static corruption) on top of a per-run single-byte fault. The clean-
reference pairwise search then sees only multi-byte differences and dies;
using each faulty output as the reference cancels the shared corruption
and the key falls out anyway.
"""

import argparse
import random

from aesdfa.orchestrator import attack_pairwise, attack_second_order

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
from simhelpers import fault_campaign  # noqa: E402


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--samples", type=int, default=5, help="faulty outputs per round pool")
    parser.add_argument("--static-bytes", type=int, default=3, help="bytes in the shared mask")
    args = parser.parse_args()

    rng = random.Random(args.seed)
    key = bytes(rng.randrange(256) for _ in range(32))
    pt = bytes(rng.randrange(256) for _ in range(16))

    z = bytearray(16)
    for pos in rng.sample(range(1, 16), args.static_bytes):
        z[pos] = rng.randrange(1, 256)
    print(f"shared static mask: {bytes(z).hex()}")

    clean, r2, r3 = fault_campaign(
        key, pt, rng,
        n_r2=args.samples, n_r3=args.samples,
        static_mask=bytes(z), pinned_pos=0,
    )

    pairwise = attack_pairwise(clean, r2, r3, pt)
    print(f"\npairwise vs clean reference: key={pairwise.recovered_key}")
    print(f"  groupings attempted: {pairwise.groupings_attempted}")

    second = attack_second_order(clean, r2, r3, pt)
    found = second.recovered_key.hex() if second.recovered_key else None
    print(f"\nfaulty-reference groupings: key={found}")
    print(f"  groupings attempted: {second.groupings_attempted}")
    print(f"  matches target: {second.recovered_key == key}")


if __name__ == "__main__":
    main()
