"""Campaign-level key recovery strategies.

Collected faulty ciphertexts cannot be classified as usable without the
key, so recovery is a search over groupings:

* pairwise: try every pair of faulty ciphertexts against the clean one.
  Pairs violating the single-byte fault model solve to nothing and are
  discarded; the first grouping whose assembled key verifies wins.
* second order: when every output carries a shared static corruption, the
  clean ciphertext is the wrong reference. Instead each faulty ciphertext
  takes a turn as the reference for every pair of the others (3 per
  unordered triple): the shared corruption cancels between samples from the
  same glitch site, and anything spurious is rejected by verification
  against the clean ciphertext.

Full AES-256 recovery chains two stages: faults two rounds from the end
give the last round key, faults three rounds out (after peeling the final
round) give the one before, and inverting the key schedule yields the
cipher key. A report never carries an unverified key.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

from .aes import ROUNDS_BY_KEY_LEN, encrypt_block, expand_key, invert_key_schedule
from .dfa import InconsistentPairError, last_round_key, penultimate_round_key

__all__ = [
    "AttackReport",
    "verify_key",
    "attack_pairwise",
    "attack_second_order",
    "recover_key",
]

DEFAULT_GROUPING_BUDGET = 1_000_000


def verify_key(key: bytes, pt: bytes, clean_ct: bytes) -> bool:
    """True iff `key` encrypts `pt` to `clean_ct` (the acceptance gate)."""
    return encrypt_block(pt, expand_key(key)) == clean_ct


@dataclass
class AttackReport:
    """Outcome and statistics of one recovery run.

    `recovered_key` is present only when verify_key passed on it.
    `groupings_attempted`/`groupings_succeeded` count per stage;
    `usable_last_round` / `usable_earlier_round` flag the inputs that were
    part of a grouping whose key verified. `failure` names the stage that
    ran out of groupings, if any.
    """

    mode: str
    recovered_key: bytes | None = None
    round_keys: dict = field(default_factory=dict)
    groupings_attempted: dict = field(default_factory=dict)
    groupings_succeeded: int = 0
    usable_last_round: list[bool] = field(default_factory=list)
    usable_earlier_round: list[bool] = field(default_factory=list)
    failure: str | None = None
    wall_time: float = 0.0

    @property
    def total_groupings(self) -> int:
        return sum(self.groupings_attempted.values())

    def to_json(self) -> str:
        # wall_time deliberately stays out: outputs are deterministic,
        # timings are reported on a side channel
        return json.dumps(
            {
                "mode": self.mode,
                "recovered_key": self.recovered_key.hex() if self.recovered_key else None,
                "round_keys": {name: rk.hex() for name, rk in self.round_keys.items()},
                "groupings_attempted": self.groupings_attempted,
                "groupings_succeeded": self.groupings_succeeded,
                "usable_last_round": self.usable_last_round,
                "usable_earlier_round": self.usable_earlier_round,
                "failure": self.failure,
            },
            indent=2,
        )


class _Budget:
    def __init__(self, limit: int):
        self.limit = limit
        self.spent = 0

    def tick(self) -> bool:
        self.spent += 1
        return self.spent <= self.limit


def _stage_groupings(cts: Sequence[bytes], clean_ct: bytes | None):
    """Yield (reference, pair indices, reference index or None).

    With a clean reference: plain lexicographic pairs. Without: every
    member of every 3-subset takes a turn as the reference (3 per triple).
    """
    if clean_ct is not None:
        for i, j in combinations(range(len(cts)), 2):
            yield clean_ct, (i, j), None
    else:
        for trio in combinations(range(len(cts)), 3):
            for ref in trio:
                rest = tuple(x for x in trio if x != ref)
                yield cts[ref], rest, ref


def _solve_stage(ref, pair_cts, k_last):
    if k_last is None:
        return last_round_key(ref, pair_cts)
    return penultimate_round_key(ref, pair_cts, k_last)


def _run_attack(
    mode: str,
    clean_ct: bytes,
    r2_cts: Sequence[bytes],
    r3_cts: Sequence[bytes],
    pt: bytes,
    key_size: int,
    max_groupings: int,
    exhaustive: bool,
) -> AttackReport:
    two_stage = key_size != 128
    ref_for = clean_ct if mode == "pairwise" else None
    report = AttackReport(
        mode=mode,
        groupings_attempted={"last_round": 0, "penultimate": 0} if two_stage else {"last_round": 0},
        usable_last_round=[False] * len(r2_cts),
        usable_earlier_round=[False] * len(r3_cts),
    )
    budget = _Budget(max_groupings)
    started = time.perf_counter()
    seen_last_keys: set[bytes] = set()

    def finish(failure: str | None) -> AttackReport:
        if report.recovered_key is None:
            report.failure = failure or "exhausted"
        report.wall_time = time.perf_counter() - started
        return report

    for ref1, pair1, refidx1 in _stage_groupings(r2_cts, ref_for):
        if not budget.tick():
            return finish(f"grouping budget of {max_groupings} exhausted in stage last_round")
        report.groupings_attempted["last_round"] += 1
        try:
            stage1 = last_round_key(ref1, [r2_cts[pair1[0]], r2_cts[pair1[1]]])
        except InconsistentPairError:
            continue
        if stage1.key is None or stage1.key in seen_last_keys:
            continue
        seen_last_keys.add(stage1.key)

        if not two_stage:
            key = invert_key_schedule(key_size, [stage1.key])
            if verify_key(key, pt, clean_ct):
                report.groupings_succeeded += 1
                if report.recovered_key is None:
                    report.recovered_key = key
                    report.round_keys = {"last": stage1.key}
                    _flag(report.usable_last_round, pair1, refidx1)
                if not exhaustive:
                    return finish(None)
            continue

        for ref2, pair2, refidx2 in _stage_groupings(r3_cts, clean_ct if ref_for is not None else None):
            if not budget.tick():
                return finish(f"grouping budget of {max_groupings} exhausted in stage penultimate")
            report.groupings_attempted["penultimate"] += 1
            try:
                stage2 = penultimate_round_key(
                    ref2, [r3_cts[pair2[0]], r3_cts[pair2[1]]], stage1.key
                )
            except InconsistentPairError:
                continue
            if stage2.key is None:
                continue
            key = invert_key_schedule(key_size, [stage2.key, stage1.key])
            if not verify_key(key, pt, clean_ct):
                continue  # spurious solution; keep searching
            report.groupings_succeeded += 1
            if report.recovered_key is None:
                report.recovered_key = key
                report.round_keys = {"last": stage1.key, "penultimate": stage2.key}
                _flag(report.usable_last_round, pair1, refidx1)
                _flag(report.usable_earlier_round, pair2, refidx2)
            if not exhaustive:
                return finish(None)
    return finish(
        None
        if report.recovered_key is not None
        else f"stage last_round exhausted after {report.groupings_attempted['last_round']} groupings"
    )


def _flag(flags: list[bool], pair, refidx) -> None:
    for i in pair:
        flags[i] = True
    if refidx is not None:
        flags[refidx] = True


def attack_pairwise(
    clean_ct: bytes,
    r2_cts: Sequence[bytes],
    r3_cts: Sequence[bytes],
    pt: bytes,
    key_size: int = 256,
    max_groupings: int = DEFAULT_GROUPING_BUDGET,
    exhaustive: bool = False,
) -> AttackReport:
    """All-pairs search against the clean ciphertext, both stages."""
    return _run_attack("pairwise", clean_ct, r2_cts, r3_cts, pt, key_size, max_groupings, exhaustive)


def attack_second_order(
    clean_ct: bytes,
    r2_cts: Sequence[bytes],
    r3_cts: Sequence[bytes],
    pt: bytes,
    key_size: int = 256,
    max_groupings: int = DEFAULT_GROUPING_BUDGET,
    exhaustive: bool = False,
) -> AttackReport:
    """Faulty-reference search for campaigns with a shared static corruption.

    Requires the fixed-plaintext discipline: the static contribution is
    only constant across samples of one campaign. The clean ciphertext is
    used solely to verify assembled candidate keys.
    """
    return _run_attack(
        "second_order", clean_ct, r2_cts, r3_cts, pt, key_size, max_groupings, exhaustive
    )


def recover_key(
    clean_ct: bytes,
    r2_cts: Sequence[bytes],
    r3_cts: Sequence[bytes],
    pt: bytes,
    key_size: int = 256,
    mode: str = "auto",
    max_groupings: int = DEFAULT_GROUPING_BUDGET,
    exhaustive: bool = False,
) -> AttackReport:
    """Recover the full cipher key from classified fault pools.

    `r2_cts` hold outputs faulted two rounds from the end, `r3_cts` three
    rounds out (unused for AES-128). `auto` tries the pairwise search and
    falls back to the second-order one.
    """
    if key_size not in (bits * 8 for bits in ROUNDS_BY_KEY_LEN):
        raise ValueError(f"key_size must be 128, 192 or 256, got {key_size}")
    if not r2_cts:
        raise ValueError("no last-round-stage ciphertexts supplied")
    if key_size != 128 and not r3_cts:
        raise ValueError(f"AES-{key_size} needs earlier-round ciphertexts for its second stage")
    if mode == "pairwise":
        return attack_pairwise(clean_ct, r2_cts, r3_cts, pt, key_size, max_groupings, exhaustive)
    if mode == "second_order":
        return attack_second_order(clean_ct, r2_cts, r3_cts, pt, key_size, max_groupings, exhaustive)
    if mode != "auto":
        raise ValueError(f"mode must be pairwise, second_order or auto, got {mode!r}")

    first = attack_pairwise(clean_ct, r2_cts, r3_cts, pt, key_size, max_groupings, exhaustive)
    if first.recovered_key is not None:
        first.mode = "auto:pairwise"
        return first
    second = attack_second_order(clean_ct, r2_cts, r3_cts, pt, key_size, max_groupings, exhaustive)
    second.mode = "auto:second_order"
    for stage, count in first.groupings_attempted.items():
        second.groupings_attempted[stage] += count
    second.wall_time += first.wall_time
    return second
