"""Reconstruct a hidden engine output block from borrow-chain artifacts.

Each stage ciphertext is a known-key encryption of a block that is mostly
zeros plus a window of the hidden block, so one chunk at a time falls to a
keyspace scan of 2^chunk_bits candidates; the slave-slot ciphertext pins
the final chunk through the key itself. Worst case is one full scan per
chunk: 4 * 2^32 block operations at the default width, 8 * 2^16 in the
desk-scale test width.

Scans run on the OpenSSL AES backend with candidate blocks batched per
call, and partition cleanly across worker processes; the lowest matching
chunk value wins, so results do not depend on the worker count. In test
widths the whole range is scanned and uniqueness of the match is asserted.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .aes import SBOX, _MUL2, _MUL3, _RCON, _SR_PERM
from .engine import BorrowArtifacts, slave_key_from_block

__all__ = ["ArtifactMismatch", "BustResult", "bust", "recover_hidden", "bust_batch"]

_BATCH = 1 << 16
# full-range scan plus uniqueness assertion at or below this chunk width
_EXHAUSTIVE_LIMIT = 16


class ArtifactMismatch(Exception):
    """No candidate chunk satisfies a stage equation.

    Signals a wrong fixed key, mismatched borrow semantics, or a corrupted
    capture; carries which stage failed.
    """

    def __init__(self, stage: str):
        self.stage = stage
        super().__init__(f"no candidate chunk matches the {stage} artifact")


@dataclass(frozen=True)
class BustResult:
    hidden: bytes
    aes_ops: int
    elapsed: float

    @property
    def blocks_per_second(self) -> float:
        return self.aes_ops / self.elapsed if self.elapsed > 0 else float("inf")


def _ecb_encrypt(key: bytes, data: bytes) -> bytes:
    enc = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    return enc.update(data) + enc.finalize()


_SBOX_NP = np.array(SBOX, dtype=np.uint8)
_MUL2_NP = np.frombuffer(_MUL2, dtype=np.uint8)
_MUL3_NP = np.frombuffer(_MUL3, dtype=np.uint8)
_SR_PERM_NP = np.array(_SR_PERM, dtype=np.intp)


def _encrypt_block_under_keys(keys: np.ndarray, block: bytes) -> np.ndarray:
    """AES-256 encrypt one block under many keys at once.

    The slave-stage scan varies the *key* per candidate, which defeats the
    batched-ECB trick used for the data stages; running the schedule and
    rounds as whole-array table lookups keeps that stage at scan speed too.
    keys is (n, 32) uint8; returns the (n, 16) ciphertext array.
    """
    n = len(keys)
    words = [np.ascontiguousarray(keys[:, 4 * i:4 * i + 4]) for i in range(8)]
    for i in range(8, 60):
        tmp = words[i - 1]
        if i % 8 == 0:
            tmp = _SBOX_NP[np.roll(tmp, -1, axis=1)]
            tmp[:, 0] ^= _RCON[i // 8 - 1]
        elif i % 8 == 4:
            tmp = _SBOX_NP[tmp]
        words.append(words[i - 8] ^ tmp)
    round_keys = [
        np.concatenate(words[4 * r:4 * r + 4], axis=1) for r in range(15)
    ]

    # row index sets of the flat column-major state
    rows = [np.arange(r, 16, 4) for r in range(4)]
    state = np.empty((n, 16), dtype=np.uint8)
    state[:] = np.frombuffer(block, dtype=np.uint8)
    state ^= round_keys[0]
    for r in range(1, 15):
        state = _SBOX_NP[state][:, _SR_PERM_NP]
        if r < 14:
            m2, m3 = _MUL2_NP[state], _MUL3_NP[state]
            mixed = np.empty_like(state)
            i0, i1, i2, i3 = rows
            mixed[:, i0] = m2[:, i0] ^ m3[:, i1] ^ state[:, i2] ^ state[:, i3]
            mixed[:, i1] = state[:, i0] ^ m2[:, i1] ^ m3[:, i2] ^ state[:, i3]
            mixed[:, i2] = state[:, i0] ^ state[:, i1] ^ m2[:, i2] ^ m3[:, i3]
            mixed[:, i3] = m3[:, i0] ^ state[:, i1] ^ state[:, i2] ^ m2[:, i3]
            state = mixed
        state ^= round_keys[r]
    return state


def _stage_layout(stage: int, chunk: int, borrow: str) -> tuple[int, slice, slice]:
    """(zero count, chunk window, known window) of one stage's plaintext block."""
    if borrow == "tail":
        lo = 16 - (stage + 1) * chunk
        return lo, slice(lo, lo + chunk), slice(lo + chunk, 16)
    lo = stage * chunk
    return 16 - lo - chunk, slice(lo, lo + chunk), slice(0, lo)


def _scan_data_stage(
    fixed_key: bytes,
    target: bytes,
    chunk_window: slice,
    known_window: slice,
    known: bytes,
    chunk: int,
    exhaustive: bool,
    start: int,
    stop: int,
) -> tuple[list[int], int]:
    """Scan [start, stop) chunk values; return (matches, candidates tried)."""
    template = np.zeros((_BATCH, 16), dtype=np.uint8)
    template[:, known_window] = np.frombuffer(known, dtype=np.uint8)
    target_row = np.frombuffer(target, dtype=np.uint8)
    enc = Cipher(algorithms.AES(fixed_key), modes.ECB()).encryptor()

    matches: list[int] = []
    tried = 0
    for base in range(start, stop, _BATCH):
        count = min(_BATCH, stop - base)
        rows = template[:count]
        values = np.arange(base, base + count, dtype=np.uint64)
        for j in range(chunk):  # big-endian chunk bytes
            rows[:, chunk_window.start + j] = (values >> (8 * (chunk - 1 - j))).astype(np.uint8)
        cts = np.frombuffer(enc.update(rows.tobytes()), dtype=np.uint8).reshape(-1, 16)
        tried += count
        hits = np.nonzero((cts == target_row).all(axis=1))[0]
        if len(hits):
            matches.extend(int(base + h) for h in hits)
            if not exhaustive:
                break
    return matches, tried


def _scan_slave_stage(
    known: bytes,
    target: bytes,
    chunk: int,
    borrow: str,
    exhaustive: bool,
    start: int,
    stop: int,
) -> tuple[list[int], int]:
    target_row = np.frombuffer(target, dtype=np.uint8)
    known_arr = np.frombuffer(known, dtype=np.uint8)
    chunk_at = 0 if borrow == "tail" else 16 - chunk
    known_at = slice(chunk, 16) if borrow == "tail" else slice(0, 16 - chunk)

    matches: list[int] = []
    tried = 0
    for base in range(start, stop, _BATCH):
        count = min(_BATCH, stop - base)
        keys = np.zeros((count, 32), dtype=np.uint8)  # written half zero, per slot semantics
        keys[:, known_at] = known_arr
        values = np.arange(base, base + count, dtype=np.uint64)
        for j in range(chunk):
            keys[:, chunk_at + j] = (values >> (8 * (chunk - 1 - j))).astype(np.uint8)
        cts = _encrypt_block_under_keys(keys, bytes(16))
        tried += count
        hits = np.nonzero((cts == target_row).all(axis=1))[0]
        if len(hits):
            matches.extend(int(base + h) for h in hits)
            if not exhaustive:
                break
    return matches, tried


def _run_partitioned(worker: Callable, args: tuple, space: int, workers: int) -> tuple[list[int], int]:
    if workers <= 1:
        return worker(*args, 0, space)
    bounds = [space * i // workers for i in range(workers + 1)]
    ranges = [(bounds[i], bounds[i + 1]) for i in range(workers) if bounds[i] < bounds[i + 1]]
    matches: list[int] = []
    tried = 0
    with ProcessPoolExecutor(max_workers=len(ranges)) as pool:
        futures = [pool.submit(worker, *args, lo, hi) for lo, hi in ranges]
        for fut in futures:
            got, n = fut.result()
            matches.extend(got)
            tried += n
    return matches, tried


def bust(
    art: BorrowArtifacts,
    workers: int = 1,
    borrow: str = "tail",
    progress: Callable[[str], None] | None = None,
) -> BustResult:
    """Recover the hidden 16-byte block behind a full artifact set.

    Chunks are solved tail-to-head for the default tail-borrow devices
    (``borrow="head"`` mirrors everything for the other hardware reading).
    The reconstruction is re-verified against every artifact before it is
    returned. Raises ArtifactMismatch naming the first stage with no
    solution.
    """
    if borrow not in ("tail", "head"):
        raise ValueError(f"borrow must be 'tail' or 'head', got {borrow!r}")
    chunk = art.chunk_bits // 8
    space = 1 << art.chunk_bits
    exhaustive = art.chunk_bits <= _EXHAUSTIVE_LIMIT
    started = time.perf_counter()
    aes_ops = 0

    known = b""
    for stage, target in enumerate(art.stage_cts):
        zeros, chunk_window, known_window = _stage_layout(stage, chunk, borrow)
        if progress:
            progress(f"stage {stage + 1}/{len(art.stage_cts)}: scanning {space} chunks")
        matches, tried = _run_partitioned(
            _scan_data_stage,
            (art.fixed_key, target, chunk_window, known_window, known, chunk, exhaustive),
            space,
            workers,
        )
        aes_ops += tried
        if not matches:
            raise ArtifactMismatch(f"stage {stage + 1} of {len(art.stage_cts)}")
        if exhaustive and len(matches) > 1:
            raise ArtifactMismatch(f"stage {stage + 1} of {len(art.stage_cts)} (ambiguous)")
        found = min(matches).to_bytes(chunk, "big")
        known = found + known if borrow == "tail" else known + found

    if progress:
        progress(f"slave stage: scanning {space} keys")
    matches, tried = _run_partitioned(
        _scan_slave_stage, (known, art.slave_ct, chunk, borrow, exhaustive), space, workers
    )
    aes_ops += tried
    if not matches:
        raise ArtifactMismatch("slave")
    if exhaustive and len(matches) > 1:
        raise ArtifactMismatch("slave (ambiguous)")
    head = min(matches).to_bytes(chunk, "big")
    hidden = head + known if borrow == "tail" else known + head

    _verify(art, hidden, borrow)
    return BustResult(hidden=hidden, aes_ops=aes_ops, elapsed=time.perf_counter() - started)


def _verify(art: BorrowArtifacts, hidden: bytes, borrow: str) -> None:
    chunk = art.chunk_bits // 8
    for stage, target in enumerate(art.stage_cts):
        zeros, chunk_window, known_window = _stage_layout(stage, chunk, borrow)
        block = bytearray(16)
        window = slice(chunk_window.start, 16) if borrow == "tail" else slice(0, chunk_window.stop)
        block[window] = hidden[window]
        if _ecb_encrypt(art.fixed_key, bytes(block)) != target:
            raise ArtifactMismatch(f"stage {stage + 1} of {len(art.stage_cts)} (verification)")
    if _ecb_encrypt(slave_key_from_block(hidden), bytes(16)) != art.slave_ct:
        raise ArtifactMismatch("slave (verification)")


def recover_hidden(art: BorrowArtifacts, workers: int = 1, borrow: str = "tail") -> bytes:
    return bust(art, workers=workers, borrow=borrow).hidden


def bust_batch(
    artifact_sets: Sequence[BorrowArtifacts],
    workers: int = 1,
    borrow: str = "tail",
) -> list[BustResult | ArtifactMismatch]:
    """Bust every artifact set, collecting per-set failures instead of stopping."""
    out: list[BustResult | ArtifactMismatch] = []
    for art in artifact_sets:
        try:
            out.append(bust(art, workers=workers, borrow=borrow))
        except ArtifactMismatch as err:
            out.append(err)
    return out
