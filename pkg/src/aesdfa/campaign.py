"""Simulated glitch campaigns and their on-disk record format.

A campaign fixes one key and one plaintext and produces many ciphertexts,
some corrupted. Glitch offsets are opaque labels (quarter-cycle decimals):
each maps to a distribution over which operation the fault enters and how
many bits it flips. An optional static mask is applied identically in every
glitched run, on top of whatever per-sample dynamic fault fires; samples
whose dynamic fault does not fire then carry the static corruption alone.

Records serialize as JSON lines with fields exactly:
plaintext, ciphertext, n, m, slot, faulted. The baseline (unglitched)
record carries null n and m.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import IO, Iterable

from .aes import ROUNDS_BY_KEY_LEN, StepId, block_from_hex, encrypt_block, expand_key
from .faults import FaultRole, FaultSpec, encrypt_with_faults

__all__ = [
    "MaskRule",
    "OffsetBehavior",
    "CampaignConfig",
    "CiphertextRecord",
    "RecordFormatError",
    "ConfigError",
    "generate_campaign",
    "write_records",
    "read_records",
    "records_to_lines",
    "quantize_offset",
    "parse_config",
]


def quantize_offset(n: float) -> float:
    """Snap an offset to quarter-cycle resolution, rejecting anything else."""
    q = round(n * 4)
    if abs(n * 4 - q) > 1e-9:
        raise ValueError(f"glitch offsets have quarter-cycle resolution, got {n}")
    return q / 4


@dataclass(frozen=True)
class MaskRule:
    """How a dynamic fault mask is drawn: bit count, optionally pinned to one byte."""

    bits: int
    byte: int | None = None

    def __post_init__(self):
        if not 1 <= self.bits <= 128:
            raise ValueError(f"bits must be 1..128, got {self.bits}")
        if self.byte is not None:
            if not 0 <= self.byte <= 15:
                raise ValueError(f"byte must be 0..15, got {self.byte}")
            if self.bits > 8:
                raise ValueError("a single byte holds at most 8 flipped bits")

    def draw(self, rng: random.Random) -> bytes:
        mask = bytearray(16)
        if self.byte is not None:
            for bit in rng.sample(range(8), self.bits):
                mask[self.byte] |= 1 << bit
        else:
            for pos in rng.sample(range(128), self.bits):
                mask[pos // 8] |= 1 << (pos % 8)
        return bytes(mask)


@dataclass(frozen=True)
class OffsetBehavior:
    """Weighted outcomes (step, mask rule) for one glitch offset."""

    entries: tuple[tuple[StepId, MaskRule, float], ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("an offset needs at least one (step, mask rule) entry")
        for _, _, weight in self.entries:
            if weight <= 0:
                raise ValueError("entry weights must be positive")

    def draw(self, rng: random.Random) -> tuple[StepId, MaskRule]:
        steps = [(s, r) for s, r, _ in self.entries]
        weights = [w for _, _, w in self.entries]
        return rng.choices(steps, weights=weights, k=1)[0]


@dataclass(frozen=True)
class CampaignConfig:
    """Everything needed to reproduce one simulated campaign."""

    key: bytes
    plaintext: bytes
    samples: int
    offsets: dict  # quantized offset -> OffsetBehavior
    slot: int = 0
    width: float = 1.0
    fault_rate: float = 1.0
    static_mask: bytes | None = None
    static_step: StepId | None = None
    seed: int = 0

    def __post_init__(self):
        if len(self.key) not in ROUNDS_BY_KEY_LEN:
            raise ValueError(f"key must be 16, 24 or 32 bytes, got {len(self.key)}")
        if len(self.plaintext) != 16:
            raise ValueError("plaintext must be 16 bytes")
        if self.samples < 0:
            raise ValueError("samples must be >= 0")
        if not self.offsets:
            raise ValueError("campaign needs at least one glitch offset")
        for n in self.offsets:
            if quantize_offset(n) != n:
                raise ValueError(f"offset {n} is not in quarter-cycle form")
        if not 0.0 <= self.fault_rate <= 1.0:
            raise ValueError("fault_rate must be within [0, 1]")
        if self.static_mask is not None:
            if len(self.static_mask) != 16:
                raise ValueError("static mask must be 16 bytes")
            if not any(self.static_mask):
                raise ValueError("static mask must be nonzero")
        n_rounds = ROUNDS_BY_KEY_LEN[len(self.key)]
        for behavior in self.offsets.values():
            for step, _, _ in behavior.entries:
                step.validate(n_rounds)
        if self.static_step is not None:
            self.static_step.validate(n_rounds)


@dataclass(frozen=True)
class CiphertextRecord:
    """One campaign sample: the block pair plus the glitch parameters."""

    plaintext_hex: str
    ciphertext_hex: str
    offset_n: float | None
    width_m: float | None
    slot: int
    faulted: bool

    def __post_init__(self):
        block_from_hex(self.plaintext_hex)
        block_from_hex(self.ciphertext_hex)

    @property
    def plaintext(self) -> bytes:
        return bytes.fromhex(self.plaintext_hex)

    @property
    def ciphertext(self) -> bytes:
        return bytes.fromhex(self.ciphertext_hex)

    def to_json(self) -> str:
        return json.dumps(
            {
                "plaintext": self.plaintext_hex,
                "ciphertext": self.ciphertext_hex,
                "n": self.offset_n,
                "m": self.width_m,
                "slot": self.slot,
                "faulted": self.faulted,
            },
            separators=(", ", ": "),
        )


class RecordFormatError(Exception):
    """A campaign file line that does not parse; carries the line number."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


def generate_campaign(cfg: CampaignConfig) -> list[CiphertextRecord]:
    """Run the simulated campaign; deterministic for a given config.

    The first record is always the unglitched baseline. Every following
    record models one glitched run: an offset is chosen uniformly, the
    offset's distribution picks the target step and mask shape, and the
    dynamic fault fires with probability fault_rate. The static mask, when
    configured, lands in every glitched run at the drawn step (or at its
    own pinned step). The random draw sequence does not depend on the
    static mask, so campaigns differing only in it stay sample-aligned.
    """
    rng = random.Random(cfg.seed)
    ks = expand_key(cfg.key)
    clean_ct = encrypt_block(cfg.plaintext, ks)
    pt_hex = cfg.plaintext.hex()

    records = [
        CiphertextRecord(pt_hex, clean_ct.hex(), None, None, cfg.slot, False)
    ]
    offsets = sorted(cfg.offsets)
    for _ in range(cfg.samples):
        offset = offsets[0] if len(offsets) == 1 else rng.choice(offsets)
        step, rule = cfg.offsets[offset].draw(rng)
        fired = rng.random() < cfg.fault_rate
        faults = []
        if cfg.static_mask is not None:
            faults.append(
                FaultSpec(cfg.static_step or step, cfg.static_mask, FaultRole.STATIC)
            )
        if fired:
            faults.append(FaultSpec(step, rule.draw(rng), FaultRole.DYNAMIC))
        ct = encrypt_with_faults(cfg.plaintext, ks, faults) if faults else clean_ct
        records.append(
            CiphertextRecord(pt_hex, ct.hex(), offset, cfg.width, cfg.slot, bool(faults))
        )
    return records


def records_to_lines(records: Iterable[CiphertextRecord]) -> str:
    return "".join(rec.to_json() + "\n" for rec in records)


def write_records(records: Iterable[CiphertextRecord], fp: IO[str]) -> None:
    fp.write(records_to_lines(records))


_RECORD_FIELDS = {"plaintext", "ciphertext", "n", "m", "slot", "faulted"}


def read_records(fp: IO[str]) -> list[CiphertextRecord]:
    """Parse a JSON-lines campaign file, reporting bad lines by number."""
    records = []
    for line_no, line in enumerate(fp, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as err:
            raise RecordFormatError(line_no, f"invalid JSON ({err.msg})") from None
        if not isinstance(raw, dict):
            raise RecordFormatError(line_no, "expected a JSON object")
        missing = _RECORD_FIELDS - raw.keys()
        if missing:
            raise RecordFormatError(line_no, f"missing fields: {', '.join(sorted(missing))}")
        try:
            records.append(
                CiphertextRecord(
                    plaintext_hex=raw["plaintext"],
                    ciphertext_hex=raw["ciphertext"],
                    offset_n=None if raw["n"] is None else float(raw["n"]),
                    width_m=None if raw["m"] is None else float(raw["m"]),
                    slot=int(raw["slot"]),
                    faulted=bool(raw["faulted"]),
                )
            )
        except (ValueError, TypeError) as err:
            raise RecordFormatError(line_no, str(err)) from None
    return records


# ---------------------------------------------------------------------------
# Flat key=value campaign config files


class ConfigError(Exception):
    """A config line that does not parse; carries the line number."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


def _parse_hex(value: str, line_no: int, name: str, sizes: tuple[int, ...]) -> bytes:
    try:
        raw = bytes.fromhex(value)
    except ValueError:
        raise ConfigError(line_no, f"{name} is not valid hex") from None
    if len(raw) not in sizes:
        allowed = " or ".join(str(s) for s in sizes)
        raise ConfigError(line_no, f"{name} must be {allowed} bytes, got {len(raw)}")
    return raw


def _parse_offset_entry(value: str, line_no: int) -> tuple[StepId, MaskRule, float]:
    from .aes import AesOp

    fields = {}
    for token in value.split():
        if "=" not in token:
            raise ConfigError(line_no, f"expected key=value tokens, got {token!r}")
        k, _, v = token.partition("=")
        fields[k.strip()] = v.strip()
    unknown = set(fields) - {"round", "op", "bits", "byte", "weight"}
    if unknown:
        raise ConfigError(line_no, f"unknown offset fields: {', '.join(sorted(unknown))}")
    try:
        step = StepId(int(fields["round"]), AesOp.from_label(fields["op"]))
        rule = MaskRule(
            bits=int(fields.get("bits", 1)),
            byte=int(fields["byte"]) if "byte" in fields else None,
        )
        weight = float(fields.get("weight", 1.0))
    except KeyError as err:
        raise ConfigError(line_no, f"offset entry needs {err.args[0]}=") from None
    except ValueError as err:
        raise ConfigError(line_no, str(err)) from None
    return step, rule, weight


def parse_config(fp: IO[str]) -> CampaignConfig:
    """Parse the flat key = value campaign config format.

    Scalar keys: key, plaintext, samples, seed, slot, width, fault_rate,
    static_mask, static_round, static_op. Repeatable keys of the form
    ``offset <n> = round=12 op=MixColumns bits=1 [byte=0] [weight=1]``
    accumulate the per-offset fault distribution.
    """
    from .aes import AesOp

    scalars: dict[str, str] = {}
    entries: dict[float, list] = {}
    for line_no, line in enumerate(fp, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise ConfigError(line_no, "expected key = value")
        key, _, value = text.partition("=")
        key, value = key.strip(), value.strip()
        if key.startswith("offset"):
            label = key[len("offset"):].strip()
            try:
                offset = quantize_offset(float(label))
            except ValueError as err:
                raise ConfigError(line_no, str(err)) from None
            entries.setdefault(offset, []).append((*_parse_offset_entry(value, line_no), line_no))
        elif key in scalars:
            raise ConfigError(line_no, f"duplicate key {key!r}")
        else:
            scalars[key] = value
            scalars[f"__line_{key}"] = str(line_no)

    def line_of(name: str) -> int:
        return int(scalars.get(f"__line_{name}", 0))

    known = {"key", "plaintext", "samples", "seed", "slot", "width",
             "fault_rate", "static_mask", "static_round", "static_op"}
    for name in scalars:
        if not name.startswith("__line_") and name not in known:
            raise ConfigError(line_of(name), f"unknown key {name!r}")
    for required in ("key", "plaintext", "samples"):
        if required not in scalars:
            raise ConfigError(0, f"missing required key {required!r}")
    if not entries:
        raise ConfigError(0, "config defines no glitch offsets")

    key = _parse_hex(scalars["key"], line_of("key"), "key", (16, 24, 32))
    plaintext = _parse_hex(scalars["plaintext"], line_of("plaintext"), "plaintext", (16,))
    n_rounds = ROUNDS_BY_KEY_LEN[len(key)]
    for rows in entries.values():
        for step, _, _, entry_line in rows:
            try:
                step.validate(n_rounds)
            except ValueError as err:
                raise ConfigError(entry_line, str(err)) from None
    static_mask = None
    if "static_mask" in scalars:
        static_mask = _parse_hex(scalars["static_mask"], line_of("static_mask"), "static_mask", (16,))
    static_step = None
    if ("static_round" in scalars) != ("static_op" in scalars):
        raise ConfigError(line_of("static_round") or line_of("static_op"),
                          "static_round and static_op must be given together")
    if "static_round" in scalars:
        try:
            static_step = StepId(int(scalars["static_round"]), AesOp.from_label(scalars["static_op"]))
        except ValueError as err:
            raise ConfigError(line_of("static_round"), str(err)) from None

    def scalar(name: str, cast, default):
        if name not in scalars:
            return default
        try:
            return cast(scalars[name])
        except ValueError:
            raise ConfigError(line_of(name), f"bad value for {name!r}") from None

    try:
        return CampaignConfig(
            key=key,
            plaintext=plaintext,
            samples=scalar("samples", int, None),
            offsets={
                n: OffsetBehavior(tuple(row[:3] for row in rows))
                for n, rows in entries.items()
            },
            slot=scalar("slot", int, 0),
            width=scalar("width", float, 1.0),
            fault_rate=scalar("fault_rate", float, 1.0),
            static_mask=static_mask,
            static_step=static_step,
            seed=scalar("seed", int, 0),
        )
    except ValueError as err:
        raise ConfigError(0, str(err)) from None
