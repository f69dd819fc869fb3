"""Laser/microwave block sequences and their microwave payloads."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

BLOCK_KINDS = ("repump", "check", "spin_pump", "norm1", "norm0", "mw", "readout", "wait")
LASERS = ("off_resonant", "A1", "A2", "none")
MW_KINDS = ("rabi_burst", "pi_pulse", "ramsey", "hahn", "xy4", "xy8_n")
COUNTING = ("check", "norm1", "norm0", "readout")

XY4_PHASES = (0.0, 90.0, 0.0, 90.0)
XY8_PHASES = (0.0, 90.0, 0.0, 90.0, 90.0, 0.0, 90.0, 0.0)


class SequenceError(ValueError):
    """Malformed pulse sequence, detected before execution."""


@dataclass
class MwSequence:
    """Microwave payload swept over ``sweep``.

    ``sweep`` holds the pulse duration in us (``rabi_burst``), the microwave
    frequency in MHz (``pi_pulse``) or the interpulse delay tau in us
    (``ramsey``, ``hahn``, ``xy4``, ``xy8_n``). For decoupling the free
    evolution is ``t = 2 N tau`` with ``N`` refocusing pulses, i.e. ``tau`` of
    free time on each side of every pi pulse. ``phases`` lists the refocusing
    pulse phases in degrees; left empty it is filled from the kind.
    """

    kind: str
    frequency_mhz: float
    rabi_mhz: float
    sweep: list[float]
    phases: list[float] = field(default_factory=list)
    repeats: int = 1

    def __post_init__(self):
        self.sweep = [float(v) for v in self.sweep]
        self.phases = [float(v) for v in self.phases]
        if not self.phases:
            self.phases = list(default_phases(self.kind, self.repeats))

    @property
    def pi_duration(self) -> float:
        return 1.0 / (2.0 * self.rabi_mhz)

    @property
    def n_pulses(self) -> int:
        """Number of refocusing pi pulses (0 for Rabi, ESR and Ramsey)."""
        if self.kind == "hahn":
            return 1
        if self.kind in ("xy4", "xy8_n"):
            return len(self.phases)
        return 0

    def free_time(self, value: float) -> float:
        """Total free evolution (us) for sweep value ``value``."""
        if self.kind == "ramsey":
            return value
        if self.kind in ("hahn", "xy4", "xy8_n"):
            return 2.0 * self.n_pulses * value
        return 0.0

    def validate(self):
        if self.kind not in MW_KINDS:
            raise SequenceError(f"unknown microwave kind {self.kind!r}")
        if not self.rabi_mhz > 0:
            raise SequenceError("rabi_mhz must be positive")
        if not self.sweep:
            raise SequenceError("empty sweep")
        if self.kind != "pi_pulse" and min(self.sweep) < 0:
            raise SequenceError("durations and delays must be non-negative")
        if self.repeats < 1:
            raise SequenceError("repeats must be >= 1")
        expected = default_phases(self.kind, self.repeats)
        if tuple(self.phases) != expected:
            raise SequenceError(
                f"{self.kind} phase pattern {self.phases} does not match {list(expected)}"
            )

    def operations(self, value: float):
        """Ordered ``("pulse", phase_deg, duration_us)`` / ``("wait", duration_us)`` steps.

        The carrier frequency is ``frequency_mhz`` except for ``pi_pulse``,
        where it is the sweep value itself.
        """
        pi = self.pi_duration
        if self.kind == "rabi_burst":
            return [("pulse", 0.0, value)] if value > 0 else []
        if self.kind == "pi_pulse":
            return [("pulse", 0.0, pi)]
        if self.kind == "ramsey":
            return [("pulse", 0.0, pi / 2), ("wait", value), ("pulse", 0.0, pi / 2)]
        ops = [("pulse", 0.0, pi / 2), ("wait", value)]
        for k, phase in enumerate(self.phases):
            ops.append(("pulse", phase, pi))
            ops.append(("wait", value if k == len(self.phases) - 1 else 2.0 * value))
        # close so that the refocused spin always ends in the bright state:
        # an odd number of pi pulses already supplies the flip
        ops.append(("pulse", 180.0 if len(self.phases) % 2 else 0.0, pi / 2))
        return ops

    def carrier(self, value: float) -> float:
        return value if self.kind == "pi_pulse" else self.frequency_mhz


def default_phases(kind: str, repeats: int = 1) -> tuple[float, ...]:
    if kind == "hahn":
        return (0.0,)
    if kind == "xy4":
        return XY4_PHASES * repeats
    if kind == "xy8_n":
        return XY8_PHASES * repeats
    return ()


@dataclass
class PulseBlock:
    kind: str
    duration_us: float
    laser: str = "none"
    power: float = 0.0
    counts_recorded: bool = False
    mw_payload: MwSequence | None = None

    def validate(self):
        if self.kind not in BLOCK_KINDS:
            raise SequenceError(f"unknown block kind {self.kind!r}")
        if self.laser not in LASERS:
            raise SequenceError(f"unknown laser {self.laser!r}")
        if self.kind == "mw":
            if self.mw_payload is None:
                raise SequenceError("mw block without payload")
            self.mw_payload.validate()
        elif not self.duration_us > 0:
            raise SequenceError(f"{self.kind} block needs a positive duration")
        if self.counts_recorded and self.laser == "none":
            raise SequenceError(f"{self.kind} block records counts with the lasers off")


def validate_sequence(blocks: list[PulseBlock]) -> MwSequence:
    """Check every block and return the (single) microwave payload."""
    if sum(b.kind == "readout" for b in blocks) != 1:
        raise SequenceError("sequence must contain exactly one readout block")
    mws = [b for b in blocks if b.kind == "mw"]
    if len(mws) != 1:
        raise SequenceError("sequence must contain exactly one mw block")
    for b in blocks:
        b.validate()
    return mws[0].mw_payload


def standard_sequence(mw: MwSequence) -> list[PulseBlock]:
    """Repump, check, spin pump, norm.1, norm.0, MW, readout with 10 us gaps."""
    blocks = [
        PulseBlock("repump", 10.0, "off_resonant", 10.0),
        PulseBlock("check", 150.0, "A1", 20.0, counts_recorded=True),
        PulseBlock("spin_pump", 60.0, "A1", 20.0),
        PulseBlock("norm1", 60.0, "A2", 20.0, counts_recorded=True),
        PulseBlock("norm0", 60.0, "A2", 20.0, counts_recorded=True),
        PulseBlock("mw", 0.0, "none", 0.0, mw_payload=mw),
        PulseBlock("readout", 60.0, "A2", 20.0, counts_recorded=True),
    ]
    out = []
    for k, b in enumerate(blocks):
        if k:
            out.append(PulseBlock("wait", 10.0))
        out.append(b)
    return out


def dump_sequence(blocks: list[PulseBlock]) -> str:
    """Descriptor text: JSON with a ``blocks`` list and one ``mw`` payload section."""
    mw = validate_sequence(blocks)
    doc = {
        "blocks": [
            {k: v for k, v in asdict(b).items() if k != "mw_payload"} for b in blocks
        ],
        "mw": asdict(mw),
    }
    return json.dumps(doc, indent=2)


def load_sequence(text: str) -> list[PulseBlock]:
    doc = json.loads(text)
    if "mw" not in doc or "blocks" not in doc:
        raise SequenceError("descriptor needs 'blocks' and 'mw' sections")
    mw = MwSequence(**doc["mw"])
    blocks = []
    for spec in doc["blocks"]:
        spec = dict(spec)
        payload = mw if spec.get("kind") == "mw" else None
        blocks.append(PulseBlock(mw_payload=payload, **spec))
    validate_sequence(blocks)
    return blocks


def sweep_array(mw: MwSequence) -> np.ndarray:
    return np.asarray(mw.sweep, dtype=float)
