"""CKKS parameter sets and the JSON file that names them."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from helo.ring import RingParams, RingError

LABELS = ("toy", "mid", "std")


class ParamsError(ValueError):
    pass


@dataclass(frozen=True)
class CkksParams:
    ring: RingParams
    scale_bits: int = 40
    label: str = "toy"
    sigma: float = 3.2
    message_bound: float = 8192.0

    def __post_init__(self):
        if self.label not in LABELS and not self.label.startswith("custom"):
            raise ParamsError(f"unknown security label {self.label!r}")
        for q in self.ring.moduli:
            if self.scale_bits >= q.bit_length():
                raise ParamsError(f"log2(scale)={self.scale_bits} not below bit length of modulus {q}")
        if len(self.ring.special_moduli) != 1:
            raise ParamsError("exactly one key-switching prime is supported")
        if self.sigma <= 0:
            raise ParamsError("sigma must be positive")

    @property
    def scale(self) -> float:
        return float(2 ** self.scale_bits)

    @property
    def degree(self) -> int:
        return self.ring.degree

    @property
    def slot_count(self) -> int:
        return self.ring.degree // 2

    @property
    def max_level(self) -> int:
        return self.ring.max_level

    @property
    def security(self) -> int:
        return {"toy": 12, "mid": 80, "std": 128}.get(self.label, 0)

    def modulus_bits(self) -> float:
        return sum(math.log2(q) for q in self.ring.moduli + self.ring.special_moduli)


def _default_path():
    return resources.files("helo").joinpath("data/params.json")


def load_param_file(path: str | Path | None = None) -> dict:
    try:
        text = Path(path).read_text() if path is not None else _default_path().read_text()
        doc = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParamsError(f"cannot read parameter file: {exc}") from exc
    sets = doc.get("sets") if isinstance(doc, dict) else None
    if not isinstance(sets, dict) or not sets:
        raise ParamsError("parameter file has no 'sets' table")
    for name, entry in sets.items():
        missing = {"degree", "first_bits", "scale_bits", "levels", "special_bits"} - set(entry)
        if missing:
            raise ParamsError(f"set {name!r} missing {sorted(missing)}")
    return sets


@lru_cache(maxsize=16)
def _build(degree: int, first_bits: int, scale_bits: int, levels: int, special_bits: int,
           label: str, sigma: float, message_bound: float) -> CkksParams:
    try:
        ring = RingParams.generate(degree, first_bits, scale_bits, levels, special_bits, 1)
    except RingError as exc:
        raise ParamsError(str(exc)) from exc
    return CkksParams(ring, scale_bits, label, sigma, message_bound)


def params_for(label: str = "toy", path: str | Path | None = None, degree: int | None = None) -> CkksParams:
    """Build the named parameter set; `degree` overrides the file (tests use small rings)."""
    sets = load_param_file(path)
    if label not in sets:
        raise ParamsError(f"label {label!r} not in parameter file (have {sorted(sets)})")
    e = sets[label]
    try:
        return _build(int(degree or e["degree"]), int(e["first_bits"]), int(e["scale_bits"]), int(e["levels"]),
                      int(e["special_bits"]), label, float(e.get("sigma", 3.2)), float(e.get("message_bound", 8192)))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParamsError):
            raise
        raise ParamsError(f"bad value in set {label!r}: {exc}") from exc
