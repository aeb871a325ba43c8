"""Event counting and energy pricing.

Prices are exact rationals (parsed from their decimal text), counts are
integers, so the total is exactly the sum of its parts.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .params import ConfigError, format_kv, parse_kv

SCALAR_EVENTS = ("mem_read_bytes", "mem_write_bytes", "dac_conversions", "adc_conversions")

# Joules per event. Only the ordering is meaningful: converters dominate the
# array, and the array computation dominates memory traffic.
DEFAULT_PRICES = {
    "mem_read_byte": "5e-14",
    "mem_write_byte": "5e-14",
    "dac_conversion": "5e-13",
    "adc_conversion": "2e-12",
    "crossbar_cell": "1e-15",
}
_PRICE_OF = {
    "mem_read_bytes": "mem_read_byte",
    "mem_write_bytes": "mem_write_byte",
    "dac_conversions": "dac_conversion",
    "adc_conversions": "adc_conversion",
}


def _fraction(value) -> Fraction:
    try:
        f = Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"bad energy price {value!r}") from None
    if f < 0:
        raise ConfigError(f"energy price must be >= 0, got {value!r}")
    return f


@dataclass(frozen=True)
class PriceTable:
    prices: dict = field(default_factory=lambda: {k: _fraction(v) for k, v in DEFAULT_PRICES.items()})

    @classmethod
    def from_mapping(cls, mapping) -> "PriceTable":
        prices = {k: _fraction(v) for k, v in DEFAULT_PRICES.items()}
        for k, v in mapping.items():
            if k not in DEFAULT_PRICES and not k.startswith("crossbar_eval_"):
                raise ConfigError(f"unknown energy price {k!r}; known: {sorted(DEFAULT_PRICES)} "
                                  "or crossbar_eval_<size>")
            prices[k] = _fraction(v)
        return cls(prices)

    @classmethod
    def load(cls, path: str | Path) -> "PriceTable":
        try:
            return cls.from_mapping(parse_kv(Path(path).read_text()))
        except FileNotFoundError:
            raise ConfigError(f"price table not found: {path}") from None

    def crossbar_eval(self, size: int) -> Fraction:
        """One evaluation of a size x size tile; defaults to size^2 cell prices."""
        return self.prices.get(f"crossbar_eval_{size}", self.prices["crossbar_cell"] * size * size)

    def to_kv(self) -> str:
        return format_kv({k: str(v) if v.denominator == 1 else float(v) for k, v in self.prices.items()})


@dataclass
class EnergyLedger:
    counters: Counter = field(default_factory=Counter)
    crossbar_evals: Counter = field(default_factory=Counter)  # tile size -> evaluations

    def add(self, event: str, count: int) -> None:
        if event not in SCALAR_EVENTS:
            raise KeyError(f"unknown event {event!r}")
        if count < 0:
            raise ValueError("event counts only grow")
        self.counters[event] += int(count)

    def add_crossbar(self, size: int, count: int) -> None:
        if count < 0:
            raise ValueError("event counts only grow")
        self.crossbar_evals[int(size)] += int(count)

    def record_tile(self, size: int, n_vectors: int, logical_cols: int,
                    read_bytes: int = 0, write_bytes: int = 0) -> None:
        """One tile applied to ``n_vectors`` inputs: every row is driven and
        every differential pair is converted, mapped or not."""
        self.add_crossbar(size, n_vectors)
        self.add("dac_conversions", n_vectors * size)
        self.add("adc_conversions", n_vectors * logical_cols)
        self.add("mem_read_bytes", read_bytes)
        self.add("mem_write_bytes", write_bytes)

    def merge(self, other: "EnergyLedger") -> "EnergyLedger":
        self.counters.update(other.counters)
        self.crossbar_evals.update(other.crossbar_evals)
        return self

    def breakdown(self, prices: PriceTable | None = None) -> dict:
        """Exact energy per component (Fractions, joules)."""
        prices = prices or PriceTable()
        out = {ev: self.counters[ev] * prices.prices[_PRICE_OF[ev]] for ev in SCALAR_EVENTS}
        for size in sorted(self.crossbar_evals):
            out[f"crossbar_{size}"] = self.crossbar_evals[size] * prices.crossbar_eval(size)
        return out

    def total(self, prices: PriceTable | None = None) -> Fraction:
        return sum(self.breakdown(prices).values(), Fraction(0))

    def groups(self, prices: PriceTable | None = None) -> dict:
        """Memory read / memory write / crossbar computation (array + converters)."""
        b = self.breakdown(prices)
        compute = sum((v for k, v in b.items() if k.startswith("crossbar_")), Fraction(0))
        return {"mem_read": b["mem_read_bytes"], "mem_write": b["mem_write_bytes"],
                "cross_computation": compute + b["dac_conversions"] + b["adc_conversions"]}

    def to_dict(self) -> dict:
        return {"counters": {k: self.counters[k] for k in SCALAR_EVENTS},
                "crossbar_evals": {str(k): v for k, v in sorted(self.crossbar_evals.items())}}

    @classmethod
    def from_dict(cls, d: dict) -> "EnergyLedger":
        led = cls()
        try:
            for k, v in d.get("counters", {}).items():
                led.add(k, int(v))
            for k, v in d.get("crossbar_evals", {}).items():
                led.add_crossbar(int(k), int(v))
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"malformed ledger: {exc}") from None
        return led

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "EnergyLedger":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except FileNotFoundError:
            raise ConfigError(f"ledger file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"ledger file is not JSON: {exc}") from None
