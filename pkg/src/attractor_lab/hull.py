"""Driver functions a(t) and their hulls under the time-shift flow.

A hull point is a driver together with a time shift, ``(p.t)(s) = p(t + s)``,
or one of the constant limit functions that the shifts accumulate on.
Constants are fixed points of the flow, so a limit point ignores shifts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, Unsupported

__all__ = [
    "Branch",
    "DriverSpec",
    "NamedPiecewise",
    "Constant",
    "QuasiPeriodic",
    "SlowGrowth",
    "Transformed",
    "HullPoint",
    "evaluate",
    "advance",
    "limit_points",
    "driver_from_json",
    "hull_point_from_json",
    "parse_driver",
]


@dataclass(frozen=True)
class Branch:
    """Closed-form piece of a driver on ``[lo, hi]``.

    kind is one of
      const        a = coef
      linear       a = coef * t
      inverse      a = coef / t        (only on branches with |t| >= 1)
      oscillatory  smooth, |a| <= coef, shortest length scale ``scale``
    """

    lo: float
    hi: float
    kind: str
    coef: float = 0.0
    scale: float = 1.0


class DriverSpec:
    """Base class. Subclasses are immutable and hashable."""

    kind: str = ""

    def value(self, t: float) -> float:
        raise NotImplementedError

    def values(self, t: np.ndarray) -> np.ndarray:
        return np.array([self.value(float(s)) for s in np.ravel(t)]).reshape(np.shape(t))

    def bound(self) -> float:
        """Analytic bound for sup |a|."""
        raise NotImplementedError

    def branches(self) -> list[Branch]:
        raise NotImplementedError

    def breakpoints(self) -> list[float]:
        out = []
        for b in self.branches():
            for e in (b.lo, b.hi):
                if math.isfinite(e) and e not in out:
                    out.append(e)
        return sorted(out)

    def limit_values(self) -> list[float]:
        raise Unsupported(f"hull of {self.kind} driver is not finitely listable; sample shifts instead")

    def is_graded(self) -> bool:
        """True when every non-constant piece varies on the scale |t| (1/t type tails)."""
        return False

    def to_json(self) -> dict:
        raise NotImplementedError

    @property
    def label(self) -> str:
        return self.kind


_NAMED = ("p0", "p1", "p2")


@dataclass(frozen=True)
class NamedPiecewise(DriverSpec):
    name: str

    def __post_init__(self):
        if self.name not in _NAMED:
            raise ConfigError(f"unknown piecewise driver {self.name!r}; expected one of {_NAMED}")

    @property
    def kind(self) -> str:  # type: ignore[override]
        return self.name

    def value(self, t: float) -> float:
        t = float(t)
        if self.name == "p0":
            return -2.0 / t if abs(t) >= 1.0 else -2.0 * t
        if self.name == "p1":
            return -2.0 / t if t <= -1.0 else 2.0
        return 1.0 / t if t <= -1.0 else -1.0

    def values(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        safe = np.where(np.abs(t) >= 1.0, t, 1.0)
        if self.name == "p0":
            return np.where(np.abs(t) >= 1.0, -2.0 / safe, -2.0 * t)
        if self.name == "p1":
            return np.where(t <= -1.0, -2.0 / safe, 2.0)
        return np.where(t <= -1.0, 1.0 / safe, -1.0)

    def bound(self) -> float:
        return 1.0 if self.name == "p2" else 2.0

    def branches(self) -> list[Branch]:
        inf = math.inf
        if self.name == "p0":
            return [Branch(-inf, -1.0, "inverse", -2.0), Branch(-1.0, 1.0, "linear", -2.0),
                    Branch(1.0, inf, "inverse", -2.0)]
        if self.name == "p1":
            return [Branch(-inf, -1.0, "inverse", -2.0), Branch(-1.0, inf, "const", 2.0)]
        return [Branch(-inf, -1.0, "inverse", 1.0), Branch(-1.0, inf, "const", -1.0)]

    def limit_values(self) -> list[float]:
        return {"p0": [0.0], "p1": [0.0, 2.0], "p2": [0.0, -1.0]}[self.name]

    def is_graded(self) -> bool:
        return True

    def to_json(self) -> dict:
        return {"kind": self.name}


@dataclass(frozen=True)
class Constant(DriverSpec):
    c: float
    kind = "constant"

    def value(self, t: float) -> float:
        return float(self.c)

    def values(self, t: np.ndarray) -> np.ndarray:
        return np.full(np.shape(t), float(self.c))

    def bound(self) -> float:
        return abs(float(self.c))

    def branches(self) -> list[Branch]:
        return [Branch(-math.inf, math.inf, "const", float(self.c))]

    def limit_values(self) -> list[float]:
        return [float(self.c)]

    def to_json(self) -> dict:
        return {"kind": "constant", "c": float(self.c)}

    @property
    def label(self) -> str:
        return f"constant({self.c:g})"


@dataclass(frozen=True)
class QuasiPeriodic(DriverSpec):
    """a(t) = sum_k A_k cos(w_k t + phi_k).

    The hull is the torus of phase vectors; a shift by t moves the phases
    linearly, see ``torus_phases``.
    """

    amplitudes: tuple[float, ...]
    frequencies: tuple[float, ...]
    phases: tuple[float, ...] = ()
    kind = "quasiperiodic"

    def __post_init__(self):
        amps = tuple(float(a) for a in self.amplitudes)
        freqs = tuple(float(w) for w in self.frequencies)
        phases = tuple(float(p) for p in self.phases) or (0.0,) * len(amps)
        if not (len(amps) == len(freqs) == len(phases)) or not amps:
            raise ConfigError("quasiperiodic driver needs equally long, nonempty amplitude/frequency/phase lists")
        if any(w <= 0 for w in freqs):
            raise ConfigError("quasiperiodic frequencies must be positive")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "phases", phases)

    def value(self, t: float) -> float:
        return sum(a * math.cos(w * t + p) for a, w, p in zip(self.amplitudes, self.frequencies, self.phases))

    def values(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for a, w, p in zip(self.amplitudes, self.frequencies, self.phases):
            out += a * np.cos(w * t + p)
        return out

    def bound(self) -> float:
        return float(sum(abs(a) for a in self.amplitudes))

    def branches(self) -> list[Branch]:
        return [Branch(-math.inf, math.inf, "oscillatory", self.bound(), 1.0 / max(self.frequencies))]

    def at_phases(self, phases: Sequence[float]) -> "QuasiPeriodic":
        """Hull element with an arbitrary phase vector (possibly off the orbit of self)."""
        return QuasiPeriodic(self.amplitudes, self.frequencies, tuple(phases))

    def to_json(self) -> dict:
        return {"kind": "quasiperiodic", "amplitudes": list(self.amplitudes),
                "frequencies": list(self.frequencies), "phases": list(self.phases)}


@dataclass(frozen=True)
class SlowGrowth(DriverSpec):
    """Mean-zero almost periodic driver with slowly growing primitive.

    a(t) = amplitude * sum_{k<n_terms} 2^(-k(1-beta)) cos(2^-k t)

    Term k contributes 2^(k beta) sin(2^-k t) to the primitive, so
    |int_0^t a| stays below C t^beta until the slowest mode saturates
    (around t ~ 2^n_terms).
    """

    beta: float = 0.5
    n_terms: int = 24
    amplitude: float = 1.0
    kind = "slowgrowth"

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ConfigError("slowgrowth beta must lie in (0, 1)")
        if self.n_terms < 1:
            raise ConfigError("slowgrowth needs at least one term")

    def _weights(self):
        k = np.arange(self.n_terms, dtype=float)
        return self.amplitude * 2.0 ** (-k * (1.0 - self.beta)), 2.0 ** (-k)

    def value(self, t: float) -> float:
        w, f = self._weights()
        return float(np.dot(w, np.cos(f * t)))

    def values(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        w, f = self._weights()
        out = np.zeros_like(t)
        for wk, fk in zip(w, f):
            out += wk * np.cos(fk * t)
        return out

    def bound(self) -> float:
        return float(np.sum(np.abs(self._weights()[0])))

    def branches(self) -> list[Branch]:
        return [Branch(-math.inf, math.inf, "oscillatory", self.bound(), 1.0)]

    def to_json(self) -> dict:
        return {"kind": "slowgrowth", "beta": self.beta, "n_terms": self.n_terms, "amplitude": self.amplitude}


@dataclass(frozen=True)
class Transformed(DriverSpec):
    """a(t) = scale * base(-t if reverse else t)."""

    base: DriverSpec
    scale: float = 1.0
    reverse: bool = False
    kind = "transformed"

    def _arg(self, t):
        return -t if self.reverse else t

    def value(self, t: float) -> float:
        return self.scale * self.base.value(self._arg(t))

    def values(self, t: np.ndarray) -> np.ndarray:
        return self.scale * self.base.values(self._arg(np.asarray(t, dtype=float)))

    def bound(self) -> float:
        return abs(self.scale) * self.base.bound()

    def branches(self) -> list[Branch]:
        out = []
        for b in self.base.branches():
            lo, hi = (-b.hi, -b.lo) if self.reverse else (b.lo, b.hi)
            coef = self.scale * b.coef
            if self.reverse and b.kind in ("linear", "inverse"):
                coef = -coef
            if b.kind == "oscillatory":
                coef = abs(coef)
            out.append(Branch(lo, hi, b.kind, coef, b.scale))
        return sorted(out, key=lambda b: b.lo)

    def limit_values(self) -> list[float]:
        return [self.scale * v for v in self.base.limit_values()]

    def is_graded(self) -> bool:
        return self.base.is_graded()

    def to_json(self) -> dict:
        return {"kind": "transformed", "base": self.base.to_json(), "scale": self.scale, "reverse": self.reverse}

    @property
    def label(self) -> str:
        sign = "-t" if self.reverse else "t"
        return f"{self.scale:g}*{self.base.label}({sign})"


@dataclass(frozen=True)
class HullPoint:
    """Element of the hull: ``driver`` shifted by ``shift``, or a constant limit."""

    driver: DriverSpec
    shift: float = 0.0
    limit: float | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "shift", float(self.shift))
        if self.limit is not None:
            lim = float(self.limit)
            known = self.driver.limit_values()
            if not any(abs(lim - v) <= 1e-12 * max(1.0, abs(v)) for v in known):
                raise ConfigError(f"{lim:g} is not a limit function of {self.driver.label}; known {known}")
            object.__setattr__(self, "limit", lim)
            object.__setattr__(self, "shift", 0.0)

    @property
    def is_limit(self) -> bool:
        return self.limit is not None

    def evaluate(self, t: float) -> float:
        if self.limit is not None:
            return self.limit
        return self.driver.value(self.shift + t)

    def values(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.limit is not None:
            return np.full(t.shape, self.limit)
        return self.driver.values(self.shift + t)

    def advance(self, t: float) -> "HullPoint":
        if self.limit is not None or t == 0:
            return self
        return HullPoint(self.driver, self.shift + float(t))

    def bound(self) -> float:
        return abs(self.limit) if self.limit is not None else self.driver.bound()

    def torus_phases(self) -> np.ndarray:
        """Phase vector of a quasi-periodic hull point, reduced mod 2 pi."""
        if not isinstance(self.driver, QuasiPeriodic) or self.limit is not None:
            raise Unsupported("torus phases exist only for quasi-periodic drivers")
        d = self.driver
        return np.mod(np.array(d.phases) + np.array(d.frequencies) * self.shift, 2 * math.pi)

    @property
    def label(self) -> str:
        if self.limit is not None:
            return "zero" if self.limit == 0 else f"const({self.limit:g})"
        if self.shift == 0:
            return self.driver.label
        return f"{self.driver.label}@{self.shift:g}"

    def to_json(self) -> dict:
        out = {"driver": self.driver.to_json(), "shift": self.shift}
        if self.limit is not None:
            out["limit"] = self.limit
        return out


def evaluate(hp: HullPoint, t: float) -> float:
    return hp.evaluate(t)


def advance(hp: HullPoint, t: float) -> HullPoint:
    return hp.advance(t)


def limit_points(d: DriverSpec) -> list[HullPoint]:
    return [HullPoint(d, 0.0, v) for v in d.limit_values()]


_DRIVER_KEYS = {
    "p0": set(), "p1": set(), "p2": set(),
    "constant": {"c"},
    "quasiperiodic": {"amplitudes", "frequencies", "phases"},
    "slowgrowth": {"beta", "n_terms", "amplitude"},
    "transformed": {"base", "scale", "reverse"},
}


def driver_from_json(obj) -> DriverSpec:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError("driver must be an object with a 'kind' key")
    kind = obj["kind"]
    if kind not in _DRIVER_KEYS:
        raise ConfigError(f"unknown driver kind {kind!r}")
    extra = set(obj) - _DRIVER_KEYS[kind] - {"kind"}
    if extra:
        raise ConfigError(f"unknown key(s) {sorted(extra)} in {kind} driver")
    try:
        if kind in _NAMED:
            return NamedPiecewise(kind)
        if kind == "constant":
            return Constant(float(obj["c"]))
        if kind == "quasiperiodic":
            return QuasiPeriodic(tuple(obj["amplitudes"]), tuple(obj["frequencies"]), tuple(obj.get("phases", ())))
        if kind == "slowgrowth":
            return SlowGrowth(float(obj.get("beta", 0.5)), int(obj.get("n_terms", 24)), float(obj.get("amplitude", 1.0)))
        return Transformed(driver_from_json(obj["base"]), float(obj.get("scale", 1.0)), bool(obj.get("reverse", False)))
    except KeyError as exc:
        raise ConfigError(f"{kind} driver is missing key {exc.args[0]!r}") from None


def hull_point_from_json(obj) -> HullPoint:
    if not isinstance(obj, dict):
        raise ConfigError("hull point must be an object")
    extra = set(obj) - {"driver", "shift", "limit"}
    if extra:
        raise ConfigError(f"unknown key(s) {sorted(extra)} in hull point")
    return HullPoint(driver_from_json(obj["driver"]), float(obj.get("shift", 0.0)), obj.get("limit"))


def parse_driver(text: str) -> DriverSpec:
    """Parse the short command-line form: p0, p1, p2, constant:<c>, slowgrowth[:beta]."""
    head, _, arg = text.partition(":")
    head = head.strip().lower()
    if head in _NAMED and not arg:
        return NamedPiecewise(head)
    if head == "constant" and arg:
        return Constant(float(arg))
    if head == "slowgrowth":
        return SlowGrowth(float(arg) if arg else 0.5)
    raise ConfigError(f"cannot parse driver {text!r}; use p0, p1, p2, constant:<c> or slowgrowth[:beta]")
