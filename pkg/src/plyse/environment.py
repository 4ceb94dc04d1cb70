"""Per-slot random environment: fading channels, PU activity and energy arrivals."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .config import SystemParams

__all__ = [
    "EventGenerator",
    "RandomEvent",
    "SPEED_OF_LIGHT",
    "path_loss",
    "read_event_trace",
    "sample_event",
    "sinr",
    "write_event_trace",
]

SPEED_OF_LIGHT = 3e8
EVENT_FIELDS = ("slot", "a", "e_h", "h", "g_bar", "h_bar")


@dataclass(frozen=True)
class RandomEvent:
    a: int
    e_h: float
    h: float
    g_bar: float
    h_bar: float


def path_loss(d: float, sigma: float, params: SystemParams) -> float:
    """Average power gain G_A * (c / (4 pi f_c d))**sigma."""
    if not (d > 0 and sigma > 0):
        raise ValueError("distance and path-loss exponent must be positive")
    return params.G_A * (SPEED_OF_LIGHT / (4.0 * math.pi * params.f_c * d)) ** sigma


def sinr(event: RandomEvent, params: SystemParams) -> float:
    """SINR per Watt of WD transmit power at the MS."""
    return event.h / (event.a * params.P_B * event.g_bar + params.noise_s)


class EventGenerator:
    """Seeded stream of :class:`RandomEvent`.

    The master seed is split into independent sub-streams for the channels, the PU
    activity and the energy arrivals, so switching ``pu_model`` leaves the channel
    and energy draws untouched. Draws are made in blocks for speed; the stream is a
    deterministic function of (seed, params) regardless of the block size.
    """

    block = 4096

    def __init__(self, params: SystemParams, seed: int | None = None):
        self.params = params
        self.seed = params.seed if seed is None else seed
        ss = np.random.SeedSequence(self.seed)
        chan, act, energy = ss.spawn(3)
        self._rng_chan = np.random.default_rng(chan)
        self._rng_act = np.random.default_rng(act)
        self._rng_energy = np.random.default_rng(energy)
        self._mean_gain = (
            path_loss(params.d_h, params.sigma_h, params),
            path_loss(params.d_g, params.sigma_g, params),
            path_loss(params.d_hbar, params.sigma_hbar, params),
        )
        self._a_prev: int | None = None
        self._buf: list[RandomEvent] = []
        self._pos = 0

    def _activity(self, n: int) -> np.ndarray:
        p = self.params
        u = self._rng_act.random(n)
        if p.pu_model == "iid-bernoulli":
            return (u < p.a_bar).astype(int)
        p01, p10 = p.markov_rates
        out = np.empty(n, dtype=int)
        a = self._a_prev
        for i in range(n):
            if a is None:
                a = int(u[i] < p01 / (p01 + p10))
            elif a == 1:
                a = 0 if u[i] < p10 else 1
            else:
                a = 1 if u[i] < p01 else 0
            out[i] = a
        self._a_prev = a
        return out

    def _fill(self) -> None:
        n = self.block
        fade = self._rng_chan.exponential(1.0, size=(n, 3))
        gains = fade * np.asarray(self._mean_gain)
        a = self._activity(n)
        e_h = self._rng_energy.uniform(0.0, self.params.E_max_h, size=n)
        self._buf = [
            RandomEvent(int(a[i]), float(e_h[i]), float(gains[i, 0]), float(gains[i, 1]), float(gains[i, 2]))
            for i in range(n)
        ]
        self._pos = 0

    def __iter__(self) -> Iterator[RandomEvent]:
        return self

    def __next__(self) -> RandomEvent:
        if self._pos >= len(self._buf):
            self._fill()
        ev = self._buf[self._pos]
        self._pos += 1
        return ev

    def take(self, n: int) -> list[RandomEvent]:
        return [next(self) for _ in range(n)]


def sample_event(rng: np.random.Generator, params: SystemParams, a_prev: int | None = None) -> RandomEvent:
    """Draw a single event from ``rng``.

    Convenience for one-off draws and tests; simulations use :class:`EventGenerator`.
    Under the Markov PU model ``a_prev`` is the previous activity state (stationary
    draw when None).
    """
    fade = rng.exponential(1.0, size=3)
    if params.pu_model == "iid-bernoulli" or a_prev is None:
        if params.pu_model == "iid-bernoulli":
            pa = params.a_bar
        else:
            p01, p10 = params.markov_rates
            pa = p01 / (p01 + p10)
        a = int(rng.random() < pa)
    else:
        p01, p10 = params.markov_rates
        a = int(rng.random() < (1.0 - p10 if a_prev else p01))
    e_h = float(rng.uniform(0.0, params.E_max_h))
    return RandomEvent(
        a=a,
        e_h=e_h,
        h=float(fade[0]) * path_loss(params.d_h, params.sigma_h, params),
        g_bar=float(fade[1]) * path_loss(params.d_g, params.sigma_g, params),
        h_bar=float(fade[2]) * path_loss(params.d_hbar, params.sigma_hbar, params),
    )


def write_event_trace(path: str | Path, events: Iterable[RandomEvent]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVENT_FIELDS)
        for t, ev in enumerate(events):
            w.writerow([t, ev.a, f"{ev.e_h:.17g}", f"{ev.h:.17g}", f"{ev.g_bar:.17g}", f"{ev.h_bar:.17g}"])


def read_event_trace(path: str | Path) -> list[RandomEvent]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and set(EVENT_FIELDS) - set(rows[0]):
        raise ValueError(f"event trace must have columns {EVENT_FIELDS}")
    return [
        RandomEvent(int(r["a"]), float(r["e_h"]), float(r["h"]), float(r["g_bar"]), float(r["h_bar"]))
        for r in rows
    ]
