"""System parameters: defaults, validation and the key=value config format.

All values are held in SI units (W, J, Hz, s, bits). Powers and noise
densities may be written in dBm or dBm/Hz in a config file, e.g.::

    p_max = 20 dBm
    delta_s2 = -174 dBm/Hz
    c_th = 0.2

Battery quantities (``B_min``, ``Omega``) are given in Joules. The controller
works with the battery in scaled units (Joules times ``lambda_e``); see
:meth:`SystemParams.battery_scale`.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

__all__ = [
    "ConfigError",
    "SystemParams",
    "dbm_to_watts",
    "gamma_th_from_multiplier",
    "load_params",
    "parse_config_text",
    "serialize_params",
]

PU_MODELS = ("iid-bernoulli", "two-state-markov")


class ConfigError(ValueError):
    """Raised for malformed config documents or parameter sets that violate an invariant."""


def dbm_to_watts(x: float) -> float:
    return 10.0 ** ((x - 30.0) / 10.0)


_NOISE_PSD = dbm_to_watts(-174.0)  # W/Hz


@dataclass(frozen=True)
class SystemParams:
    # radio
    T: float = 1.0
    W: float = 1e6
    P_B: float = dbm_to_watts(33.0)
    p_max: float = dbm_to_watts(20.0)
    delta_s2: float = _NOISE_PSD
    delta_p2: float = _NOISE_PSD
    Gamma_th: float = 125.0 * 1e6 * _NOISE_PSD
    a_bar: float = 0.6
    pu_model: str = "iid-bernoulli"
    p01: float | None = None
    p10: float | None = None
    # sensing / computing
    e_col_unit: float = 1e-8
    r_max: float = 1e7
    kappa_c: float = 1e-26
    kappa_e: float = 1e-26
    C: float = 100.0
    f_max_u: float = 4e8
    f_max_s: float = 4e9
    # energy
    B_min: float = 1e-3
    E_max_h: float = 0.6
    c_th: float = 1.6
    Omega: float | None = None
    # control
    V: float = 256e7
    lambda_e: float = 1.677e8
    lambda_c: float = 1e7
    # geometry
    d_g: float = 500.0
    d_h: float = 50.0
    d_hbar: float = 50.0
    sigma_g: float = 2.7
    sigma_h: float = 2.7
    sigma_hbar: float = 2.7
    G_A: float = 4.11
    f_c: float = 2.4e9
    # run
    N: int = 60000
    seed: int = 0
    window: int = 400
    # bookkeeping: True when Omega was derived from the capacity threshold
    omega_auto: bool = field(default=True, repr=False)

    def __post_init__(self) -> None:
        _validate(self)

    # -- scaled battery quantities -------------------------------------------------
    @property
    def battery_scale(self) -> float:
        """Factor converting Joules to the scaled battery unit used by the controller."""
        return self.lambda_e

    @property
    def omega_s(self) -> float:
        if self.Omega is None:
            raise ConfigError("Omega is unresolved; call resolve_omega() first")
        return self.lambda_e * self.Omega

    @property
    def b_min_s(self) -> float:
        return self.lambda_e * self.B_min

    @property
    def noise_s(self) -> float:
        return self.W * self.delta_s2

    @property
    def noise_p(self) -> float:
        return self.W * self.delta_p2

    @property
    def markov_rates(self) -> tuple[float, float]:
        """(p01, p10) for the two-state PU chain; defaults keep a stationary rate of a_bar."""
        p01 = self.p01 if self.p01 is not None else 0.2 * self.a_bar
        p10 = self.p10 if self.p10 is not None else 0.2 * (1.0 - self.a_bar)
        return p01, p10

    def replace(self, **changes: Any) -> "SystemParams":
        """Copy with changes; an auto-derived Omega is re-derived for the new values."""
        if "Omega" in changes:
            changes.setdefault("omega_auto", changes["Omega"] is None)
        elif self.omega_auto:
            changes["Omega"] = None
        return resolve_omega(dataclasses.replace(self, **changes))

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "omega_auto"}


def resolve_omega(params: SystemParams) -> SystemParams:
    """Fill in Omega from the battery-capacity threshold when it is not set."""
    if params.Omega is not None:
        return params
    from .capacity import omega_threshold

    report = omega_threshold(params)
    return dataclasses.replace(params, Omega=report.omega_threshold, omega_auto=True)


def _validate(p: SystemParams) -> None:
    positive = (
        "T W P_B p_max delta_s2 delta_p2 Gamma_th e_col_unit r_max kappa_c kappa_e C "
        "f_max_u f_max_s B_min c_th V lambda_e lambda_c d_g d_h d_hbar sigma_g sigma_h "
        "sigma_hbar G_A f_c"
    ).split()
    for name in positive:
        v = getattr(p, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise ConfigError(f"{name} must be a positive finite number, got {v!r}")
    if not (0.0 <= p.E_max_h and math.isfinite(p.E_max_h)):
        raise ConfigError(f"E_max_h must be >= 0, got {p.E_max_h!r}")
    if not 0.0 <= p.a_bar <= 1.0:
        raise ConfigError(f"a_bar must lie in [0, 1], got {p.a_bar!r}")
    if p.Gamma_th < p.W * p.delta_p2:
        raise ConfigError(
            f"Gamma_th={p.Gamma_th:.6g} W is below the PR noise floor W*delta_p2={p.W * p.delta_p2:.6g} W"
        )
    if p.Omega is not None and not p.Omega > p.B_min:
        raise ConfigError(f"Omega must exceed B_min, got Omega={p.Omega!r}")
    if p.pu_model not in PU_MODELS:
        raise ConfigError(f"pu_model must be one of {PU_MODELS}, got {p.pu_model!r}")
    for name in ("p01", "p10"):
        v = getattr(p, name)
        if v is not None and not 0.0 < v <= 1.0:
            raise ConfigError(f"{name} must lie in (0, 1], got {v!r}")
    if int(p.N) != p.N or p.N < 1:
        raise ConfigError(f"N must be a positive integer, got {p.N!r}")
    if int(p.window) != p.window or p.window < 1:
        raise ConfigError(f"window must be a positive integer, got {p.window!r}")


def gamma_th_from_multiplier(m: float, params: SystemParams) -> float:
    """Interference tolerance expressed as a multiple of the PR noise power."""
    if not m > 0:
        raise ConfigError(f"multiplier must be positive, got {m!r}")
    return m * params.W * params.delta_p2


# ----------------------------------------------------------------------------------
# key=value documents

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(SystemParams)}
_INT_KEYS = {"N", "seed", "window"}
_STR_KEYS = {"pu_model"}
_OPTIONAL_KEYS = {"Omega", "p01", "p10"}
_DBM_KEYS = {"P_B", "p_max", "Gamma_th"}
_PSD_KEYS = {"delta_s2", "delta_p2"}
# load-time only: Gamma_th as a multiple of W*delta_p2
_EXTRA_KEYS = {"Gamma_th_mult"}

_VALUE_RE = re.compile(r"^(?P<num>[-+0-9.eEinfa]+)\s*(?P<unit>dBm(/Hz)?)?$")


def parse_config_text(text: str) -> dict[str, str]:
    """Split a key=value document into a raw mapping. Blank lines and ``#`` comments are ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _convert(key: str, value: Any) -> Any:
    if not isinstance(value, str):
        return value
    if key in _STR_KEYS:
        return value
    if key in _OPTIONAL_KEYS and value.lower() in ("none", "auto", ""):
        return None
    m = _VALUE_RE.match(value.strip())
    if m is None:
        raise ConfigError(f"{key}: cannot parse value {value!r}")
    try:
        num = float(m.group("num"))
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse value {value!r}") from exc
    unit = m.group("unit")
    if unit == "dBm":
        if key not in _DBM_KEYS:
            raise ConfigError(f"{key}: dBm not accepted for this key")
        num = dbm_to_watts(num)
    elif unit == "dBm/Hz":
        if key not in _PSD_KEYS:
            raise ConfigError(f"{key}: dBm/Hz not accepted for this key")
        num = dbm_to_watts(num)
    if key in _INT_KEYS:
        if num != int(num):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(num)
    return num


def load_params(
    source: str | Path | Mapping[str, Any] | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> SystemParams:
    """Build validated :class:`SystemParams` from a config file, text or mapping.

    ``overrides`` (e.g. from ``--set key=value``) take precedence over the source.
    Unknown keys raise :class:`ConfigError`. When ``Omega`` is absent it is derived
    from the capacity threshold.
    """
    if source is None:
        raw: dict[str, Any] = {}
    elif isinstance(source, Mapping):
        raw = dict(source)
    elif isinstance(source, str) and ("=" in source or "\n" in source or not source.strip()):
        raw = parse_config_text(source)
    elif isinstance(source, Path) or Path(source).is_file():
        try:
            raw = parse_config_text(Path(source).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file {str(source)!r}: {exc}") from exc
    else:
        raise ConfigError(f"config file not found: {source!r}")
    if overrides:
        raw.update(overrides)

    unknown = set(raw) - set(_FIELD_TYPES) - _EXTRA_KEYS
    unknown.discard("omega_auto")
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    values = {k: _convert(k, v) for k, v in raw.items() if k != "omega_auto"}

    mult = values.pop("Gamma_th_mult", None)
    if "Gamma_th" not in values:
        W = values.get("W", SystemParams.W)
        dp = values.get("delta_p2", SystemParams.delta_p2)
        values["Gamma_th"] = (125.0 if mult is None else mult) * W * dp
    elif mult is not None:
        raise ConfigError("give either Gamma_th or Gamma_th_mult, not both")

    values["omega_auto"] = values.get("Omega") is None
    try:
        params = SystemParams(**values)
    except TypeError as exc:  # wrong types that slip past _convert
        raise ConfigError(str(exc)) from exc
    return resolve_omega(params)


def serialize_params(params: SystemParams) -> str:
    """Render params as a key=value document that :func:`load_params` parses back exactly."""
    lines = []
    for key, value in params.to_dict().items():
        if key == "Omega" and params.omega_auto:
            value = None
        if value is None:
            lines.append(f"{key} = none")
        elif isinstance(value, float):
            lines.append(f"{key} = {value!r}")
        else:
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
