"""Modulo-sum relay channel instances and the relay-link capacity.

The destination sees ``Y = X + Z mod m``. The relay observes ``Y1`` drawn
from ``p(y1 | z)`` and talks to the destination over a separate link that is
described either by its capacity alone or by a DMC ``p(s | x1)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConvergenceError, DomainError, SpecParseError, ValidationError
from .info import Channel, Joint, Pmf, joint_from

BA_MAX_ITER = 100_000


@dataclass(frozen=True)
class ExplicitRate:
    r0: float

    def __post_init__(self):
        r0 = float(self.r0)
        if not np.isfinite(r0) or r0 < 0:
            raise ValidationError(f"relay_link: explicit rate r0={self.r0!r} must be finite and >= 0")
        object.__setattr__(self, "r0", r0)


@dataclass(frozen=True, eq=False)
class Dmc:
    link: Channel


RelayLink = Union[ExplicitRate, Dmc]


@dataclass(frozen=True, eq=False)
class RelayChannelSpec:
    m: int
    noise: Pmf
    relay_obs: Channel
    relay_link: RelayLink

    def __post_init__(self):
        if isinstance(self.m, bool) or not isinstance(self.m, (int, np.integer)) or self.m < 2:
            raise ValidationError(f"m={self.m!r}: modulus must be an integer >= 2")
        if not isinstance(self.noise, Pmf):
            object.__setattr__(self, "noise", Pmf(self.noise))
        if not isinstance(self.relay_obs, Channel):
            object.__setattr__(self, "relay_obs", Channel(self.relay_obs))
        if len(self.noise) != self.m:
            raise ValidationError(f"noise: has {len(self.noise)} entries, expected m={self.m}")
        if self.relay_obs.n_in != self.m:
            raise ValidationError(f"relay_obs: has {self.relay_obs.n_in} rows, expected m={self.m}")
        if not isinstance(self.relay_link, (ExplicitRate, Dmc)):
            raise ValidationError("relay_link: must be ExplicitRate or Dmc")

    @property
    def n_obs(self) -> int:
        """Size of the relay observation alphabet."""
        return self.relay_obs.n_out

    def with_rate(self, r0: float) -> "RelayChannelSpec":
        return RelayChannelSpec(self.m, self.noise, self.relay_obs, ExplicitRate(r0))


def bsc_relay(p: float, delta: float, epsilon: float) -> RelayChannelSpec:
    """Binary instance: ``Z ~ Ber(p)``, ``Y1 = Z + Ber(delta)``, link ``BSC(epsilon)``."""
    for name, v in (("p", p), ("delta", delta), ("epsilon", epsilon)):
        if not (0.0 <= v <= 1.0):
            raise DomainError(f"{name}={v!r} is outside [0, 1]")
    return RelayChannelSpec(2, Pmf.bernoulli(p), Channel.bsc(delta), Dmc(Channel.bsc(epsilon)))


def blahut_arimoto(w: np.ndarray, tol: float = 1e-10, max_iter: int = BA_MAX_ITER):
    """Capacity of the DMC ``w`` in bits, and the capacity-achieving input.

    Stops when the upper bound ``log max_i c_i`` and the lower bound
    ``log sum_i r_i c_i`` are within ``tol`` bits; returns the lower bound.
    """
    w = np.asarray(w, dtype=float)
    r = np.full(w.shape[0], 1.0 / w.shape[0])
    pos = w > 0
    logw = np.where(pos, np.log(np.where(pos, w, 1.0)), 0.0)
    gap = np.inf
    for _ in range(max_iter):
        q = r @ w
        logq = np.log(np.where(q > 0, q, 1.0))
        # per-input divergence D(w_i || q) in nats
        d = np.where(pos, w * (logw - logq), 0.0).sum(axis=1)
        c = np.exp(d - d.max())
        lower = np.log(r @ c) + d.max()
        upper = d.max()
        gap = (upper - lower) / np.log(2)
        if gap < tol:
            return max(lower / np.log(2), 0.0), r
        r = r * c
        r /= r.sum()
    raise ConvergenceError(f"Blahut-Arimoto did not reach gap {tol} in {max_iter} iterations",
                           last_iterate=r, gap=gap)


def relay_link_capacity(spec: RelayChannelSpec, tol: float = 1e-10) -> float:
    if tol <= 0:
        raise DomainError(f"tol={tol!r} must be positive")
    link = spec.relay_link
    if isinstance(link, ExplicitRate):
        return link.r0
    cap, _ = blahut_arimoto(link.link.rows, tol=tol)
    return cap


def noise_observation_joint(spec: RelayChannelSpec) -> Joint:
    """Joint law of ``(Z, Y1)``."""
    return joint_from(spec.noise, spec.relay_obs, labels=("Z", "Y1"))


# --- spec documents -------------------------------------------------------

_KEYS = ("m", "noise", "relay_obs", "relay_link")


def _line_of(text, key):
    idx = text.find(f'"{key}"')
    return None if idx < 0 else text.count("\n", 0, idx) + 1


def _real(x, field, text):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SpecParseError("expected a number", line=_line_of(text, field.split("[")[0]), field=field)
    return float(x)


def _vector(x, field, text):
    if not isinstance(x, list) or not x:
        raise SpecParseError("expected a nonempty array of numbers",
                             line=_line_of(text, field.split("[")[0]), field=field)
    return [_real(v, f"{field}[{i}]", text) for i, v in enumerate(x)]


def _matrix(x, field, text):
    if not isinstance(x, list) or not x:
        raise SpecParseError("expected a nonempty array of rows",
                             line=_line_of(text, field.split("[")[0]), field=field)
    rows = [_vector(r, f"{field}[{i}]", text) for i, r in enumerate(x)]
    if len({len(r) for r in rows}) != 1:
        raise SpecParseError("rows have different lengths", line=_line_of(text, field), field=field)
    return rows


def _check_rows(rows, field):
    try:
        return Channel(rows)
    except ValidationError as exc:
        raise ValidationError(f"{field}: {exc}") from None


def parse_spec(text: str) -> RelayChannelSpec:
    """Parse and validate a JSON channel spec document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(exc.msg, line=exc.lineno, column=exc.colno) from None
    if not isinstance(doc, dict):
        raise SpecParseError("top level must be an object", line=1)
    for key in _KEYS:
        if key not in doc:
            raise SpecParseError("missing required field", field=key)
    extra = sorted(set(doc) - set(_KEYS))
    if extra:
        raise SpecParseError("unknown field", line=_line_of(text, extra[0]), field=extra[0])

    m = doc["m"]
    if isinstance(m, bool) or not isinstance(m, int):
        raise SpecParseError("expected an integer", line=_line_of(text, "m"), field="m")
    noise = _vector(doc["noise"], "noise", text)
    obs = _matrix(doc["relay_obs"], "relay_obs", text)

    link_doc = doc["relay_link"]
    if not isinstance(link_doc, dict) or "kind" not in link_doc:
        raise SpecParseError("expected an object with a 'kind'", line=_line_of(text, "relay_link"),
                             field="relay_link")
    kind = link_doc["kind"]
    if kind == "rate":
        if set(link_doc) != {"kind", "r0"}:
            raise SpecParseError("rate link takes exactly 'kind' and 'r0'",
                                 line=_line_of(text, "relay_link"), field="relay_link")
        link = ExplicitRate(_real(link_doc["r0"], "relay_link.r0", text))
    elif kind == "dmc":
        if set(link_doc) != {"kind", "matrix"}:
            raise SpecParseError("dmc link takes exactly 'kind' and 'matrix'",
                                 line=_line_of(text, "relay_link"), field="relay_link")
        link = Dmc(_check_rows(_matrix(link_doc["matrix"], "relay_link.matrix", text), "relay_link.matrix"))
    else:
        raise SpecParseError(f"unknown link kind {kind!r}", line=_line_of(text, "kind"),
                             field="relay_link.kind")

    try:
        noise_pmf = Pmf(noise)
    except ValidationError as exc:
        raise ValidationError(f"noise: {exc}") from None
    return RelayChannelSpec(m, noise_pmf, _check_rows(obs, "relay_obs"), link)


def load_spec(path) -> RelayChannelSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_vec(v) -> str:
    return "[" + ", ".join(_fmt(x) for x in v) + "]"


def _fmt_mat(w) -> str:
    return "[" + ", ".join(_fmt_vec(r) for r in w) + "]"


def serialize_spec(spec: RelayChannelSpec) -> str:
    """Canonical form: fixed key order, 17 significant digits per real."""
    if isinstance(spec.relay_link, ExplicitRate):
        link = f'{{"kind": "rate", "r0": {_fmt(spec.relay_link.r0)}}}'
    else:
        link = f'{{"kind": "dmc", "matrix": {_fmt_mat(spec.relay_link.link.rows)}}}'
    return (
        "{\n"
        f'  "m": {int(spec.m)},\n'
        f'  "noise": {_fmt_vec(spec.noise.probs)},\n'
        f'  "relay_obs": {_fmt_mat(spec.relay_obs.rows)},\n'
        f'  "relay_link": {link}\n'
        "}\n"
    )
