"""Run configuration files.

Grammar (one statement per line)::

    # comment            -- also after a value: key = 1.0  # note
    section.key = value

Blank lines are ignored. Keys are ``section.name`` with lowercase letters,
digits and underscores; each key may appear once. Values are plain text;
lists are comma separated. Numbers use Python float syntax and complex
numbers Python complex syntax (``3+1j``). There are no includes,
variables or expressions.

Known keys, their types and defaults are listed in ``SCHEMA``.
"""
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .models import KINDS, ModelSpec
from .propagator import PropagationConfig


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (CLI exit code 2)."""


_KEY = re.compile(r"^[a-z][a-z0-9_]*\.[a-z][a-z0-9_]*$")


def _float(text):
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"not a finite number: {text!r}")
    return v


def _int(text):
    v = _float(text)
    if v != int(v):
        raise ConfigError(f"not an integer: {text!r}")
    return int(v)


def _complex(text):
    try:
        v = complex(text.replace(" ", ""))
    except ValueError:
        raise ConfigError(f"not a complex number: {text!r}") from None
    if not (math.isfinite(v.real) and math.isfinite(v.imag)):
        raise ConfigError(f"not a finite number: {text!r}")
    return v


def _str(text):
    return text


def _list(item):
    def parse(text):
        parts = [p.strip() for p in text.split(",")]
        if any(not p for p in parts):
            raise ConfigError(f"empty list item in {text!r}")
        return tuple(item(p) for p in parts)

    parse.__name__ = f"list of {item.__name__.lstrip('_')}"
    return parse


# key -> (parser, default); a default of None means "required where used"
SCHEMA = {
    "model.kind": (_list(_str), ("rabi",)),
    "model.omega": (_float, None),
    "model.g0": (_float, None),
    "model.lambda1": (_float, 0.0),
    "model.lambda2": (_float, 0.0),
    "initial.field": (_str, "fock"),
    "initial.n": (_int, 0),
    "initial.nu": (_complex, 0j),
    "initial.coefficients": (_list(_complex), None),
    "initial.atom": (_list(_complex), (1.0, 0.0)),
    "grid.n_points": (_int, 512),
    "grid.x_max": (_float, 16.0),
    "propagation.dt": (_float, 5e-4),
    "propagation.t_final": (_float, 20.0),
    "propagation.snapshot_stride": (_int, 20),
    "propagation.boundary_tolerance": (_float, 1e-8),
    "outputs.density_every": (_int, 0),
    "outputs.centroid_basis": (_str, "bare"),
    "convergence.tolerance": (_float, 1e-3),
    "compare.t_max": (_float, None),
    "revival.x_tol": (_float, None),
    "revival.p_tol": (_float, None),
    "revival.envelope_window": (_float, 5.0),
    "revival.collapse_level": (_float, 0.1),
    "lz.omega": (_list(_float), None),
    "lz.g0": (_float, 1.0),
    "lz.n_bar": (_list(_float), None),
    "lz.dt": (_float, 1e-3),
    "dicke.n_atoms": (_int, 1),
    "dicke.omega": (_float, None),
    "dicke.g_max": (_float, None),
    "dicke.n_g": (_int, 201),
    "dicke.convention": (_str, "rabi"),
    "dicke.x_max": (_float, 6.0),
    "dicke.n_x": (_int, 241),
}

FIELDS = ("fock", "coherent", "fock_superposition")


def parse_text(text):
    """Parse config text into a dict of typed values (no defaults, no
    cross-key validation)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key, _, value = (s.strip() for s in line.partition("="))
        if not _KEY.match(key):
            raise ConfigError(f"line {lineno}: malformed key {key!r}")
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: missing value for {key!r}")
        try:
            values[key] = SCHEMA[key][0](value)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from None
    return values


@dataclass(frozen=True)
class InitialState:
    field: str
    n: int = 0
    nu: complex = 0j
    coefficients: tuple = ()
    atom: tuple = (1.0, 0.0)

    def atomic_vector(self):
        a = np.asarray(self.atom, dtype=complex)
        return a / np.linalg.norm(a)


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration. ``values`` keeps every key after
    defaults, in schema order, for manifests."""

    models: tuple
    initial: InitialState
    n_points: int
    x_max: float
    propagation: PropagationConfig
    density_every: int
    centroid_basis: str
    convergence_tolerance: float
    values: dict = field(default_factory=dict, compare=False)

    def get(self, key):
        return self.values.get(key)

    def require(self, key):
        v = self.values.get(key)
        if v is None:
            raise ConfigError(f"missing required key {key!r}")
        return v

    def with_dt(self, dt):
        """Copy with a different time step and the same snapshot times."""
        old = self.propagation
        ratio = old.dt / dt
        stride = old.snapshot_stride * ratio
        if abs(stride - round(stride)) > 1e-9 or round(stride) < 1:
            raise ConfigError(
                f"dt {dt:g} does not divide the snapshot interval {old.dt * old.snapshot_stride:g}"
            )
        values = dict(self.values)
        values["propagation.dt"] = dt
        values["propagation.snapshot_stride"] = int(round(stride))
        return build(values)


def _model_specs(v):
    kinds = v["model.kind"]
    for k in kinds:
        if k not in KINDS:
            raise ConfigError(f"model.kind: unknown model {k!r}; choose from {list(KINDS)}")
    if len(set(kinds)) != len(kinds):
        raise ConfigError("model.kind lists a model twice")
    specs = []
    for k in kinds:
        if k == "dicke":
            continue  # the Dicke verb takes its parameters from dicke.*
        for key in ("model.omega", "model.g0"):
            if v[key] is None:
                raise ConfigError(f"missing required key {key!r}")
        try:
            specs.append(
                ModelSpec(
                    k,
                    omega=v["model.omega"],
                    g0=v["model.g0"],
                    lambda1=v["model.lambda1"],
                    lambda2=v["model.lambda2"],
                )
            )
        except ValueError as exc:
            raise ConfigError(f"model: {exc}") from None
    return tuple(specs)


def _initial(v, models):
    fld = v["initial.field"]
    if fld not in FIELDS:
        raise ConfigError(f"initial.field must be one of {list(FIELDS)}, not {fld!r}")
    if fld == "fock" and v["initial.n"] < 0:
        raise ConfigError("initial.n must be >= 0")
    coeffs = v["initial.coefficients"]
    if fld == "fock_superposition":
        if coeffs is None:
            raise ConfigError("initial.field = fock_superposition needs initial.coefficients")
        if not any(abs(c) > 0 for c in coeffs):
            raise ConfigError("initial.coefficients are all zero")
    atom = v["initial.atom"]
    if not any(abs(a) > 0 for a in atom):
        raise ConfigError("initial.atom is the zero vector")
    for spec in models:
        if len(atom) != spec.n_channels:
            raise ConfigError(
                f"initial.atom has {len(atom)} components; model {spec.kind!r}"
                f" has {spec.n_channels} channels"
            )
    return InitialState(fld, v["initial.n"], v["initial.nu"], tuple(coeffs or ()), tuple(atom))


def build(values):
    """Apply defaults and validate; returns a RunConfig."""
    v = {key: default for key, (_, default) in SCHEMA.items()}
    v.update(values)
    models = _model_specs(v)
    if v["grid.n_points"] < 16 or v["grid.n_points"] % 2:
        raise ConfigError("grid.n_points must be an even integer >= 16")
    if v["grid.x_max"] <= 0:
        raise ConfigError("grid.x_max must be positive")
    try:
        prop = PropagationConfig(
            dt=v["propagation.dt"],
            t_final=v["propagation.t_final"],
            snapshot_stride=v["propagation.snapshot_stride"],
            boundary_tolerance=v["propagation.boundary_tolerance"],
        )
    except ValueError as exc:
        raise ConfigError(f"propagation: {exc}") from None
    if abs(prop.n_steps * prop.dt - prop.t_final) > 1e-9 * prop.t_final:
        raise ConfigError("propagation.t_final must be a whole number of time steps")
    if v["outputs.density_every"] < 0:
        raise ConfigError("outputs.density_every must be >= 0")
    if v["outputs.centroid_basis"] not in ("bare", "rotated"):
        raise ConfigError("outputs.centroid_basis must be 'bare' or 'rotated'")
    if v["outputs.centroid_basis"] == "rotated" and any(s.n_channels != 2 for s in models):
        raise ConfigError("outputs.centroid_basis = rotated needs two-channel models")
    if v["convergence.tolerance"] <= 0:
        raise ConfigError("convergence.tolerance must be positive")
    if v["dicke.convention"] not in ("rabi", "plain"):
        raise ConfigError("dicke.convention must be 'rabi' or 'plain'")
    return RunConfig(
        models=models,
        initial=_initial(v, models),
        n_points=v["grid.n_points"],
        x_max=v["grid.x_max"],
        propagation=prop,
        density_every=v["outputs.density_every"],
        centroid_basis=v["outputs.centroid_basis"],
        convergence_tolerance=v["convergence.tolerance"],
        values=v,
    )


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return build(parse_text(text))


def loads(text):
    return build(parse_text(text))


def dump_values(values):
    """Canonical text form of a value dict (used in manifests)."""

    def fmt(x):
        if isinstance(x, tuple):
            return ", ".join(fmt(i) for i in x)
        if isinstance(x, bool):
            return "true" if x else "false"
        if isinstance(x, complex):
            return repr(x) if x.imag else repr(x.real)
        if isinstance(x, float):
            return repr(x)
        return str(x)

    return {k: fmt(x) for k, x in values.items() if x is not None}
