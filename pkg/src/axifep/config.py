"""Run configuration: flat ``key = value`` files with ``[section]`` headers.

No nesting, no quoting, no type sigils; every value is parsed by context.
Unknown keys and malformed lines raise ConfigError with the line number.

The consolidation pressure is configured by magnitude: ``p_c0`` must be a
positive number and is stored negative (compressive intercept), matching
the tension-positive sign convention used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import material_mcc
from .fem_axisym import ConfigError


@dataclass(frozen=True)
class RunConfig:
    R_int: float
    R_ext: float
    H: float
    n_R: int
    n_Z: int
    T: int
    formulation: str
    material: material_mcc.MatParams
    u_bar: float
    tol: float
    k_max: int
    max_bisect: int
    out_dir: str
    track: list = field(default_factory=list)   # (label, R, Z) tuples


_SECTIONS = ("geometry", "mesh", "material", "run", "output", "track")

_FLOAT_KEYS = {
    ("geometry", "R_int"), ("geometry", "R_ext"), ("geometry", "H"),
    ("material", "E"), ("material", "nu"), ("material", "H"),
    ("material", "kappa"), ("material", "alpha"), ("material", "m"),
    ("material", "p_c0"),
    ("run", "u_bar"), ("run", "tol"),
}
_INT_KEYS = {
    ("mesh", "n_R"), ("mesh", "n_Z"),
    ("run", "T"), ("run", "k_max"), ("run", "max_bisect"),
}
_STR_KEYS = {("run", "formulation"), ("output", "dir")}


def _parse_lines(text):
    """Yield (lineno, section, key, value-string) for every assignment."""
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: assignment before any [section]")
        key, _, value = line.partition("=")
        yield lineno, section, key.strip(), value.strip()


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text)


def parse_config(text):
    values = {}
    track = []
    for lineno, section, key, value in _parse_lines(text):
        if section == "track":
            parts = value.split()
            if len(parts) != 2:
                raise ConfigError(
                    f"line {lineno}: tracked point {key!r} needs 'R Z', "
                    f"got {value!r}")
            try:
                track.append((key, float(parts[0]), float(parts[1])))
            except ValueError:
                raise ConfigError(
                    f"line {lineno}: non-numeric coordinate in {value!r}") from None
            continue
        spot = (section, key)
        if spot in _FLOAT_KEYS:
            try:
                values[spot] = float(value)
            except ValueError:
                raise ConfigError(
                    f"line {lineno}: expected a number for {key}, got {value!r}"
                ) from None
        elif spot in _INT_KEYS:
            try:
                values[spot] = int(value)
            except ValueError:
                raise ConfigError(
                    f"line {lineno}: expected an integer for {key}, got {value!r}"
                ) from None
        elif spot in _STR_KEYS:
            values[spot] = value
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")

    def need(section, key):
        if (section, key) not in values:
            raise ConfigError(f"missing required key {key!r} in [{section}]")
        return values[(section, key)]

    p_c0_mag = need("material", "p_c0")
    if p_c0_mag <= 0.0:
        raise ConfigError(
            f"p_c0 is configured as a magnitude and must be positive, "
            f"got {p_c0_mag} (it is stored as the negative compressive "
            f"intercept internally)")
    try:
        mat = material_mcc.make_params(
            E=need("material", "E"), nu=need("material", "nu"),
            H=need("material", "H"),
            kappa=values.get(("material", "kappa"), 0.0),
            alpha_h=values.get(("material", "alpha"), 1.0),
            m=need("material", "m"), p_c0=-p_c0_mag)
    except material_mcc.ConstitutiveError as exc:
        raise ConfigError(str(exc)) from None

    T = values.get(("run", "T"), 1)
    tol = values.get(("run", "tol"), 1e-8)
    formulation = values.get(("run", "formulation"), "UL").upper()
    if formulation not in ("UL", "TL"):
        raise ConfigError(f"formulation must be UL or TL, got {formulation!r}")
    if T < 1:
        raise ConfigError(f"T must be >= 1, got {T}")
    if not 0.0 < tol <= 1e-2:
        raise ConfigError(f"tol must lie in (0, 1e-2], got {tol}")

    cfg = RunConfig(
        R_int=need("geometry", "R_int"), R_ext=need("geometry", "R_ext"),
        H=need("geometry", "H"),
        n_R=need("mesh", "n_R"), n_Z=need("mesh", "n_Z"),
        T=T, formulation=formulation, material=mat,
        u_bar=need("run", "u_bar"), tol=tol,
        k_max=values.get(("run", "k_max"), 25),
        max_bisect=values.get(("run", "max_bisect"), 4),
        out_dir=values.get(("output", "dir"), "out"),
        track=track)
    if not (cfg.R_int > 0 and cfg.R_ext > cfg.R_int and cfg.H > 0):
        raise ConfigError(
            f"need 0 < R_int < R_ext and H > 0, got R_int={cfg.R_int}, "
            f"R_ext={cfg.R_ext}, H={cfg.H}")
    if cfg.n_R < 1 or cfg.n_Z < 1:
        raise ConfigError(f"mesh needs n_R, n_Z >= 1, got {cfg.n_R}, {cfg.n_Z}")
    return cfg
