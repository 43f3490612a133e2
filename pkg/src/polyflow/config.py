"""Run configuration: INI files whose sections mirror the CLI subcommands."""

import configparser
from dataclasses import dataclass, fields


@dataclass
class RunConfig:
    case: str = "vortex"
    order: int = None  # polynomial degree N; None takes the case default
    mesh: str = None  # file path, gen:<nx> or None for the case default mesh
    cfl: float = None
    tf: float = None
    integrator: str = None
    basis: str = "vem"
    ortho: bool = None
    limiter: str = None
    out: str = "out"
    seed: int = 0
    dump_basis: int = None
    dump_operators: int = None

    def validate(self):
        if self.order is not None and not 1 <= self.order <= 4:
            raise ValueError(f"order must lie in [1, 4], got {self.order}")
        if self.cfl is not None and not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.basis not in ("vem", "taylor"):
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.limiter not in (None, "off", "detect", "on"):
            raise ValueError(f"unknown limiter mode {self.limiter!r}")
        if self.integrator is not None and not (
                self.integrator == "ader" or self.integrator.startswith("rk:")):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        return self


_BOOL = {"1": True, "yes": True, "true": True, "on": True,
         "0": False, "no": False, "false": False, "off": False}


def _convert(value, typ):
    if value is None:
        return None
    if typ is bool:
        try:
            return _BOOL[str(value).strip().lower()]
        except KeyError:
            raise ValueError(f"not a boolean: {value!r}") from None
    return typ(value)


_TYPES = {"order": int, "cfl": float, "tf": float, "ortho": bool, "seed": int,
          "dump_basis": int, "dump_operators": int}


def read_section(path, section):
    """Key/value pairs of one section of an INI file ({} if absent)."""
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    if not cp.has_section(section):
        return {}
    return {k.replace("-", "_"): v for k, v in cp.items(section)}


def merge(defaults, file_values, flag_values):
    """Flags override the file, the file overrides defaults."""
    out = dict(defaults)
    for src in (file_values, flag_values):
        for k, v in src.items():
            if v is not None:
                out[k] = _convert(v, _TYPES.get(k, type(defaults.get(k)) if
                                                defaults.get(k) is not None else str))
    return out


def run_config(flags, path=None):
    names = {f.name for f in fields(RunConfig)}
    file_values = read_section(path, "run") if path else {}
    unknown = set(file_values) - names
    if unknown:
        raise ValueError(f"unknown keys in [run]: {', '.join(sorted(unknown))}")
    defaults = {f.name: f.default for f in fields(RunConfig)}
    vals = merge(defaults, file_values, {k: v for k, v in flags.items() if k in names})
    return RunConfig(**vals).validate()
