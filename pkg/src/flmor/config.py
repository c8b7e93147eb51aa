"""Plain-text run configuration.

One ``section.key = value`` assignment per line, ``#`` starts a comment::

    model.manifest = data/iss/manifest.txt
    reduce.r = 30
    reduce.band = 0.5,8
    output.dir = runs/iss

Every field has a default, so a run is reproducible from the written
config plus its input files.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from flmor.systems import (
    ELIMINATION_CAP,
    FrequencyBand,
    generate_random_index1,
    generate_random_stable,
    generate_structural,
    generate_triple_chain,
    load_mat,
    load_system,
)


class ConfigError(ValueError):
    pass


@dataclass
class ModelSection:
    manifest: str = ""
    mat: str = ""
    kind: str = "generalized"
    # "<name>:key=value,key=value", see GENERATORS
    generator: str = ""


@dataclass
class ReduceSection:
    r: int = 10
    band: str = "unbounded"
    tol: float = 1e-6
    max_iter: int = 50
    restarts: int = 3
    seed: int = 0
    init: str = "auto"
    safeguard: str = "reflect"
    patience: int = 15
    compare_unlimited: bool = True


@dataclass
class EvaluateSection:
    method: str = "auto"
    n_inside: int = 200
    n_outside: int = 200
    workers: int = 1


@dataclass
class CapsSection:
    dense: int = 2000
    oracle: int = 200
    elimination: int = ELIMINATION_CAP
    verify: int = 500


@dataclass
class OutputSection:
    dir: str = "out"


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    reduce: ReduceSection = field(default_factory=ReduceSection)
    evaluate: EvaluateSection = field(default_factory=EvaluateSection)
    caps: CapsSection = field(default_factory=CapsSection)
    output: OutputSection = field(default_factory=OutputSection)

    def sections(self):
        return [(f.name, getattr(self, f.name)) for f in dataclasses.fields(self)]

    def set(self, dotted, value, where="<override>"):
        """Assign ``section.key`` from a string (or an already typed value)."""
        if "." not in dotted:
            raise ConfigError(f"{where}: key {dotted!r} needs a 'section.' prefix")
        sec_name, key = dotted.split(".", 1)
        sec = getattr(self, sec_name, None)
        if sec is None or not dataclasses.is_dataclass(sec):
            raise ConfigError(f"{where}: unknown section {sec_name!r}")
        types = {f.name: f.type for f in dataclasses.fields(sec)}
        if key not in types:
            raise ConfigError(f"{where}: unknown key {dotted!r}")
        setattr(sec, key, _convert(value, types[key], f"{where}: {dotted}"))

    def to_text(self):
        lines = []
        for name, sec in self.sections():
            for f in dataclasses.fields(sec):
                v = getattr(sec, f.name)
                lines.append(f"{name}.{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(lines) + "\n"

    @property
    def band(self):
        return FrequencyBand.parse(self.reduce.band)


def _convert(value, typ, where):
    if not isinstance(value, str):
        return value
    typ = typ if isinstance(typ, str) else typ.__name__
    try:
        if typ == "int":
            return int(value)
        if typ == "float":
            return float(value)
        if typ == "bool":
            low = value.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
    except ValueError:
        raise ConfigError(f"{where}: cannot read {value!r} as {typ}") from None
    return value.strip()


def parse_config(text, source="<config>"):
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg.set(key, value, f"{source}:{lineno}")
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


# ---------------------------------------------------------------- models


def _triple_chain(n_masses=10):
    return generate_triple_chain(int(n_masses))


GENERATORS = {
    "random": (generate_random_stable, {"n": int, "p": int, "m": int, "density": float, "seed": int, "margin": float}),
    "index1": (generate_random_index1, {
        "n1": int, "n2": int, "p": int, "m": int, "nnz_per_row": int, "seed": int,
        "margin": float, "coupling": float, "decades": float, "bandwidth": int,
    }),
    "triple-chain": (_triple_chain, {"n_masses": int}),
    "structural": (generate_structural, {
        "n_modes": int, "p": int, "m": int, "damping": float, "seed": int, "rolloff": float,
    }),
}


def parse_generator(text):
    """``"name:key=value,..."`` -> ``(function, kwargs)``."""
    name, _, rest = text.partition(":")
    name = name.strip()
    if name not in GENERATORS:
        raise ConfigError(f"unknown generator {name!r}; choose from {', '.join(sorted(GENERATORS))}")
    fn, types = GENERATORS[name]
    kwargs = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        key = key.strip()
        if not eq or key not in types:
            raise ConfigError(f"generator {name!r}: bad argument {item!r} (known: {', '.join(types)})")
        try:
            kwargs[key] = types[key](val)
        except ValueError:
            raise ConfigError(f"generator {name!r}: cannot read {key}={val!r}") from None
    return fn, kwargs


def build_model(section: ModelSection, cap=500):
    """Load or generate the full model described by ``section``."""
    given = [bool(section.manifest), bool(section.mat), bool(section.generator)]
    if sum(given) != 1:
        raise ConfigError("specify exactly one of model.manifest, model.mat, model.generator")
    if section.generator:
        fn, kwargs = parse_generator(section.generator)
        return fn(**kwargs)
    if section.mat:
        return load_mat(section.mat, cap=cap)
    return load_system(section.manifest, kind=section.kind, cap=cap)
