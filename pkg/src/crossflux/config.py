"""
Experiment configuration.

Plain-text INI sections ``[model]``, ``[grid]``, ``[continuation]``,
``[sweep]``, ``[evolve]``, ``[output]`` and ``[verify]`` with ``key = value``
lines. Every section has defaults reproducing the reference numerical
setting; unknown sections or keys and malformed values are reported with
the line they occur on.
"""

import configparser
import dataclasses
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Type, Union

from .continuation import StepControls, Termination
from .errors import ConfigError, CrossfluxError
from .evolve import EvolutionControls
from .mesh import grid_for
from .model import ModelParams
from .types import Gamma, Grid

logger = logging.getLogger(__name__)

MEASURES = ("sup_v", "sup_u", "l2_v", "l2_u", "h1_v", "h1_u")


def _bool(text: str) -> bool:
    token = text.strip().lower()
    if token in ("1", "true", "yes", "on"):
        return True
    if token in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int_list(text: str) -> Tuple[int, ...]:
    return tuple(int(item) for item in text.split(",") if item.strip())


def _float_list(text: str) -> Tuple[float, ...]:
    return tuple(float(item) for item in text.split(",") if item.strip())


def _optional_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("", "none") else float(text)


def _gamma(text: str) -> Optional[str]:
    if text.strip().lower() in ("", "none"):
        return None
    return str(Gamma.parse(text))


def _parsed(default: Any, parse: Callable[[str], Any]) -> Any:
    return field(default=default, metadata={"parse": parse})


@dataclass(frozen=True)
class ModelSection:
    d1: float = 0.004
    d2: float = 0.02
    a1: float = 1.0
    a2: float = 1.0
    b1: float = 4.0
    b2: float = 5.0
    c1: float = 2.0
    c2: float = 3.0
    alpha: float = 2.0
    beta: float = 1.0
    domain_length: float = 1.0
    x_left: Optional[float] = _parsed(None, _optional_float)
    # flux ratio of the limit problem; alpha / beta when unset
    gamma: Optional[str] = _parsed(None, _gamma)


@dataclass(frozen=True)
class GridSection:
    n: int = 201


@dataclass(frozen=True)
class ContinuationSection:
    ds: float = 0.02
    ds_min: float = 1e-5
    ds_max: float = 0.1
    growth: float = 1.3
    tol: float = 1e-10
    max_points: int = 400
    max_folds: int = 4
    d2_floor: float = 0.002
    j_list: Tuple[int, ...] = _parsed((1, 2, 3), _int_list)
    j_max: int = 20
    amplitude: float = 0.05
    delta: float = 0.02
    stability: bool = _parsed(True, _bool)


@dataclass(frozen=True)
class SweepSection:
    ray: Tuple[float, ...] = _parsed((2.0, 1.0), _float_list)
    scales: Tuple[float, ...] = _parsed((1.0, 2.5, 5.0, 10.0, 25.0), _float_list)
    j_list: Tuple[int, ...] = _parsed((1,), _int_list)


@dataclass(frozen=True)
class EvolveSection:
    d2: float = 0.02
    dt: float = 0.05
    dt_max: float = 0.2
    t_max: float = 5000.0
    steady_tol: float = 1e-9
    perturbation: float = 0.01
    seed: int = 0
    snapshot_every: int = 100


@dataclass(frozen=True)
class OutputSection:
    directory: str = "crossflux-out"
    snapshot_stride: int = 10
    measure: str = "sup_v"


@dataclass(frozen=True)
class VerifySection:
    jacobian_tol: float = 1e-6
    random_states: int = 100
    n: int = 21
    seed: int = 0
    sign_samples: int = 20


SECTIONS: Dict[str, Type] = {
    "model": ModelSection,
    "grid": GridSection,
    "continuation": ContinuationSection,
    "sweep": SweepSection,
    "evolve": EvolveSection,
    "output": OutputSection,
    "verify": VerifySection,
}

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s\[][^=:]*?)\s*[=:]")


def _locate(text: str) -> Tuple[Dict[str, int], Dict[Tuple[str, str], int]]:
    """Line numbers of section headers and of keys within them."""
    sections: Dict[str, int] = {}
    keys: Dict[Tuple[str, str], int] = {}
    current = None
    for number, line in enumerate(text.splitlines(), start=1):
        header = _SECTION_RE.match(line)
        if header:
            current = header.group(1).strip()
            sections.setdefault(current, number)
            continue
        key = _KEY_RE.match(line)
        if key and current is not None:
            keys.setdefault((current, key.group(1).strip()), number)
    return sections, keys


def _converter(f: dataclasses.Field) -> Callable[[str], Any]:
    if "parse" in f.metadata:
        return f.metadata["parse"]
    return {float: float, int: int, str: lambda text: text.strip()}[f.type]


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(item) for item in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment configuration."""
    model: ModelSection = field(default_factory=ModelSection)
    grid: GridSection = field(default_factory=GridSection)
    continuation: ContinuationSection = field(default_factory=ContinuationSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    evolve: EvolveSection = field(default_factory=EvolveSection)
    output: OutputSection = field(default_factory=OutputSection)
    verify: VerifySection = field(default_factory=VerifySection)
    path: Optional[str] = None

    def params(self) -> ModelParams:
        m = self.model
        return ModelParams(d1=m.d1, d2=m.d2, a1=m.a1, a2=m.a2, b1=m.b1, b2=m.b2, c1=m.c1, c2=m.c2,
                           alpha=m.alpha, beta=m.beta, domain_length=m.domain_length, x_left=m.x_left)

    def gamma(self) -> Gamma:
        """Configured gamma, else alpha / beta (infinite when only beta = 0, zero when alpha = 0)."""
        if self.model.gamma is not None:
            return Gamma.parse(self.model.gamma)
        return Gamma.from_flux(self.model.alpha, self.model.beta)

    def make_grid(self, n: Optional[int] = None) -> Grid:
        return grid_for(self.params(), n or self.grid.n)

    def step_controls(self) -> StepControls:
        c = self.continuation
        return StepControls(ds=c.ds, ds_min=c.ds_min, ds_max=c.ds_max, growth=c.growth, tol=c.tol,
                            compute_stability=c.stability)

    def termination(self) -> Termination:
        c = self.continuation
        return Termination(d2_floor=c.d2_floor, max_points=c.max_points, max_folds=c.max_folds)

    def evolution_controls(self) -> EvolutionControls:
        e = self.evolve
        return EvolutionControls(dt=e.dt, dt_max=e.dt_max, t_max=e.t_max, steady_tol=e.steady_tol,
                                 snapshot_every=e.snapshot_every)

    def to_ini(self) -> str:
        """Fully resolved configuration in the input format."""
        lines = []
        for name in SECTIONS:
            lines.append(f"[{name}]")
            for f in dataclasses.fields(getattr(self, name)):
                value = getattr(getattr(self, name), f.name)
                if value is not None:
                    lines.append(f"{f.name} = {_format(value)}")
            lines.append("")
        return "\n".join(lines)

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        return {name: dataclasses.asdict(getattr(self, name)) for name in SECTIONS}


def _validate(config: ExperimentConfig, path: str, sections: Dict[str, int],
              keys: Dict[Tuple[str, str], int]) -> None:
    """Build every derived object once so invalid combinations surface at load time."""
    checks = [
        ("model", config.params),
        ("model", config.gamma),
        ("grid", config.make_grid),
        ("continuation", config.step_controls),
        ("continuation", config.termination),
        ("evolve", config.evolution_controls),
    ]
    for section, build in checks:
        try:
            build()
        except CrossfluxError as e:
            raise ConfigError(str(e), path, sections.get(section)) from e
    if config.output.measure not in MEASURES:
        raise ConfigError(f"unknown measure {config.output.measure!r}; choose one of {', '.join(MEASURES)}",
                          path, keys.get(("output", "measure")))
    if len(config.sweep.ray) != 2:
        raise ConfigError("ray needs exactly two values (alpha0, beta0)", path, keys.get(("sweep", "ray")))
    for section, name in (("continuation", "j_list"), ("sweep", "j_list")):
        if not getattr(config, section).j_list or min(getattr(config, section).j_list) < 1:
            raise ConfigError("j_list needs mode indices >= 1", path, keys.get((section, name)))
    if config.output.snapshot_stride < 1:
        raise ConfigError("snapshot_stride must be >= 1", path, keys.get(("output", "snapshot_stride")))
    if config.verify.n < 3 or config.verify.random_states < 1 or config.verify.sign_samples < 2:
        raise ConfigError("verify needs n >= 3, random_states >= 1 and sign_samples >= 2", path,
                          sections.get("verify"))


def parse_config(text: str, path: str = "<config>") -> ExperimentConfig:
    """
    Parse configuration text.

    Raises:
        ConfigError: On syntax errors, unknown sections or keys, malformed values or invalid parameters
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=path)
    except configparser.Error as e:
        line = getattr(e, "lineno", None)
        if line is None and getattr(e, "errors", None):
            line = e.errors[0][0]
        raise ConfigError(str(e).splitlines()[0], path, line) from e
    sections, keys = _locate(text)
    values: Dict[str, Any] = {}
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError(f"unknown section [{name}]", path, sections.get(name))
        section_fields = {f.name: f for f in dataclasses.fields(SECTIONS[name])}
        kwargs = {}
        for key, raw in parser.items(name):
            line = keys.get((name, key))
            if key not in section_fields:
                raise ConfigError(f"unknown key {key!r} in [{name}]", path, line)
            try:
                kwargs[key] = _converter(section_fields[key])(raw)
            except (ValueError, CrossfluxError) as e:
                raise ConfigError(f"bad value for {key}: {e}", path, line) from e
        values[name] = SECTIONS[name](**kwargs)
    config = ExperimentConfig(path=path, **values)
    _validate(config, path, sections, keys)
    return config


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Read and validate a configuration file.

    Raises:
        OSError: If the file cannot be read
        ConfigError: If its content is invalid
    """
    text = Path(path).read_text(encoding="utf-8")
    logger.info("Loaded configuration from %s", path)
    return parse_config(text, str(path))


def with_overrides(config: ExperimentConfig, **sections: Dict[str, Any]) -> ExperimentConfig:
    """Copy of ``config`` with selected section fields replaced, e.g. ``output={"directory": "x"}``."""
    replaced = {name: dataclasses.replace(getattr(config, name), **changes) for name, changes in sections.items()}
    return dataclasses.replace(config, **replaced)
