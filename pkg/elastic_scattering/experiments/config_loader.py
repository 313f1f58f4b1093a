"""Configuration loader for scattering experiments."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
import yaml
from dotenv import load_dotenv

from ..utils.fields import IncidenceKind, ObservationGrid
from ..utils.geometry import available_surfaces
from ..utils.kernels import ElasticMedium, InvalidMediumError

DEFAULT_CONFIG_PATH = Path(__file__).with_name("run_config.yaml")

MODES = ("solve", "pointsource-test", "planewave-selfconvergence", "convergence-table")
THREADS_ENV = "ELASTIC_THREADS"
LOG_LEVEL_ENV = "ELASTIC_LOG_LEVEL"

BUILTIN_DEFAULTS: Dict[str, Any] = {
    "omega": float(np.pi),
    "lambda": 2.0,
    "mu": 1.0,
    "nprime": None,
    "mode": "solve",
    "incidence": None,
    "direction": [0.0, 0.0, 1.0],
    "polarization": [1.0, 0.0, 0.0],
    "source": [0.0, 0.05, 0.0866],
    "amplitude": 1.0,
    "obs_grid": "26x50",
    "reference_n": 60,
    "output_dir": "results",
    "threads": 1,
    "dump_system": False,
}


class RunConfigError(RuntimeError):
    """Raised when the experiment configuration file is invalid."""


@dataclass(frozen=True)
class RunConfig:
    """One experiment: a geometry, a medium, an incidence and a list of degrees n."""

    name: str
    geometry: str
    degrees: Tuple[int, ...]
    omega: float = float(np.pi)
    lam: float = 2.0
    mu: float = 1.0
    nprime: Optional[int] = None
    mode: str = "solve"
    incidence: IncidenceKind = IncidenceKind.PLANE_ELASTIC
    direction: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    polarization: Tuple[float, float, float] = (1.0, 0.0, 0.0)
    source: Tuple[float, float, float] = (0.0, 0.05, 0.0866)
    amplitude: float = 1.0
    obs_grid: ObservationGrid = field(default_factory=ObservationGrid)
    reference_n: int = 60
    output_dir: Path = Path("results")
    threads: int = 1
    dump_system: bool = False

    @property
    def medium(self) -> ElasticMedium:
        return ElasticMedium(omega=self.omega, lam=self.lam, mu=self.mu)

    def nprime_for(self, n: int) -> int:
        """n' = 2n + 1 unless fixed explicitly."""

        return 2 * n + 1 if self.nprime is None else self.nprime

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir) / self.name


def _default_incidence(mode: str) -> str:
    return IncidenceKind.POINT_SOURCE.value if mode == "pointsource-test" else IncidenceKind.PLANE_ELASTIC.value


def _vector(name: str, key: str, value: Any) -> Tuple[float, float, float]:
    try:
        values = tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise RunConfigError(f"Experiment '{name}': field '{key}' must be a list of three numbers.") from exc
    if len(values) != 3:
        raise RunConfigError(f"Experiment '{name}': field '{key}' must have three components, got {len(values)}.")
    return values


def _degrees(name: str, value: Any) -> Tuple[int, ...]:
    if value is None or value == "" or value == []:
        raise RunConfigError(f"Experiment '{name}': field 'n' is mandatory and must not be empty.")
    raw = value if isinstance(value, (list, tuple)) else [value]
    try:
        degrees = tuple(int(v) for v in raw)
    except (TypeError, ValueError) as exc:
        raise RunConfigError(f"Experiment '{name}': field 'n' must hold integers, got {value!r}.") from exc
    return degrees


def build_run_config(name: str, settings: Mapping[str, Any], defaults: Mapping[str, Any] | None = None) -> RunConfig:
    """Merge ``settings`` over ``defaults`` over the built-in setup and validate the result."""

    merged: Dict[str, Any] = dict(BUILTIN_DEFAULTS)
    merged.update(defaults or {})
    merged.update({k: v for k, v in settings.items() if v is not None})

    geometry = merged.get("geometry")
    if not geometry:
        raise RunConfigError(f"Experiment '{name}': field 'geometry' is mandatory.")
    if geometry not in available_surfaces():
        raise RunConfigError(
            f"Experiment '{name}': unknown geometry '{geometry}' (known: {', '.join(available_surfaces())})."
        )

    mode = merged["mode"]
    if mode not in MODES:
        raise RunConfigError(f"Experiment '{name}': unknown mode '{mode}' (known: {', '.join(MODES)}).")

    degrees = _degrees(name, merged.get("n"))
    if min(degrees) < 1:
        raise RunConfigError(f"Experiment '{name}': field 'n' must be >= 1, got {min(degrees)}.")

    nprime = merged.get("nprime")
    if nprime is not None:
        nprime = int(nprime)
        if nprime < max(degrees) + 1:
            raise RunConfigError(
                f"Experiment '{name}': field 'nprime' = {nprime} must be >= n + 1 = {max(degrees) + 1}."
            )

    try:
        omega, lam, mu = float(merged["omega"]), float(merged["lambda"]), float(merged["mu"])
        ElasticMedium(omega=omega, lam=lam, mu=mu)
    except InvalidMediumError as exc:
        raise RunConfigError(f"Experiment '{name}': {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise RunConfigError(f"Experiment '{name}': fields 'omega', 'lambda' and 'mu' must be numbers.") from exc

    try:
        incidence = IncidenceKind(merged.get("incidence") or _default_incidence(mode))
    except ValueError as exc:
        known = ", ".join(kind.value for kind in IncidenceKind)
        raise RunConfigError(f"Experiment '{name}': unknown incidence '{merged['incidence']}' (known: {known}).") from exc
    if mode == "pointsource-test" and incidence is not IncidenceKind.POINT_SOURCE:
        raise RunConfigError(f"Experiment '{name}': mode 'pointsource-test' needs incidence 'point-source'.")

    direction = _vector(name, "direction", merged["direction"])
    polarization = _vector(name, "polarization", merged["polarization"])
    source = _vector(name, "source", merged["source"])
    if incidence is not IncidenceKind.POINT_SOURCE and abs(np.linalg.norm(direction) - 1.0) > 1e-12:
        raise RunConfigError(f"Experiment '{name}': field 'direction' must be a unit vector.")
    if incidence is IncidenceKind.PLANE_S and abs(float(np.dot(direction, polarization))) > 1e-12:
        raise RunConfigError(
            f"Experiment '{name}': field 'polarization' must be orthogonal to 'direction' for incidence 'plane-s'."
        )

    try:
        obs_grid = ObservationGrid.parse(str(merged["obs_grid"]))
    except ValueError as exc:
        raise RunConfigError(f"Experiment '{name}': field 'obs_grid': {exc}") from exc

    reference_n = int(merged["reference_n"])
    if mode in ("planewave-selfconvergence", "convergence-table") and reference_n <= max(degrees):
        raise RunConfigError(
            f"Experiment '{name}': field 'reference_n' = {reference_n} must exceed every n (max {max(degrees)})."
        )

    threads = int(merged["threads"])
    if threads < 1:
        raise RunConfigError(f"Experiment '{name}': field 'threads' must be >= 1, got {threads}.")

    return RunConfig(
        name=name,
        geometry=geometry,
        degrees=degrees,
        omega=omega,
        lam=lam,
        mu=mu,
        nprime=nprime,
        mode=mode,
        incidence=incidence,
        direction=direction,
        polarization=polarization,
        source=source,
        amplitude=float(merged["amplitude"]),
        obs_grid=obs_grid,
        reference_n=reference_n,
        output_dir=Path(merged["output_dir"]),
        threads=threads,
        dump_system=bool(merged["dump_system"]),
    )


def load_config_file(config_path: Optional[str | Path] = None) -> Dict[str, Any]:
    """Parse the YAML file and check its top-level sections.

    Args:
        config_path: Optional path to a YAML file.  When omitted the
            ``run_config.yaml`` that ships with the package is used.

    Raises:
        RunConfigError: If the file is missing, is not valid YAML, or lacks
            the ``experiments`` mapping.
    """

    path = Path(config_path) if config_path else DEFAULT_CONFIG_PATH

    if not path.exists():
        raise RunConfigError(f"Run configuration file not found: {path}.")

    try:
        with path.open("r", encoding="utf-8") as handle:
            config = yaml.safe_load(handle) or {}
    except yaml.YAMLError as exc:
        raise RunConfigError(f"Invalid YAML configuration in {path}: {exc}") from exc

    if not isinstance(config.get("defaults", {}), dict):
        raise RunConfigError("Run configuration 'defaults' must be a mapping.")
    if "experiments" not in config or not isinstance(config["experiments"], dict):
        raise RunConfigError("Run configuration must include an 'experiments' mapping.")
    for name, settings in config["experiments"].items():
        if not isinstance(settings, dict):
            raise RunConfigError(f"Experiment '{name}' must be a mapping of settings.")
    return config


def environment_overrides() -> Dict[str, Any]:
    """Values taken from ``ELASTIC_*`` variables, after reading a ``.env`` file if present."""

    load_dotenv()
    overrides: Dict[str, Any] = {}
    threads = os.getenv(THREADS_ENV)
    if threads:
        try:
            overrides["threads"] = int(threads)
        except ValueError as exc:
            raise RunConfigError(f"{THREADS_ENV} must be an integer, got {threads!r}.") from exc
    return overrides


def load_run_config(
    config_path: Optional[str | Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    only: Optional[str] = None,
) -> List[RunConfig]:
    """Load every experiment of the file with flags > environment > file > built-ins.

    ``overrides`` carries command-line values (``None`` entries are ignored).
    ``only`` restricts the result to one named experiment.
    """

    config = load_config_file(config_path)
    defaults = dict(config.get("defaults", {}))
    defaults.update(environment_overrides())
    flags = {k: v for k, v in (overrides or {}).items() if v is not None}

    experiments = config["experiments"]
    if only is not None:
        if only not in experiments:
            raise RunConfigError(f"Experiment '{only}' is not defined in the configuration.")
        experiments = {only: experiments[only]}

    runs = []
    for name, settings in experiments.items():
        merged = dict(settings)
        merged.update(flags)
        runs.append(build_run_config(name, merged, defaults))
    return runs


def adhoc_run_config(
    overrides: Mapping[str, Any], config_path: Optional[str | Path] = None, name: Optional[str] = None
) -> RunConfig:
    """Single experiment built from the file's defaults plus command-line values."""

    config = load_config_file(config_path)
    defaults = dict(config.get("defaults", {}))
    defaults.update(environment_overrides())
    flags = {k: v for k, v in overrides.items() if v is not None}
    label = name or f"{flags.get('geometry', 'run')}_{flags.get('mode', defaults.get('mode', 'solve'))}"
    return build_run_config(label, flags, defaults)


__all__ = [
    "DEFAULT_CONFIG_PATH",
    "MODES",
    "RunConfig",
    "RunConfigError",
    "build_run_config",
    "load_config_file",
    "load_run_config",
    "adhoc_run_config",
    "environment_overrides",
]
