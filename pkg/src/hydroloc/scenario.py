"""Scenario files: strict schema, validation and defaults.

A scenario is one YAML document whose nested keys mirror the
configuration types. Parsing is strict: unknown keys are rejected and
validation failures name the offending key. Angles are degrees in the
file and radians internally.
"""

from __future__ import annotations

from dataclasses import dataclass

import yaml

from .environment import Layer, WaterColumn
from .geodesy import GeodeticCoord, geodetic_to_enu
from .multilateration import GaConfig, SearchBounds
from .propagation import ChannelConfig

__all__ = ["ScenarioError", "EkfConfig", "Scenario", "load_scenario", "parse_scenario"]

_REQUIRED = object()


class ScenarioError(ValueError):
    """A scenario file failed to parse or validate."""


@dataclass(frozen=True)
class EkfConfig:
    """Fusion settings: process noise, priors and measurement variances.

    fix_sigma = None scales the fix covariance from the solver's
    population dispersion (clamped below by fix_sigma_floor).
    """

    accel_noise_density: tuple[float, float, float] = (1e-3, 1e-3, 1e-3)  # m^2/s^3
    initial_position_sigma: float = 100.0  # m
    initial_velocity_sigma: float = 1.0    # m/s
    fix_sigma: float | None = None         # m
    fix_sigma_scale: float = 1.0
    fix_sigma_floor: float = 0.5           # m
    pressure_sigma_depth: float = 0.1      # m
    water_density: float = 1025.0          # kg/m^3


@dataclass(frozen=True)
class Scenario:
    """A fully validated simulation setup."""

    column: WaterColumn
    carrier_frequency: float  # kHz
    channel: ChannelConfig
    anchor_ids: tuple[str, ...]
    anchor_positions: tuple[GeodeticCoord, ...]
    gps_noise_sigma: tuple[float, float, float]  # m per ENU axis
    enu_origin: GeodeticCoord
    origin_from_anchor: bool
    waypoints: tuple[tuple[float, float, float, float], ...]  # (time, e, n, u)
    ping_interval: float  # s
    ga: GaConfig
    ekf: EkfConfig
    seed: int

    def anchors_enu(self) -> list[tuple[float, float, float]]:
        out = []
        for g in self.anchor_positions:
            p = geodetic_to_enu(g, self.enu_origin)
            # Transform round-off can leave an anchor a hair above the
            # surface; pin it back so path tracing sees a valid depth.
            out.append((p.east, p.north, min(p.up, 0.0)))
        return out

    def duration(self) -> float:
        return self.waypoints[-1][0]


def _mapping(node, ctx: str) -> dict:
    if not isinstance(node, dict):
        raise ScenarioError(f"{ctx}: expected a mapping, got {type(node).__name__}")
    return node


def _check_unknown(node: dict, allowed, ctx: str) -> None:
    unknown = sorted(set(node) - set(allowed))
    if unknown:
        raise ScenarioError(f"{ctx}: unknown key '{unknown[0]}'")


def _get(node: dict, key: str, ctx: str, default=_REQUIRED):
    if key not in node:
        if default is _REQUIRED:
            raise ScenarioError(f"{ctx}: missing required key '{key}'")
        return default
    return node[key]


def _number(node: dict, key: str, ctx: str, default=_REQUIRED) -> float:
    value = _get(node, key, ctx, default)
    if value is default and default is not _REQUIRED:
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{ctx}.{key}: expected a number, got {value!r}")
    return float(value)


def _integer(node: dict, key: str, ctx: str, default=_REQUIRED) -> int:
    value = _get(node, key, ctx, default)
    if value is default and default is not _REQUIRED:
        return value
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{ctx}.{key}: expected an integer, got {value!r}")
    return value


def _boolean(node: dict, key: str, ctx: str, default=_REQUIRED) -> bool:
    value = _get(node, key, ctx, default)
    if value is default and default is not _REQUIRED:
        return value
    if not isinstance(value, bool):
        raise ScenarioError(f"{ctx}.{key}: expected a boolean, got {value!r}")
    return value


def _string(node: dict, key: str, ctx: str, default=_REQUIRED) -> str:
    value = _get(node, key, ctx, default)
    if value is default and default is not _REQUIRED:
        return value
    if not isinstance(value, str):
        raise ScenarioError(f"{ctx}.{key}: expected a string, got {value!r}")
    return value


def _sequence(node: dict, key: str, ctx: str) -> list:
    value = _get(node, key, ctx)
    if not isinstance(value, list):
        raise ScenarioError(f"{ctx}.{key}: expected a list, got {type(value).__name__}")
    return value


def _parse_column(node: dict) -> WaterColumn:
    section = _mapping(_get(node, "water_column", "scenario"), "water_column")
    _check_unknown(section, ("layers",), "water_column")
    layer_nodes = _sequence(section, "layers", "water_column")
    layers = []
    for i, item in enumerate(layer_nodes):
        ctx = f"water_column.layers[{i}]"
        m = _mapping(item, ctx)
        _check_unknown(m, ("thickness", "temperature", "salinity", "ph"), ctx)
        try:
            layers.append(
                Layer(
                    thickness=_number(m, "thickness", ctx),
                    temperature=_number(m, "temperature", ctx),
                    salinity=_number(m, "salinity", ctx),
                    ph=_number(m, "ph", ctx),
                )
            )
        except ValueError as exc:
            raise ScenarioError(f"{ctx}: {exc}") from None
    if not layers:
        raise ScenarioError("water_column.layers: at least one layer is required")
    return WaterColumn(layers)


def _parse_channel(node: dict) -> ChannelConfig:
    section = _mapping(_get(node, "channel", "scenario"), "channel")
    allowed = (
        "source_level", "noise_level", "detection_threshold",
        "tof_noise_sigma", "path_model",
    )
    _check_unknown(section, allowed, "channel")
    try:
        return ChannelConfig(
            source_level=_number(section, "source_level", "channel"),
            noise_level=_number(section, "noise_level", "channel"),
            detection_threshold=_number(section, "detection_threshold", "channel", 0.0),
            tof_noise_sigma=_number(section, "tof_noise_sigma", "channel", 0.0),
            path_model=_string(section, "path_model", "channel", "refracted"),
        )
    except ValueError as exc:
        raise ScenarioError(f"channel: {exc}") from None


def _parse_geodetic(m: dict, ctx: str) -> GeodeticCoord:
    try:
        return GeodeticCoord.from_degrees(
            latitude=_number(m, "latitude", ctx),
            longitude=_number(m, "longitude", ctx),
            height=_number(m, "height", ctx, 0.0),
        )
    except ValueError as exc:
        raise ScenarioError(f"{ctx}: {exc}") from None


def _parse_anchors(node: dict):
    items = _sequence(node, "anchors", "scenario")
    if len(items) < 4:
        raise ScenarioError(f"anchors: at least 4 anchors are required, got {len(items)}")
    ids, coords = [], []
    for i, item in enumerate(items):
        ctx = f"anchors[{i}]"
        m = _mapping(item, ctx)
        _check_unknown(m, ("id", "latitude", "longitude", "height"), ctx)
        anchor_id = _string(m, "id", ctx)
        if anchor_id in ids:
            raise ScenarioError(f"{ctx}.id: duplicate anchor id {anchor_id!r}")
        ids.append(anchor_id)
        coords.append(_parse_geodetic(m, ctx))
    return tuple(ids), tuple(coords)


def _parse_gps_sigma(node: dict) -> tuple[float, float, float]:
    if "gps_noise_sigma" not in node:
        return (0.0, 0.0, 0.0)
    m = _mapping(node["gps_noise_sigma"], "gps_noise_sigma")
    _check_unknown(m, ("east", "north", "up"), "gps_noise_sigma")
    sigma = tuple(
        _number(m, axis, "gps_noise_sigma", 0.0) for axis in ("east", "north", "up")
    )
    for axis, value in zip(("east", "north", "up"), sigma):
        if value < 0:
            raise ScenarioError(f"gps_noise_sigma.{axis}: must be >= 0, got {value}")
    return sigma


def _parse_trajectory(node: dict, column: WaterColumn):
    items = _sequence(node, "trajectory", "scenario")
    if len(items) < 2:
        raise ScenarioError(
            f"trajectory: at least 2 waypoints are required, got {len(items)}"
        )
    waypoints = []
    for i, item in enumerate(items):
        ctx = f"trajectory[{i}]"
        m = _mapping(item, ctx)
        _check_unknown(m, ("time", "east", "north", "up"), ctx)
        t = _number(m, "time", ctx)
        e = _number(m, "east", ctx)
        n = _number(m, "north", ctx)
        u = _number(m, "up", ctx)
        if not 0.0 <= -u <= column.total_depth:
            raise ScenarioError(
                f"{ctx}.up: depth {-u} m outside the water column "
                f"[0, {column.total_depth}]"
            )
        waypoints.append((t, e, n, u))
    if waypoints[0][0] != 0.0:
        raise ScenarioError(
            f"trajectory[0].time: must be 0.0, got {waypoints[0][0]}"
        )
    for i in range(1, len(waypoints)):
        if waypoints[i][0] <= waypoints[i - 1][0]:
            raise ScenarioError(
                f"trajectory[{i}].time: timestamps must be strictly increasing"
            )
    return tuple(waypoints)


def _parse_bounds(node: dict, ctx: str) -> SearchBounds:
    m = _mapping(node, ctx)
    _check_unknown(m, ("east", "north", "up"), ctx)
    spans = {}
    for axis in ("east", "north", "up"):
        raw = _get(m, axis, ctx)
        if (
            not isinstance(raw, list)
            or len(raw) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in raw)
        ):
            raise ScenarioError(f"{ctx}.{axis}: expected [low, high] numbers, got {raw!r}")
        spans[axis] = (float(raw[0]), float(raw[1]))
    try:
        return SearchBounds(east=spans["east"], north=spans["north"], up=spans["up"])
    except ValueError as exc:
        raise ScenarioError(f"{ctx}: {exc}") from None


def _parse_ga(node: dict, column: WaterColumn) -> GaConfig:
    section = _mapping(_get(node, "ga", "scenario"), "ga")
    allowed = (
        "population_size", "generations", "tournament_size", "crossover_rate",
        "mutation_rate", "mutation_sigma_initial", "mutation_sigma_decay",
        "elite_count", "fitness_mode", "snr_weighting",
        "dispersion_warn_threshold", "seed", "search_bounds",
    )
    _check_unknown(section, allowed, "ga")
    bounds = _parse_bounds(_get(section, "search_bounds", "ga"), "ga.search_bounds")
    if -bounds.up[0] > column.total_depth:
        raise ScenarioError(
            f"ga.search_bounds.up: reaches {-bounds.up[0]} m, below the "
            f"{column.total_depth} m water column"
        )
    sigma0 = section.get("mutation_sigma_initial")
    if sigma0 is not None:
        sigma0 = _number(section, "mutation_sigma_initial", "ga")
    try:
        return GaConfig(
            search_bounds=bounds,
            population_size=_integer(section, "population_size", "ga", 200),
            generations=_integer(section, "generations", "ga", 300),
            tournament_size=_integer(section, "tournament_size", "ga", 3),
            crossover_rate=_number(section, "crossover_rate", "ga", 0.9),
            mutation_rate=_number(section, "mutation_rate", "ga", 0.3),
            mutation_sigma_initial=sigma0,
            mutation_sigma_decay=_number(section, "mutation_sigma_decay", "ga", 0.98),
            elite_count=_integer(section, "elite_count", "ga", 1),
            fitness_mode=_string(section, "fitness_mode", "ga", "tof_residual"),
            snr_weighting=_boolean(section, "snr_weighting", "ga", False),
            dispersion_warn_threshold=_number(
                section, "dispersion_warn_threshold", "ga", 10.0
            ),
            seed=_integer(section, "seed", "ga", 0),
        )
    except ValueError as exc:
        raise ScenarioError(f"ga: {exc}") from None


def _parse_ekf(node: dict) -> EkfConfig:
    if "ekf" not in node:
        return EkfConfig()
    section = _mapping(node["ekf"], "ekf")
    allowed = (
        "accel_noise_density", "initial_position_sigma", "initial_velocity_sigma",
        "fix_sigma", "fix_sigma_scale", "fix_sigma_floor",
        "pressure_sigma_depth", "water_density",
    )
    _check_unknown(section, allowed, "ekf")
    defaults = EkfConfig()

    accel = defaults.accel_noise_density
    if "accel_noise_density" in section:
        m = _mapping(section["accel_noise_density"], "ekf.accel_noise_density")
        _check_unknown(m, ("east", "north", "up"), "ekf.accel_noise_density")
        accel = tuple(
            _number(m, axis, "ekf.accel_noise_density", d)
            for axis, d in zip(("east", "north", "up"), defaults.accel_noise_density)
        )
        for axis, value in zip(("east", "north", "up"), accel):
            if value <= 0:
                raise ScenarioError(
                    f"ekf.accel_noise_density.{axis}: must be > 0, got {value}"
                )

    fix_sigma = section.get("fix_sigma")
    if fix_sigma is not None:
        fix_sigma = _number(section, "fix_sigma", "ekf")
        if fix_sigma <= 0:
            raise ScenarioError(f"ekf.fix_sigma: must be > 0, got {fix_sigma}")

    cfg = EkfConfig(
        accel_noise_density=accel,
        initial_position_sigma=_number(
            section, "initial_position_sigma", "ekf", defaults.initial_position_sigma
        ),
        initial_velocity_sigma=_number(
            section, "initial_velocity_sigma", "ekf", defaults.initial_velocity_sigma
        ),
        fix_sigma=fix_sigma,
        fix_sigma_scale=_number(section, "fix_sigma_scale", "ekf", defaults.fix_sigma_scale),
        fix_sigma_floor=_number(section, "fix_sigma_floor", "ekf", defaults.fix_sigma_floor),
        pressure_sigma_depth=_number(
            section, "pressure_sigma_depth", "ekf", defaults.pressure_sigma_depth
        ),
        water_density=_number(section, "water_density", "ekf", defaults.water_density),
    )
    for name in (
        "initial_position_sigma", "initial_velocity_sigma", "fix_sigma_scale",
        "fix_sigma_floor", "pressure_sigma_depth", "water_density",
    ):
        if getattr(cfg, name) <= 0:
            raise ScenarioError(f"ekf.{name}: must be > 0, got {getattr(cfg, name)}")
    return cfg


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document from YAML text."""
    try:
        root = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ScenarioError(f"scenario does not parse{where}: {exc}") from None
    root = _mapping(root, "scenario")

    allowed = (
        "water_column", "carrier_frequency", "channel", "anchors",
        "gps_noise_sigma", "enu_origin", "trajectory", "ping_interval",
        "ga", "ekf", "seed",
    )
    _check_unknown(root, allowed, "scenario")

    column = _parse_column(root)
    carrier = _number(root, "carrier_frequency", "scenario")
    if carrier <= 0:
        raise ScenarioError(f"carrier_frequency: must be > 0 kHz, got {carrier}")
    channel = _parse_channel(root)
    anchor_ids, anchor_coords = _parse_anchors(root)
    gps_sigma = _parse_gps_sigma(root)

    if "enu_origin" in root:
        m = _mapping(root["enu_origin"], "enu_origin")
        _check_unknown(m, ("latitude", "longitude", "height"), "enu_origin")
        origin = _parse_geodetic(m, "enu_origin")
        origin_from_anchor = False
    else:
        origin = anchor_coords[0]
        origin_from_anchor = True

    waypoints = _parse_trajectory(root, column)
    ping_interval = _number(root, "ping_interval", "scenario")
    if ping_interval <= 0:
        raise ScenarioError(f"ping_interval: must be > 0, got {ping_interval}")

    ga = _parse_ga(root, column)
    ekf = _parse_ekf(root)
    seed = _integer(root, "seed", "scenario", 0)

    scenario = Scenario(
        column=column,
        carrier_frequency=carrier,
        channel=channel,
        anchor_ids=anchor_ids,
        anchor_positions=anchor_coords,
        gps_noise_sigma=gps_sigma,
        enu_origin=origin,
        origin_from_anchor=origin_from_anchor,
        waypoints=waypoints,
        ping_interval=ping_interval,
        ga=ga,
        ekf=ekf,
        seed=seed,
    )

    for i, g in enumerate(scenario.anchor_positions):
        depth = -geodetic_to_enu(g, scenario.enu_origin).up
        # Allow micrometre-scale excursions above the surface from
        # transform round-off; anchors_enu() pins those back to 0.
        if not -1e-6 <= depth <= column.total_depth:
            raise ScenarioError(
                f"anchors[{i}]: ENU depth {depth:.3f} m falls outside the water "
                "column; check anchor heights against the ENU origin"
            )
    return scenario


def load_scenario(path) -> Scenario:
    """Load and validate a scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from None
    return parse_scenario(text)
