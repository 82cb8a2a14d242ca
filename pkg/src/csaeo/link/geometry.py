"""Slant range, Doppler and propagation delay for a satellite link"""
import math
from dataclasses import dataclass

EARTH_RADIUS_KM = 6378.0
SPEED_OF_LIGHT_MPS = 299_792_458.0

# Slack for degree->radian round off at the 90 degree end
_ANGLE_SLACK = 1e-12


@dataclass(frozen=True)
class GeometryParams:
    altitude_km: float
    elevation_rad: float
    radial_velocity_mps: float = 0.0
    earth_radius_km: float = EARTH_RADIUS_KM

    def __post_init__(self):
        if self.earth_radius_km != EARTH_RADIUS_KM:
            raise ValueError(f"earth_radius_km is fixed at {EARTH_RADIUS_KM}, got {self.earth_radius_km}")
        if not self.altitude_km >= 0:
            raise ValueError(f"altitude_km must be >= 0, got {self.altitude_km}")
        if not -_ANGLE_SLACK <= self.elevation_rad <= math.pi / 2 + _ANGLE_SLACK:
            raise ValueError(f"elevation_rad must lie in [0, pi/2], got {self.elevation_rad}")

    @classmethod
    def from_degrees(cls, altitude_km: float, elevation_deg: float, radial_velocity_mps: float = 0.0):
        return cls(altitude_km=altitude_km, elevation_rad=math.radians(elevation_deg),
                   radial_velocity_mps=radial_velocity_mps)


def slant_range_expanded(params: GeometryParams) -> float:
    """Slant range in km from the expanded closed form

    It does not reduce to the altitude at zenith; see slant_range_geometric.
    """
    r_e = params.earth_radius_km
    r_m = params.altitude_km
    s = math.sin(params.elevation_rad)
    radicand = r_e ** 2 * s ** 2 + r_m ** 2 + 2 * r_e * r_m - 2 * r_e * r_m * s
    # (R_E sin - r_m)^2 + 2 R_E r_m (1 - sin) + 2 R_E r_m sin >= 0
    assert radicand >= 0, f"negative radicand {radicand}"
    return math.sqrt(radicand)


def slant_range_geometric(params: GeometryParams) -> float:
    """Slant range in km from the law of cosines, exact at zenith

    sqrt(R^2 sin^2 + r^2 + 2Rr) - R sin, rewritten as sqrt((R + r)^2 - R^2 cos^2) - R sin
    so that zenith gives r back without cancellation error.
    """
    r_e = params.earth_radius_km
    r_m = params.altitude_km
    s = math.sin(params.elevation_rad)
    c = math.cos(params.elevation_rad)
    return math.sqrt((r_e + r_m) ** 2 - (r_e * c) ** 2) - r_e * s


# Public name of the closed form; "paper" and "expanded" select it interchangeably
slant_range_paper = slant_range_expanded


def slant_range_km(params: GeometryParams, mode: str = "geometric") -> float:
    if mode in ("paper", "expanded"):
        return slant_range_expanded(params)
    if mode == "geometric":
        return slant_range_geometric(params)
    raise ValueError(f"unknown slant range mode: {mode!r}")


def doppler_shift_hz(carrier_hz: float, radial_velocity_mps: float) -> float:
    if not carrier_hz > 0:
        raise ValueError(f"carrier_hz must be > 0, got {carrier_hz}")
    return carrier_hz * radial_velocity_mps / SPEED_OF_LIGHT_MPS


def propagation_delay_s(distance_km: float) -> float:
    if distance_km < 0:
        raise ValueError(f"distance_km must be >= 0, got {distance_km}")
    return distance_km * 1e3 / SPEED_OF_LIGHT_MPS


__all__ = (
    'EARTH_RADIUS_KM', 'SPEED_OF_LIGHT_MPS', 'GeometryParams', 'slant_range_paper', 'slant_range_expanded',
    'slant_range_geometric', 'slant_range_km', 'doppler_shift_hz', 'propagation_delay_s',
)
