"""Free-space link budget for UAV base stations.

Received power follows the Friis free-space law over the 3D user-UAV distance,
noise is thermal (kTB), and per-user throughput is the Shannon rate on an equal
share of the serving UAV's bandwidth.  Coverage is geometric: a user is covered
when its serving UAV is within that UAV's communication range.

Two evaluation paths are provided.  :func:`evaluate_scenario` is a scalar,
pure-Python reference; :func:`evaluate_batch` is a vectorized numpy version
used by the deployment search.  Tests hold them to agreement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DomainError
from .rng import SplitMix64

SPEED_OF_LIGHT = 299_792_458.0
BOLTZMANN = 1.380649e-23
_FRIIS_CONST_DB = 20.0 * math.log10(4.0 * math.pi / SPEED_OF_LIGHT)

DEFAULT_AREA = (1000.0, 1000.0)
DEFAULT_ALTITUDE_M = 100.0
DEFAULT_MAX_TX_DBM = 20.0
DEFAULT_RANGE_M = 400.0


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


@dataclass(frozen=True)
class Position3D:
    x: float
    y: float
    z: float = 0.0

    def __post_init__(self) -> None:
        if not _finite(self.x, self.y, self.z):
            raise DomainError(f"non-finite coordinate in {self}")

    def distance(self, other: "Position3D") -> float:
        return math.sqrt((self.x - other.x) ** 2 + (self.y - other.y) ** 2 + (self.z - other.z) ** 2)


@dataclass(frozen=True)
class UserTerminal:
    id: int
    position: Position3D


@dataclass(frozen=True)
class UavNode:
    """A UAV base station.

    ``tx_power_dbm`` may be ``-inf`` to model a transmitter that is switched off
    (zero linear power).
    """

    id: int
    position: Position3D
    tx_power_dbm: float = DEFAULT_MAX_TX_DBM
    comm_range_m: float = DEFAULT_RANGE_M


@dataclass(frozen=True)
class ChannelParams:
    carrier_freq_hz: float = 2.4e9
    bandwidth_hz: float = 2.0e7
    temperature_k: float = 290.0
    boltzmann_j_per_k: float = BOLTZMANN

    def __post_init__(self) -> None:
        for name in ("carrier_freq_hz", "bandwidth_hz", "temperature_k", "boltzmann_j_per_k"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive and finite, got {v}")

    @property
    def noise_dbm(self) -> float:
        return noise_power_dbm(self.bandwidth_hz, self.temperature_k, self.boltzmann_j_per_k)


@dataclass(frozen=True)
class NetworkScenario:
    users: tuple[UserTerminal, ...]
    uavs: tuple[UavNode, ...]
    area_m: tuple[float, float] = DEFAULT_AREA
    channel: ChannelParams = field(default_factory=ChannelParams)
    max_tx_power_dbm: float = DEFAULT_MAX_TX_DBM

    def __post_init__(self) -> None:
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "uavs", tuple(self.uavs))
        object.__setattr__(self, "area_m", (float(self.area_m[0]), float(self.area_m[1])))
        width, height = self.area_m
        if not (width > 0 and height > 0):
            raise DomainError("area dimensions must be positive")
        if not self.users:
            raise DomainError("scenario needs at least one user")
        if not self.uavs:
            raise DomainError("scenario needs at least one UAV slot")
        if len({u.id for u in self.users}) != len(self.users):
            raise DomainError("user ids must be unique")
        for u in self.users:
            p = u.position
            if p.z != 0.0 or not (0.0 <= p.x <= width and 0.0 <= p.y <= height):
                raise DomainError(f"user {u.id} outside area or above ground: {p}")
        for a in self.uavs:
            if a.position.z <= 0.0:
                raise DomainError(f"UAV {a.id} must fly above ground")
            if a.tx_power_dbm > self.max_tx_power_dbm or (
                a.tx_power_dbm < 0.0 and a.tx_power_dbm != -math.inf
            ):
                raise DomainError(f"UAV {a.id} power {a.tx_power_dbm} dBm outside [0, {self.max_tx_power_dbm}]")
            if not (a.comm_range_m > 0.0):
                raise DomainError(f"UAV {a.id} range must be positive")

    @property
    def altitude_m(self) -> float:
        return self.uavs[0].position.z

    def with_range(self, range_m: float) -> "NetworkScenario":
        return replace(self, uavs=tuple(replace(a, comm_range_m=range_m) for a in self.uavs))

    def to_dict(self) -> dict:
        return {
            "area_m": {"width": self.area_m[0], "height": self.area_m[1]},
            "users": [
                {"id": u.id, "position": _pos_dict(u.position)} for u in self.users
            ],
            "uavs": [
                {
                    "id": a.id,
                    "position": _pos_dict(a.position),
                    "tx_power_dbm": a.tx_power_dbm,
                    "comm_range_m": a.comm_range_m,
                }
                for a in self.uavs
            ],
            "channel": {
                "carrier_freq_hz": self.channel.carrier_freq_hz,
                "bandwidth_hz": self.channel.bandwidth_hz,
                "temperature_k": self.channel.temperature_k,
                "boltzmann_j_per_k": self.channel.boltzmann_j_per_k,
            },
            "max_tx_power_dbm": self.max_tx_power_dbm,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkScenario":
        try:
            area = doc["area_m"]
            if isinstance(area, dict):
                area = (area["width"], area["height"])
            return cls(
                users=tuple(
                    UserTerminal(int(u["id"]), Position3D(**u["position"])) for u in doc["users"]
                ),
                uavs=tuple(
                    UavNode(
                        int(a["id"]),
                        Position3D(**a["position"]),
                        float(a["tx_power_dbm"]),
                        float(a["comm_range_m"]),
                    )
                    for a in doc["uavs"]
                ),
                area_m=(float(area[0]), float(area[1])),
                channel=ChannelParams(**doc.get("channel", {})),
                max_tx_power_dbm=float(doc.get("max_tx_power_dbm", DEFAULT_MAX_TX_DBM)),
            )
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed scenario document: {exc!r}") from exc


def _pos_dict(p: Position3D) -> dict:
    return {"x": p.x, "y": p.y, "z": p.z}


@dataclass(frozen=True)
class NetworkMetrics:
    coverage_ratio: float
    sum_rate_bps: float
    per_user_rate_bps: tuple[float, ...]
    per_user_sinr_db: tuple[float, ...]
    covered_flags: tuple[bool, ...]
    serving_uav: tuple[int, ...] = ()
    allocated_bandwidth_hz: tuple[float, ...] = ()

    def summary(self) -> dict:
        return {
            "coverage_ratio": self.coverage_ratio,
            "sum_rate_bps": self.sum_rate_bps,
            "covered_users": sum(self.covered_flags),
            "n_users": len(self.covered_flags),
        }


# --- link budget ------------------------------------------------------------


def fspl_db(distance_m: float, freq_hz: float) -> float:
    """Friis free-space path loss, 20 log10(4 pi d f / c)."""
    if not (distance_m > 0.0) or not (freq_hz > 0.0):
        raise DomainError(f"distance and frequency must be positive (d={distance_m}, f={freq_hz})")
    return 20.0 * math.log10(distance_m) + 20.0 * math.log10(freq_hz) + _FRIIS_CONST_DB


def noise_power_dbm(bandwidth_hz: float, temperature_k: float = 290.0, boltzmann: float = BOLTZMANN) -> float:
    if not (bandwidth_hz > 0.0 and temperature_k > 0.0 and boltzmann > 0.0):
        raise DomainError("bandwidth, temperature and Boltzmann constant must be positive")
    return 10.0 * math.log10(boltzmann * temperature_k * bandwidth_hz / 1e-3)


def dbm_to_mw(p_dbm: float) -> float:
    if p_dbm == -math.inf:
        return 0.0
    return 10.0 ** (p_dbm / 10.0)


def received_power_dbm(user: UserTerminal, uav: UavNode, channel: ChannelParams) -> float:
    d = user.position.distance(uav.position)
    return uav.tx_power_dbm - fspl_db(d, channel.carrier_freq_hz)


def sinr_db(
    user: UserTerminal,
    serving: UavNode,
    interferers: Sequence[UavNode],
    channel: ChannelParams,
) -> float:
    if user.position == serving.position:
        raise DomainError("user and serving UAV share a position")
    signal = dbm_to_mw(received_power_dbm(user, serving, channel))
    denom = dbm_to_mw(channel.noise_dbm)
    for other in interferers:
        denom += dbm_to_mw(received_power_dbm(user, other, channel))
    if signal == 0.0:
        return -math.inf
    return 10.0 * math.log10(signal / denom)


def link_rate_bps(sinr: float, allocated_bandwidth_hz: float) -> float:
    """Shannon rate B log2(1 + SINR) with SINR given in dB."""
    if allocated_bandwidth_hz < 0.0:
        raise DomainError("allocated bandwidth must be non-negative")
    if allocated_bandwidth_hz == 0.0 or sinr == -math.inf:
        return 0.0
    return allocated_bandwidth_hz * math.log2(1.0 + 10.0 ** (sinr / 10.0))


def evaluate_scenario(scenario: NetworkScenario) -> NetworkMetrics:
    """Associate, cover, share bandwidth and rate every user of ``scenario``."""
    users = scenario.users
    if not users:
        raise DomainError("scenario has no users")
    uavs = scenario.uavs
    channel = scenario.channel

    serving: list[int] = []
    covered: list[bool] = []
    for user in users:
        best = 0
        best_rx = -math.inf
        for j, uav in enumerate(uavs):
            rx = received_power_dbm(user, uav, channel)
            if rx > best_rx:
                best, best_rx = j, rx
        serving.append(best)
        covered.append(user.position.distance(uavs[best].position) <= uavs[best].comm_range_m)

    load = [0] * len(uavs)
    for j, c in zip(serving, covered):
        if c:
            load[j] += 1

    rates: list[float] = []
    sinrs: list[float] = []
    shares: list[float] = []
    for user, j, c in zip(users, serving, covered):
        others = [a for k, a in enumerate(uavs) if k != j]
        s = sinr_db(user, uavs[j], others, channel)
        sinrs.append(s)
        share = channel.bandwidth_hz / load[j] if c else 0.0
        shares.append(share)
        rates.append(link_rate_bps(s, share) if c else 0.0)

    return NetworkMetrics(
        coverage_ratio=sum(covered) / len(users),
        sum_rate_bps=math.fsum(rates),
        per_user_rate_bps=tuple(rates),
        per_user_sinr_db=tuple(sinrs),
        covered_flags=tuple(covered),
        serving_uav=tuple(serving),
        allocated_bandwidth_hz=tuple(shares),
    )


def nadir_reference_rate_bps(channel: ChannelParams, max_tx_power_dbm: float, altitude_m: float) -> float:
    """Rate of a lone user directly below a max-power UAV on the full band."""
    snr = max_tx_power_dbm - fspl_db(altitude_m, channel.carrier_freq_hz) - channel.noise_dbm
    return link_rate_bps(snr, channel.bandwidth_hz)


def evaluate_batch(
    users_xy: np.ndarray,
    uav_xyz: np.ndarray,
    powers_dbm: np.ndarray,
    ranges_m: np.ndarray,
    channel: ChannelParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Coverage ratio and sum rate for N candidate deployments at once.

    Shapes: ``users_xy`` (U, 2), ``uav_xyz`` (N, K, 3), ``powers_dbm`` (N, K),
    ``ranges_m`` (K,).  Returns two arrays of shape (N,).
    """
    uav_xyz = np.asarray(uav_xyz, dtype=float)
    powers_dbm = np.asarray(powers_dbm, dtype=float)
    n, k, _ = uav_xyz.shape
    n_users = users_xy.shape[0]

    dx = users_xy[None, :, None, 0] - uav_xyz[:, None, :, 0]
    dy = users_xy[None, :, None, 1] - uav_xyz[:, None, :, 1]
    dist = np.sqrt(dx * dx + dy * dy + uav_xyz[:, None, :, 2] ** 2)  # (N, U, K)

    loss = 20.0 * np.log10(dist) + 20.0 * math.log10(channel.carrier_freq_hz) + _FRIIS_CONST_DB
    rx_dbm = powers_dbm[:, None, :] - loss
    with np.errstate(under="ignore"):
        rx_mw = np.where(np.isneginf(rx_dbm), 0.0, 10.0 ** (rx_dbm / 10.0))

    best = np.argmax(rx_dbm, axis=2)  # first max on ties, like the scalar path
    signal = np.take_along_axis(rx_mw, best[:, :, None], axis=2)[:, :, 0]
    interference = rx_mw.sum(axis=2) - signal
    noise_mw = 10.0 ** (channel.noise_dbm / 10.0)
    sinr_lin = signal / (noise_mw + np.maximum(interference, 0.0))

    serve_dist = np.take_along_axis(dist, best[:, :, None], axis=2)[:, :, 0]
    covered = serve_dist <= np.asarray(ranges_m, dtype=float)[best]

    onehot = (best[:, :, None] == np.arange(k)[None, None, :]) & covered[:, :, None]
    load = onehot.sum(axis=1)  # (N, K)
    user_load = np.take_along_axis(load, best, axis=1)
    share = np.where(covered, channel.bandwidth_hz / np.maximum(user_load, 1), 0.0)
    rates = share * np.log2(1.0 + sinr_lin)

    return covered.sum(axis=1) / n_users, rates.sum(axis=1)


def generate_users(seed: int, count: int, area: tuple[float, float] = DEFAULT_AREA) -> list[UserTerminal]:
    """Uniform user drop: x then y per user, in id order, from one splitmix64 stream."""
    if count < 1:
        raise DomainError("user count must be at least 1")
    width, height = area
    rng = SplitMix64(seed)
    users = []
    for i in range(count):
        x = rng.uniform() * width
        y = rng.uniform() * height
        users.append(UserTerminal(i, Position3D(x, y, 0.0)))
    return users


def make_scenario(
    seed: int,
    user_count: int = 10,
    *,
    n_uavs: int = 1,
    range_m: float = DEFAULT_RANGE_M,
    area: tuple[float, float] = DEFAULT_AREA,
    altitude_m: float = DEFAULT_ALTITUDE_M,
    max_tx_power_dbm: float = DEFAULT_MAX_TX_DBM,
    channel: ChannelParams | None = None,
) -> NetworkScenario:
    """Random-drop scenario with UAV slots parked at the area center."""
    center = Position3D(area[0] / 2.0, area[1] / 2.0, altitude_m)
    return NetworkScenario(
        users=tuple(generate_users(seed, user_count, area)),
        uavs=tuple(UavNode(j, center, float(max_tx_power_dbm), float(range_m)) for j in range(n_uavs)),
        area_m=area,
        channel=channel or ChannelParams(),
        max_tx_power_dbm=max_tx_power_dbm,
    )
