"""UAV placement and transmit-power search.

The objective is the wireless quality ``Q_c + Q_R`` of a deployment.  The
heuristic runs a coarse grid over (position, power) cells and refines the best
cells with an axis-aligned pattern search whose step halves whenever no poll
point improves.  :func:`brute_force_oracle` enumerates a fine grid exhaustively
and is the reference the heuristic is measured against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .cot.types import ControlCommand
from .errors import DomainError, GridTooLarge
from .evaluation import q_wireless
from .physics import (
    NetworkScenario,
    Position3D,
    evaluate_batch,
    evaluate_scenario,
    nadir_reference_rate_bps,
)

ORACLE_LIMIT = 10**7
_BATCH = 65536


@dataclass(frozen=True)
class DeploymentDecision:
    uav_positions: tuple[Position3D, ...]
    tx_powers_dbm: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "uav_positions", tuple(self.uav_positions))
        object.__setattr__(self, "tx_powers_dbm", tuple(float(p) for p in self.tx_powers_dbm))
        if len(self.uav_positions) != len(self.tx_powers_dbm):
            raise DomainError("positions and powers differ in length")

    def to_command(self) -> ControlCommand:
        return ControlCommand(
            uav_positions=tuple((p.x, p.y) for p in self.uav_positions),
            tx_powers_dbm=self.tx_powers_dbm,
        )

    @classmethod
    def from_command(cls, command: ControlCommand, altitude_m: float) -> "DeploymentDecision":
        return cls(
            tuple(Position3D(x, y, altitude_m) for x, y in command.uav_positions),
            command.tx_powers_dbm,
        )


@dataclass(frozen=True)
class OptimizerConfig:
    coarse_grid_step_m: float = 100.0
    power_step_db: float = 2.0
    local_search_iters: int = 200
    local_step_init_m: float = 50.0
    seed: int = 0
    n_starts: int = 4

    def __post_init__(self) -> None:
        if not (self.coarse_grid_step_m > 0 and self.power_step_db > 0 and self.local_step_init_m > 0):
            raise DomainError("optimizer steps must be positive")
        if self.local_search_iters < 0 or self.n_starts < 1:
            raise DomainError("iteration and start counts must be non-negative / positive")


@dataclass(frozen=True)
class OracleResult:
    best_decision: DeploymentDecision
    best_objective: float
    evaluations: int


@dataclass(frozen=True)
class SearchResult:
    decision: DeploymentDecision
    objective: float
    grid_objective: float
    evaluations: int


def check_feasible(scenario: NetworkScenario, decision: DeploymentDecision, *, allow_off: bool = False) -> None:
    """Raise DomainError unless the decision fits the scenario's bounds and caps."""
    if len(decision.uav_positions) != len(scenario.uavs):
        raise DomainError(
            f"decision has {len(decision.uav_positions)} UAVs, scenario has {len(scenario.uavs)} slots"
        )
    w, h = scenario.area_m
    for p in decision.uav_positions:
        if not (0.0 <= p.x <= w and 0.0 <= p.y <= h):
            raise DomainError(f"UAV position {p} outside area")
        if p.z != scenario.altitude_m:
            raise DomainError("UAV altitude is fixed by the scenario")
    for pw in decision.tx_powers_dbm:
        if allow_off and pw == -math.inf:
            continue
        if not (0.0 <= pw <= scenario.max_tx_power_dbm):
            raise DomainError(f"power {pw} dBm outside [0, {scenario.max_tx_power_dbm}]")


def apply_decision(scenario: NetworkScenario, decision: DeploymentDecision) -> NetworkScenario:
    uavs = tuple(
        replace(a, position=p, tx_power_dbm=pw)
        for a, p, pw in zip(scenario.uavs, decision.uav_positions, decision.tx_powers_dbm)
    )
    return replace(scenario, uavs=uavs)


def wireless_objective(scenario: NetworkScenario, decision: DeploymentDecision) -> float:
    """Q_c + Q_R of ``decision``.  A power of ``-inf`` dBm switches a UAV off."""
    check_feasible(scenario, decision, allow_off=True)
    q_c, q_r = q_wireless(evaluate_scenario(apply_decision(scenario, decision)), scenario)
    return q_c + q_r


class _BatchObjective:
    """Vectorized Q_c + Q_R over candidate (xy, power) arrays for one scenario."""

    def __init__(self, scenario: NetworkScenario) -> None:
        self.scenario = scenario
        self.users_xy = np.array([[u.position.x, u.position.y] for u in scenario.users])
        self.ranges = np.array([a.comm_range_m for a in scenario.uavs])
        self.altitude = scenario.altitude_m
        self.r_ref = nadir_reference_rate_bps(scenario.channel, scenario.max_tx_power_dbm, self.altitude)
        self.count = 0

    def __call__(self, xy: np.ndarray, powers: np.ndarray) -> np.ndarray:
        n, k, _ = xy.shape
        xyz = np.concatenate([xy, np.full((n, k, 1), self.altitude)], axis=2)
        cov, rate = evaluate_batch(self.users_xy, xyz, powers, self.ranges, self.scenario.channel)
        self.count += n
        return cov + np.clip(rate / self.r_ref, 0.0, 1.0)


def _axis(extent: float, step: float) -> np.ndarray:
    n = int(math.floor(extent / step + 1e-9))
    return np.arange(n + 1) * step


def _power_levels(max_dbm: float, step: float) -> np.ndarray:
    levels = _axis(max_dbm, step)
    if max_dbm - levels[-1] > 1e-9:
        levels = np.append(levels, max_dbm)
    return levels


def _cell_table(scenario: NetworkScenario, grid_step: float, power_step: float) -> tuple[np.ndarray, np.ndarray]:
    """All (x, y, power) candidates for one UAV in row-major, low-power-first order."""
    w, h = scenario.area_m
    xs, ys = _axis(w, grid_step), _axis(h, grid_step)
    ps = _power_levels(scenario.max_tx_power_dbm, power_step)
    yy, xx, pp = np.meshgrid(ys, xs, ps, indexing="ij")
    xy = np.stack([xx.ravel(), yy.ravel()], axis=1)
    return xy, pp.ravel()


def _decision(scenario: NetworkScenario, xy: np.ndarray, powers: np.ndarray) -> DeploymentDecision:
    alt = scenario.altitude_m
    return DeploymentDecision(
        tuple(Position3D(float(x), float(y), alt) for x, y in xy),
        tuple(float(p) for p in powers),
    )


def centroid_baseline(scenario: NetworkScenario) -> DeploymentDecision:
    """Every UAV slot hovers over the users' centroid at full power."""
    n = len(scenario.users)
    if n == 0:
        raise DomainError("centroid of an empty user set")
    cx = math.fsum(u.position.x for u in scenario.users) / n
    cy = math.fsum(u.position.y for u in scenario.users) / n
    k = len(scenario.uavs)
    pos = Position3D(cx, cy, scenario.altitude_m)
    return DeploymentDecision((pos,) * k, (scenario.max_tx_power_dbm,) * k)


def _anchor_points(scenario: NetworkScenario, slot: int) -> np.ndarray:
    """Candidate positions where coverage sets change.

    Users themselves, pairwise midpoints, and the crossing points of the
    horizontal coverage circles of each user pair, nudged 0.5 m inward so the
    candidate sits inside both disks.
    """
    w, h = scenario.area_m
    uav = scenario.uavs[slot]
    radius_sq = uav.comm_range_m**2 - scenario.altitude_m**2
    pts = [[u.position.x, u.position.y] for u in scenario.users]
    if radius_sq <= 0.0:
        return np.clip(np.array(pts), [0.0, 0.0], [w, h])
    radius = math.sqrt(radius_sq)
    users = pts[:]
    for i in range(len(users)):
        xi, yi = users[i]
        for j in range(i + 1, len(users)):
            xj, yj = users[j]
            mx, my = (xi + xj) / 2.0, (yi + yj) / 2.0
            pts.append([mx, my])
            d = math.hypot(xj - xi, yj - yi)
            if d == 0.0 or d >= 2.0 * radius:
                continue
            half = math.sqrt(radius_sq - (d / 2.0) ** 2)
            inner = max(half - 0.5, 0.0)
            px, py = -(yj - yi) / d, (xj - xi) / d
            pts.append([mx + inner * px, my + inner * py])
            pts.append([mx - inner * px, my - inner * py])
    return np.clip(np.array(pts), [0.0, 0.0], [w, h])


def _grid_phase(
    scenario: NetworkScenario, config: OptimizerConfig, objective: _BatchObjective
) -> list[tuple[float, np.ndarray, np.ndarray]]:
    """Greedy slot-by-slot grid placement; returns ranked (value, xy, powers) starts."""
    k = len(scenario.uavs)
    grid_xy, grid_p = _cell_table(scenario, config.coarse_grid_step_m, config.power_step_db)
    levels = _power_levels(scenario.max_tx_power_dbm, config.power_step_db)
    xy = np.zeros((k, 2))
    powers = np.full(k, -np.inf)
    starts: list[tuple[float, np.ndarray, np.ndarray]] = []
    for slot in range(k):
        anchors = _anchor_points(scenario, slot)
        cell_xy = np.concatenate([grid_xy, np.repeat(anchors, len(levels), axis=0)])
        cell_p = np.concatenate([grid_p, np.tile(levels, len(anchors))])
        m = len(cell_p)
        cand_xy = np.repeat(xy[None], m, axis=0)
        cand_p = np.repeat(powers[None], m, axis=0)
        cand_xy[:, slot] = cell_xy
        cand_p[:, slot] = cell_p
        values = objective(cand_xy, cand_p)
        order = np.argsort(-values, kind="stable")
        best = order[0]
        xy, powers = cand_xy[best].copy(), cand_p[best].copy()
        if slot == k - 1:
            seen = set()
            for idx in order:
                key = tuple(np.round(cand_xy[idx, slot], 6))
                if key in seen:
                    continue
                seen.add(key)
                starts.append((float(values[idx]), cand_xy[idx].copy(), cand_p[idx].copy()))
                if len(starts) == config.n_starts:
                    break
    return starts


def _pattern_search(
    scenario: NetworkScenario,
    config: OptimizerConfig,
    objective: _BatchObjective,
    xy: np.ndarray,
    powers: np.ndarray,
    value: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    w, h = scenario.area_m
    pmax = scenario.max_tx_power_dbm
    k = xy.shape[0]
    step = config.local_step_init_m
    pstep = config.power_step_db
    for _ in range(config.local_search_iters):
        if step < 1.0:
            break
        cand_xy = np.repeat(xy[None], 6 * k, axis=0)
        cand_p = np.repeat(powers[None], 6 * k, axis=0)
        for j in range(k):
            base = 6 * j
            cand_xy[base + 0, j, 0] = min(xy[j, 0] + step, w)
            cand_xy[base + 1, j, 0] = max(xy[j, 0] - step, 0.0)
            cand_xy[base + 2, j, 1] = min(xy[j, 1] + step, h)
            cand_xy[base + 3, j, 1] = max(xy[j, 1] - step, 0.0)
            cand_p[base + 4, j] = min(powers[j] + pstep, pmax)
            cand_p[base + 5, j] = max(powers[j] - pstep, 0.0)
        values = objective(cand_xy, cand_p)
        best = int(np.argmax(values))
        if values[best] > value + 1e-12:
            value = float(values[best])
            xy, powers = cand_xy[best].copy(), cand_p[best].copy()
        else:
            step /= 2.0
            pstep /= 2.0
    return value, xy, powers


def search_deployment(scenario: NetworkScenario, config: OptimizerConfig = OptimizerConfig()) -> SearchResult:
    """Grid + pattern search, returning the decision with phase diagnostics."""
    objective = _BatchObjective(scenario)
    starts = _grid_phase(scenario, config, objective)
    grid_value = starts[0][0]

    base = centroid_baseline(scenario)
    base_xy = np.array([[p.x, p.y] for p in base.uav_positions])
    base_p = np.array(base.tx_powers_dbm)
    base_value = float(objective(base_xy[None], base_p[None])[0])
    starts.append((base_value, base_xy, base_p))

    best_value, best_xy, best_p = -math.inf, None, None
    for value, xy, powers in starts:
        v, x, p = _pattern_search(scenario, config, objective, xy, powers, value)
        if v > best_value + 1e-12:
            best_value, best_xy, best_p = v, x, p

    decision = _decision(scenario, best_xy, best_p)
    return SearchResult(decision, wireless_objective(scenario, decision), grid_value, objective.count)


def optimize_deployment(scenario: NetworkScenario, config: OptimizerConfig = OptimizerConfig()) -> DeploymentDecision:
    return search_deployment(scenario, config).decision


def oracle_size(scenario: NetworkScenario, grid_step_m: float, power_step_db: float) -> int:
    w, h = scenario.area_m
    per_uav = (
        len(_axis(w, grid_step_m)) * len(_axis(h, grid_step_m))
        * len(_power_levels(scenario.max_tx_power_dbm, power_step_db))
    )
    return per_uav ** len(scenario.uavs)


def brute_force_oracle(
    scenario: NetworkScenario,
    grid_step_m: float = 25.0,
    power_step_db: float = 1.0,
    *,
    limit: int = ORACLE_LIMIT,
) -> OracleResult:
    """Exhaustive argmax over every (cell, power) combination of every UAV.

    Enumeration is row-major over cells with power ascending inside a cell, the
    first UAV varying slowest.  The first maximum found wins ties.
    """
    if not (grid_step_m > 0 and power_step_db > 0):
        raise DomainError("oracle steps must be positive")
    size = oracle_size(scenario, grid_step_m, power_step_db)
    if size > limit:
        raise GridTooLarge(size, limit)

    cell_xy, cell_p = _cell_table(scenario, grid_step_m, power_step_db)
    m = len(cell_p)
    k = len(scenario.uavs)
    objective = _BatchObjective(scenario)

    best_value, best_index = -math.inf, -1
    for start in range(0, size, _BATCH):
        idx = np.arange(start, min(start + _BATCH, size), dtype=np.int64)
        # mixed-radix digits, most significant = UAV 0
        digits = np.empty((len(idx), k), dtype=np.int64)
        rem = idx.copy()
        for j in range(k - 1, -1, -1):
            digits[:, j] = rem % m
            rem //= m
        values = objective(cell_xy[digits], cell_p[digits])
        i = int(np.argmax(values))
        if values[i] > best_value:
            best_value, best_index = float(values[i]), int(idx[i])

    digits = []
    rem = best_index
    for _ in range(k):
        digits.append(rem % m)
        rem //= m
    digits.reverse()
    decision = _decision(scenario, cell_xy[digits], cell_p[digits])
    return OracleResult(decision, wireless_objective(scenario, decision), size)


def coverage_first_placement(
    scenario: NetworkScenario, config: OptimizerConfig = OptimizerConfig(), *, anchors: bool = True
) -> DeploymentDecision:
    """Full-power placement that maximizes the coverage ratio alone.

    Candidates are the coarse grid cells, plus the geometric anchors when
    ``anchors`` is set, slot by slot; the first candidate reaching the best coverage wins.  Rate is ignored,
    which is what separates this from :func:`optimize_deployment`.
    """
    k = len(scenario.uavs)
    users_xy = np.array([[u.position.x, u.position.y] for u in scenario.users])
    ranges = np.array([a.comm_range_m for a in scenario.uavs])
    w, h = scenario.area_m
    grid = np.stack(np.meshgrid(_axis(w, config.coarse_grid_step_m), _axis(h, config.coarse_grid_step_m),
                                indexing="xy"), axis=2).reshape(-1, 2)
    xy = np.zeros((k, 2))
    powers = np.full(k, -np.inf)
    for slot in range(k):
        cells = np.concatenate([grid, _anchor_points(scenario, slot)]) if anchors else grid
        cand_xy = np.repeat(xy[None], len(cells), axis=0)
        cand_p = np.repeat(powers[None], len(cells), axis=0)
        cand_xy[:, slot] = cells
        cand_p[:, slot] = scenario.max_tx_power_dbm
        xyz = np.concatenate([cand_xy, np.full((len(cells), k, 1), scenario.altitude_m)], axis=2)
        cov, _ = evaluate_batch(users_xy, xyz, cand_p, ranges, scenario.channel)
        best = int(np.argmax(cov))
        xy, powers = cand_xy[best].copy(), cand_p[best].copy()
    return _decision(scenario, xy, powers)
