"""Optimal robot-to-task matching.

Costs are straight-line distances. The solver is a Jonker-Volgenant style
shortest-augmenting-path Hungarian over (cost, tiebreak) pairs: the secondary
component encodes column choices positionally per row, so a single solve
returns, among all minimum-cost matchings, the one that is lexicographically
smallest by (robot, task) order. Rectangular problems are padded square with a
large finite dummy cost and dummy pairs are stripped from the result.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .world import LOCKED_PHASES, Phase, World

_ZERO = (0.0, 0)
_INF = (math.inf, 0)


@dataclass(frozen=True)
class AssignmentProblem:
    robot_ids: tuple[str, ...]
    task_ids: tuple[str, ...]
    cost: tuple[tuple[float, ...], ...]  # rows follow robot_ids, columns follow task_ids

    def __post_init__(self):
        if len(self.cost) != len(self.robot_ids):
            raise ValueError("cost row count must match robot count")
        for row in self.cost:
            if len(row) != len(self.task_ids):
                raise ValueError("cost column count must match task count")
            for c in row:
                if not math.isfinite(c) or c < 0.0:
                    raise ValueError(f"costs must be finite and non-negative, got {c!r}")


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[str, str], ...]  # (robot_id, task_id), in robot row order
    total_cost: float
    unassigned_robots: tuple[str, ...]
    unassigned_tasks: tuple[str, ...]


def _solve_square(a: list[list[tuple[float, int]]]) -> list[int]:
    """Match rows to columns of a square tuple-cost matrix; returns col index per row."""
    n = len(a)
    u = [_ZERO] * (n + 1)
    v = [_ZERO] * (n + 1)
    p = [0] * (n + 1)  # p[j]: 1-based row matched to column j; column 0 is the staging slot
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [_INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = _INF
            j1 = -1
            ui = u[i0]
            row = a[i0 - 1]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cj = row[j - 1]
                vj = v[j]
                cur = (cj[0] - ui[0] - vj[0], cj[1] - ui[1] - vj[1])
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    pj = p[j]
                    u[pj] = (u[pj][0] + delta[0], u[pj][1] + delta[1])
                    v[j] = (v[j][0] - delta[0], v[j][1] - delta[1])
                else:
                    minv[j] = (minv[j][0] - delta[0], minv[j][1] - delta[1])
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    match = [0] * n
    for j in range(1, n + 1):
        if p[j] > 0:
            match[p[j] - 1] = j - 1
    return match


def solve_assignment(problem: AssignmentProblem) -> Assignment:
    """Minimum-total-cost matching; lexicographically smallest among cost ties."""
    m = len(problem.robot_ids)
    n = len(problem.task_ids)
    if m == 0 or n == 0:
        return Assignment((), 0.0, tuple(problem.robot_ids), tuple(problem.task_ids))

    size = max(m, n)
    max_entry = max((c for row in problem.cost for c in row), default=0.0)
    dummy = 10.0 * max_entry if max_entry > 0.0 else 1.0
    base = size + 1

    padded: list[list[tuple[float, int]]] = []
    for i in range(size):
        weight = base ** (size - 1 - i)
        row = []
        for j in range(size):
            c = problem.cost[i][j] if i < m and j < n else dummy
            row.append((c, j * weight))
        padded.append(row)

    match = _solve_square(padded)

    pairs = []
    total = 0.0
    matched_tasks = set()
    for i in range(m):
        j = match[i]
        if j < n:
            pairs.append((problem.robot_ids[i], problem.task_ids[j]))
            matched_tasks.add(j)
            total += problem.cost[i][j]
    unassigned_robots = tuple(problem.robot_ids[i] for i in range(m) if match[i] >= n)
    unassigned_tasks = tuple(problem.task_ids[j] for j in range(n) if j not in matched_tasks)
    return Assignment(tuple(pairs), total, unassigned_robots, unassigned_tasks)


def build_distance_matrix(
    robot_positions: dict[str, tuple[float, float]],
    task_positions: dict[str, tuple[float, float]],
) -> AssignmentProblem:
    """Distance cost matrix over sorted robot and task ids."""
    robot_ids = tuple(sorted(robot_positions))
    task_ids = tuple(sorted(task_positions))
    cost = tuple(
        tuple(
            math.dist(robot_positions[r], task_positions[t])
            for t in task_ids
        )
        for r in robot_ids
    )
    return AssignmentProblem(robot_ids, task_ids, cost)


def rebalance(world: World) -> Assignment:
    """Match available robots to open move jobs.

    Robots already committed under furniture keep their jobs. A robot merely
    driving toward a pickup may be retargeted, but only when the switch saves
    more than the configured hysteresis distance; this suppresses assignment
    flapping between near-equal options.
    """
    eligible = {}
    current: dict[str, str | None] = {}
    for rid in world.robot_ids():
        r = world.robots[rid]
        if r.tracking_lost or r.phase in LOCKED_PHASES or r.phase == Phase.RETREAT:
            continue
        if r.phase not in (Phase.IDLE, Phase.NAVIGATE_TO_ENTRY):
            continue
        eligible[rid] = (r.est_pose.x, r.est_pose.y)
        current[rid] = r.job

    open_jobs = {}
    for fid in sorted(world.jobs):
        job = world.jobs[fid]
        assigned = job.robot_id
        if assigned is not None and assigned not in eligible:
            continue  # held by a committed robot
        f = world.furniture[fid]
        if f.carried_by is not None and f.carried_by != assigned:
            continue
        open_jobs[fid] = job

    if len(open_jobs) > len(eligible):
        ranked = sorted(open_jobs, key=lambda fid: (open_jobs[fid].priority, fid))
        open_jobs = {fid: open_jobs[fid] for fid in ranked[: len(eligible)]}

    if not eligible or not open_jobs:
        return Assignment((), 0.0, tuple(sorted(eligible)), tuple(sorted(open_jobs)))

    task_pos = {fid: world.furniture[fid].pose.xy for fid in open_jobs}

    def solve_with(pins: dict[str, str]) -> Assignment:
        free_robots = {r: p for r, p in eligible.items() if r not in pins}
        pinned_tasks = set(pins.values())
        free_tasks = {t: p for t, p in task_pos.items() if t not in pinned_tasks}
        if free_robots and free_tasks:
            sub = solve_assignment(build_distance_matrix(free_robots, free_tasks))
            pairs = dict(sub.pairs)
        else:
            pairs = {}
        pairs.update(pins)
        matched = set(pairs.values())
        return Assignment(
            tuple(sorted(pairs.items())),
            sum(math.dist(eligible[r], task_pos[t]) for r, t in pairs.items()),
            tuple(r for r in sorted(eligible) if r not in pairs),
            tuple(t for t in sorted(task_pos) if t not in matched),
        )

    pins: dict[str, str] = {}
    while True:
        result = solve_with(pins)
        moved = False
        for rid, tid in result.pairs:
            if rid in pins:
                continue
            old = current.get(rid)
            if old is None or old == tid or old not in task_pos or old in set(pins.values()):
                continue
            gain = math.dist(eligible[rid], task_pos[old]) - math.dist(eligible[rid], task_pos[tid])
            if gain <= world.sched_cfg.reassign_hysteresis:
                pins[rid] = old
                moved = True
                break
        if not moved:
            return result
