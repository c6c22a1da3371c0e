"""Scenario builders.

Scenarios are plain dicts ready for scenario.load_scenario. All randomness
lives here, at generation time, seeded; the engine itself never draws a
random number.
"""
from __future__ import annotations

import math

import numpy as np

CHAIR_FOOTPRINT = [[-0.25, -0.25], [0.25, -0.25], [0.25, 0.25], [-0.25, 0.25]]
TABLE_FOOTPRINT = [[-0.35, -0.35], [0.35, -0.35], [0.35, 0.35], [-0.35, 0.35]]

CHAIR_SPEC = {
    "id": "chair",
    "kind": "chair",
    "footprint": CHAIR_FOOTPRINT,
    "underside_height": 0.40,
    "weight": 5.5,
    "entry": [0.0, -0.56, math.pi / 2],
    "exit": None,
    "touch_height": 0.45,
}

TABLE_SPEC = {
    "id": "table",
    "kind": "table",
    "footprint": TABLE_FOOTPRINT,
    "underside_height": 0.68,
    "weight": 11.2,
    "entry": [0.0, -0.70, math.pi / 2],
    "exit": None,
    "touch_height": 0.70,
}


def evaluation_scenario() -> dict:
    """Four virtual chairs in a square, two physical proxies, a user cycling seats.

    The user sits 90 s per seat; while seated, the next seat in the cycle is
    their announced destination, so its proxy must be staged before they
    stand up and walk over. Eight seat changes exercise every steal pattern.
    """
    seats = {
        "vchair_a": (2.0, 2.0),
        "vchair_b": (5.0, 2.0),
        "vchair_c": (5.0, 5.0),
        "vchair_d": (2.0, 5.0),
    }
    cycle = ["vchair_a", "vchair_b", "vchair_c", "vchair_d"]
    script = []
    for i in range(1, 9):
        seat = seats[cycle[i % 4]]
        script.append({"goto": [seat[0], seat[1]], "speed": 1.0, "dwell": 90.0})

    return {
        "name": "evaluation",
        "seed": 7,
        "play_area": {"width": 7.0, "depth": 7.0, "margin": 1.5},
        "robots": [
            {"id": "p1", "x": -0.75, "y": 2.0, "heading": 0.0, "home": [-0.75, 2.0]},
            {"id": "p2", "x": -0.75, "y": 5.0, "heading": 0.0, "home": [-0.75, 5.0]},
        ],
        "furniture_specs": [CHAIR_SPEC],
        "furniture": [
            {"id": "chair_1", "spec": "chair", "x": 2.0, "y": 2.0, "heading": 0.0},
            {"id": "chair_2", "spec": "chair", "x": 5.0, "y": 2.0, "heading": 0.0},
        ],
        "virtual_scene": {
            "origin": [0.0, 0.0, 0.0],
            "objects": [
                {"id": vid, "kind": "chair", "pose": [x, y, 0.0], "size": [0.5, 0.5, 0.9]}
                for vid, (x, y) in sorted(seats.items())
            ],
        },
        "user": {
            "x": 2.0,
            "y": 2.0,
            "heading": 0.0,
            "mode": "seated",
            "script": [{"goto": [2.0, 2.0], "speed": 1.0, "dwell": 90.0}] + script,
        },
    }


def corridor_scenario() -> dict:
    """A long virtual corridor sampled through a 10 m room; built for teleport jumps.

    The user stands at the room center. Two corridor props sit within reach;
    five more line the corridor out past the walkable area. A teleport that
    advances the user 5 m down the corridor swaps the demanded props in one
    control tick; the spare proxy pool covers the new spots and anything left
    over must head for the parking band.
    """
    props = []
    for i in range(7):
        x = 3.6 + 1.4 * i  # every 1.4 m down the corridor
        y = 5.0 if i % 2 == 0 else 5.9
        props.append(
            {"id": f"vprop_{i}", "kind": "chair", "pose": [x, y, 0.0], "size": [0.5, 0.5, 0.9]}
        )

    return {
        "name": "corridor",
        "seed": 11,
        "play_area": {"width": 10.0, "depth": 10.0, "margin": 1.5},
        "robots": [
            {"id": "p1", "x": -0.75, "y": 3.0, "heading": 0.0, "home": [-0.75, 3.0]},
            {"id": "p2", "x": -0.75, "y": 7.0, "heading": 0.0, "home": [-0.75, 7.0]},
            {"id": "p3", "x": 10.75, "y": 5.0, "heading": math.pi, "home": [10.75, 5.0]},
        ],
        "furniture_specs": [CHAIR_SPEC],
        "furniture": [
            {"id": "chair_1", "spec": "chair", "x": 3.6, "y": 5.0, "heading": 0.0},
            {"id": "chair_2", "spec": "chair", "x": 5.0, "y": 5.9, "heading": 0.0},
            {"id": "chair_3", "spec": "chair", "x": 8.6, "y": 0.75, "heading": 0.0},
        ],
        "virtual_scene": {"origin": [0.0, 0.0, 0.0], "objects": props},
        "user": {"x": 5.0, "y": 5.0, "heading": 0.0, "mode": "idle", "script": []},
    }


def safety_scenario(seed: int) -> dict:
    """Randomized stress layout: nine patrolling robots, scattered furniture, a walking user.

    All sampling happens here with a seeded generator. User dwell points stay
    clear of furniture and robot patrol waypoints stay clear of the user's
    dwell points, so sustained conflicts only arise in transit, which is the
    avoidance planner's job to survive.
    """
    rng = np.random.RandomState(seed)
    w = d = 10.0
    pad = 0.8

    def sample_point(clear_of, min_gap, tries=200):
        for _ in range(tries):
            p = (pad + rng.random_sample() * (w - 2 * pad), pad + rng.random_sample() * (d - 2 * pad))
            if all(math.dist(p, q) >= min_gap for q in clear_of):
                return p
        raise RuntimeError(f"seed {seed}: could not place a point with gap {min_gap}")

    # furniture: 7..10 static pieces
    n_furn = 7 + int(rng.randint(0, 4))
    furn_pts: list[tuple[float, float]] = []
    furniture = []
    for i in range(n_furn):
        p = sample_point(furn_pts, 2.0)
        furn_pts.append(p)
        spec = "chair" if rng.random_sample() < 0.6 else "table"
        furniture.append(
            {
                "id": f"f{i}",
                "spec": spec,
                "x": round(p[0], 3),
                "y": round(p[1], 3),
                "heading": round(float(rng.random_sample() * 2 * math.pi - math.pi), 3),
            }
        )

    # user: start plus 6..9 dwell waypoints, each clear of furniture
    user_pts: list[tuple[float, float]] = [sample_point(furn_pts, 1.6)]
    n_legs = 6 + int(rng.randint(0, 4))
    script = []
    for _ in range(n_legs):
        p = sample_point(furn_pts + user_pts[-1:], 1.6)
        user_pts.append(p)
        script.append(
            {
                "goto": [round(p[0], 3), round(p[1], 3)],
                "speed": round(0.8 + 0.4 * float(rng.random_sample()), 3),
                "dwell": round(1.0 + 2.0 * float(rng.random_sample()), 3),
            }
        )

    # robots: nine starts and patrol loops clear of furniture and user dwell points
    robot_starts: list[tuple[float, float]] = []
    robots = []
    for i in range(9):
        start = sample_point(furn_pts + user_pts + robot_starts, 1.2)
        robot_starts.append(start)
        patrol = []
        prev = [start]
        for _ in range(3):
            wp = sample_point(furn_pts + user_pts + prev, 1.2)
            prev.append(wp)
            patrol.append([round(wp[0], 3), round(wp[1], 3)])
        robots.append(
            {
                "id": f"r{i}",
                "x": round(start[0], 3),
                "y": round(start[1], 3),
                "heading": round(float(rng.random_sample() * 2 * math.pi - math.pi), 3),
                "patrol": patrol,
            }
        )

    return {
        "name": f"safety_{seed}",
        "seed": seed,
        "play_area": {"width": w, "depth": d, "margin": 1.5},
        "robots": robots,
        "furniture_specs": [CHAIR_SPEC, TABLE_SPEC],
        "furniture": furniture,
        "virtual_scene": {"origin": [0.0, 0.0, 0.0], "objects": []},
        "user": {
            "x": round(user_pts[0][0], 3),
            "y": round(user_pts[0][1], 3),
            "heading": 0.0,
            "mode": "walking",
            "script": script,
        },
    }


def solo_scenario(
    robot_xy: tuple[float, float] = (1.0, 1.0),
    heading: float = 0.0,
    size: float = 12.0,
) -> dict:
    """Minimal one-robot world for controller and integration tests."""
    return {
        "name": "solo",
        "play_area": {"width": size, "depth": size, "margin": 1.5},
        "robots": [{"id": "r0", "x": robot_xy[0], "y": robot_xy[1], "heading": heading}],
        "furniture_specs": [],
        "furniture": [],
        "virtual_scene": {"origin": [0.0, 0.0, 0.0], "objects": []},
        "user": {"x": size - 1.0, "y": size - 1.0, "heading": 0.0, "mode": "idle", "script": []},
    }
