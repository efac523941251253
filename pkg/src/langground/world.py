"""Cleanup-World gridworld simulator with a three-level abstraction hierarchy.

The environment is a rectangular grid partitioned into colored rooms joined
by open doors.  A mobile agent moves with four cardinal primitives and can
push blocks Sokoban-style (one block at a time, never chained).  On top of
the primitive level (L0, exact cells) sit two abstract state spaces: L1
collapses positions to regions (rooms and doors) and L2 removes doors,
leaving rooms only.  Axes are fixed as north = +y with the origin at the
bottom-left corner.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

Cell = tuple[int, int]

ACTIONS: tuple[str, ...] = ("north", "south", "east", "west")
DELTAS: dict[str, Cell] = {
    "north": (0, 1),
    "south": (0, -1),
    "east": (1, 0),
    "west": (-1, 0),
}

LEVELS = (0, 1, 2)


class InvalidEnvError(ValueError):
    """Environment violates a structural invariant."""


class InvalidStateError(ValueError):
    """An entity sits on a cell with no region at the requested level."""


class UnknownObjectError(KeyError):
    """A propositional function references an object id not in the scene."""


@dataclass(frozen=True)
class Room:
    id: str
    color: str
    cells: frozenset[Cell]


@dataclass(frozen=True)
class Door:
    id: str
    cells: frozenset[Cell]


@dataclass(frozen=True)
class Block:
    id: str
    color: str
    position: Cell


@dataclass(frozen=True)
class GridEnv:
    """Full scene: static geometry plus the current agent/block placement.

    Instances are immutable; :func:`step_l0` returns a new scene sharing the
    geometry.  Geometry caches are derived only from static fields, so they
    stay valid across steps taken with :func:`step_state`.
    """

    width: int
    height: int
    walls: frozenset[Cell]
    rooms: tuple[Room, ...]
    doors: tuple[Door, ...]
    blocks: tuple[Block, ...]
    agent_position: Cell

    # -- derived geometry (static fields only) --

    @cached_property
    def region_by_cell(self) -> dict[Cell, str]:
        mapping: dict[Cell, str] = {}
        for room in self.rooms:
            for cell in room.cells:
                mapping[cell] = room.id
        for door in self.doors:
            for cell in door.cells:
                mapping[cell] = door.id
        return mapping

    @cached_property
    def room_by_id(self) -> dict[str, Room]:
        return {room.id: room for room in self.rooms}

    @cached_property
    def door_by_id(self) -> dict[str, Door]:
        return {door.id: door for door in self.doors}

    @cached_property
    def free_cells(self) -> frozenset[Cell]:
        return frozenset(
            (x, y)
            for x in range(self.width)
            for y in range(self.height)
            if (x, y) not in self.walls
        )

    @cached_property
    def door_rooms(self) -> dict[str, tuple[str, ...]]:
        """Door id -> ids of the (exactly two) rooms its cells touch, sorted."""
        out: dict[str, tuple[str, ...]] = {}
        for door in self.doors:
            seen: set[str] = set()
            for cell in door.cells:
                for delta in DELTAS.values():
                    nbr = (cell[0] + delta[0], cell[1] + delta[1])
                    room_id = self.region_by_cell.get(nbr)
                    if room_id is not None and room_id in self.room_by_id:
                        seen.add(room_id)
            out[door.id] = tuple(sorted(seen))
        return out

    @cached_property
    def region_adjacency(self) -> dict[str, tuple[str, ...]]:
        """L1 region graph: each door touches its two rooms and vice versa."""
        adj: dict[str, set[str]] = {r.id: set() for r in self.rooms}
        for door in self.doors:
            adj[door.id] = set(self.door_rooms[door.id])
            for room_id in self.door_rooms[door.id]:
                adj[room_id].add(door.id)
        return {rid: tuple(sorted(nbrs)) for rid, nbrs in adj.items()}

    @cached_property
    def room_adjacency(self) -> dict[str, tuple[str, ...]]:
        """L2 room graph: two rooms are adjacent iff some door joins them."""
        adj: dict[str, set[str]] = {r.id: set() for r in self.rooms}
        for door in self.doors:
            touched = self.door_rooms[door.id]
            for a in touched:
                for b in touched:
                    if a != b:
                        adj[a].add(b)
        return {rid: tuple(sorted(nbrs)) for rid, nbrs in adj.items()}

    @cached_property
    def block_ids(self) -> tuple[str, ...]:
        return tuple(b.id for b in self.blocks)

    @cached_property
    def colors(self) -> tuple[str, ...]:
        return tuple(sorted({room.color for room in self.rooms}))

    def room_of_cell(self, cell: Cell) -> str:
        """L2 projection of a cell: door cells map to the lowest-id adjacent room."""
        region = self.region_by_cell.get(cell)
        if region is None:
            raise InvalidStateError(f"cell {cell} has no region")
        if region in self.room_by_id:
            return region
        return self.door_rooms[region][0]

    def validate(self) -> None:
        taken: set[Cell] = set()
        for room in self.rooms:
            if taken & room.cells:
                raise InvalidEnvError(f"room {room.id} overlaps another region")
            taken |= room.cells
        for door in self.doors:
            if taken & door.cells:
                raise InvalidEnvError(f"door {door.id} overlaps another region")
            taken |= door.cells
            if len(self.door_rooms[door.id]) != 2:
                raise InvalidEnvError(
                    f"door {door.id} must touch exactly two rooms, "
                    f"touches {self.door_rooms[door.id]}"
                )
        if taken != set(self.free_cells):
            missing = set(self.free_cells) - taken
            extra = taken - set(self.free_cells)
            raise InvalidEnvError(
                f"regions must tile the free cells (uncovered={sorted(missing)[:4]}, "
                f"on-walls={sorted(extra)[:4]})"
            )
        occupied = [self.agent_position] + [b.position for b in self.blocks]
        if len(set(occupied)) != len(occupied):
            raise InvalidEnvError("agent and blocks must occupy distinct cells")
        for cell in occupied:
            if not self.in_bounds(cell) or cell in self.walls:
                raise InvalidEnvError(f"entity on wall or out of bounds at {cell}")

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and cell not in self.walls

    def to_l0(self) -> "L0State":
        return L0State(self.agent_position, tuple(b.position for b in self.blocks))

    def with_state(self, state: "L0State") -> "GridEnv":
        blocks = tuple(
            replace(b, position=pos) for b, pos in zip(self.blocks, state.blocks)
        )
        return replace(self, agent_position=state.agent, blocks=blocks)


class L0State(NamedTuple):
    """Exact positions; blocks ordered as in ``GridEnv.blocks``."""

    agent: Cell
    blocks: tuple[Cell, ...]


class L1State(NamedTuple):
    """Region (room or door) occupancy."""

    agent_region: str
    block_regions: tuple[str, ...]


class L2State(NamedTuple):
    """Room occupancy; door cells collapse to their lowest-id adjacent room."""

    agent_room: str
    block_rooms: tuple[str, ...]


class Subtask(NamedTuple):
    """Abstract action: move the agent or one block into an adjacent region."""

    kind: str  # "move_agent" | "move_block"
    block_id: str | None
    target: str  # region id (L1) or room id (L2)


# ---------------------------------------------------------------------------
# Primitive dynamics
# ---------------------------------------------------------------------------


def step_state(env: GridEnv, state: L0State, action: str) -> L0State:
    """Apply one cardinal primitive to an L0 state under ``env`` geometry.

    Moving into a block pushes it one cell if the cell beyond is free and
    unoccupied; pushes into walls or into another block are no-ops, as are
    moves into walls.  Total and deterministic.
    """
    delta = DELTAS[action]
    dest = (state.agent[0] + delta[0], state.agent[1] + delta[1])
    if not env.is_free(dest):
        return state
    if dest in state.blocks:
        beyond = (dest[0] + delta[0], dest[1] + delta[1])
        if not env.is_free(beyond) or beyond in state.blocks:
            return state
        idx = state.blocks.index(dest)
        new_blocks = state.blocks[:idx] + (beyond,) + state.blocks[idx + 1 :]
        return L0State(dest, new_blocks)
    return L0State(dest, state.blocks)


def step_l0(env: GridEnv, action: str) -> GridEnv:
    """Primitive step on the full scene (see :func:`step_state`)."""
    if action not in DELTAS:
        raise ValueError(f"unknown action {action!r}")
    return env.with_state(step_state(env, env.to_l0(), action))


# ---------------------------------------------------------------------------
# Projections
# ---------------------------------------------------------------------------


def project(env: GridEnv, level: int, state: L0State | None = None):
    """Project the scene (or an explicit L0 state) to the requested level."""
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}, got {level}")
    if state is None:
        state = env.to_l0()
    if level == 0:
        return state
    if level == 1:
        region = env.region_by_cell.get(state.agent)
        if region is None:
            raise InvalidStateError(f"agent cell {state.agent} has no region")
        block_regions = []
        for pos in state.blocks:
            r = env.region_by_cell.get(pos)
            if r is None:
                raise InvalidStateError(f"block cell {pos} has no region")
            block_regions.append(r)
        return L1State(region, tuple(block_regions))
    return L2State(
        env.room_of_cell(state.agent),
        tuple(env.room_of_cell(pos) for pos in state.blocks),
    )


# ---------------------------------------------------------------------------
# Abstract actions and their model dynamics
# ---------------------------------------------------------------------------


def abstract_actions(env: GridEnv, level: int, state) -> tuple[Subtask, ...]:
    """Subtasks available in an abstract state.

    Movers (agent, each block) may transition only to regions adjacent to
    the region they currently occupy; at L2 the graph contains rooms only.
    """
    if level == 1:
        adjacency = env.region_adjacency
        agent_at, blocks_at = state.agent_region, state.block_regions
    elif level == 2:
        adjacency = env.room_adjacency
        agent_at, blocks_at = state.agent_room, state.block_rooms
    else:
        raise ValueError("abstract actions exist only at levels 1 and 2")
    subtasks = [Subtask("move_agent", None, g) for g in adjacency[agent_at]]
    for block_id, region in zip(env.block_ids, blocks_at):
        subtasks.extend(
            Subtask("move_block", block_id, g) for g in adjacency[region]
        )
    return tuple(subtasks)


def abstract_step(env: GridEnv, level: int, state, subtask: Subtask):
    """Deterministic postcondition-only abstract model: the mover lands in
    the target region and nothing else changes.

    Pushing really drags the agent along behind the block; leaving that out
    of the model keeps it from "solving" agent-positioning goals with block
    pushes, at the cost of the agent's modeled region going stale until its
    next own move (harmless: each subtask replans from the true state).
    """
    if subtask.kind == "move_agent":
        if level == 1:
            return L1State(subtask.target, state.block_regions)
        return L2State(subtask.target, state.block_rooms)
    idx = env.block_ids.index(subtask.block_id)
    if level == 1:
        regions = list(state.block_regions)
        regions[idx] = subtask.target
        return L1State(state.agent_region, tuple(regions))
    rooms = list(state.block_rooms)
    rooms[idx] = subtask.target
    return L2State(state.agent_room, tuple(rooms))


# ---------------------------------------------------------------------------
# Propositional functions
# ---------------------------------------------------------------------------

GO_PREDICATES = ("goNorth", "goSouth", "goEast", "goWest")
GO_DIRECTION = {
    "goNorth": "north",
    "goSouth": "south",
    "goEast": "east",
    "goWest": "west",
}


@dataclass(frozen=True)
class PropositionalFunction:
    """Boolean predicate over a state, used as a termination condition.

    ``goal_cell`` is set only for the four go* predicates: the episode start
    cell displaced once in the matching direction.
    """

    name: str
    args: tuple[str, ...]
    level: int
    goal_cell: Cell | None = None


def _entity_position(env: GridEnv, state: L0State, object_id: str) -> Cell:
    if object_id == "agent0":
        return state.agent
    if object_id in env.block_ids:
        return state.blocks[env.block_ids.index(object_id)]
    raise UnknownObjectError(object_id)


def _entity_region(env: GridEnv, state, object_id: str) -> str:
    if isinstance(state, L1State):
        if object_id == "agent0":
            return state.agent_region
        blocks = state.block_regions
    else:
        if object_id == "agent0":
            return state.agent_room
        blocks = state.block_rooms
    if object_id not in env.block_ids:
        raise UnknownObjectError(object_id)
    return blocks[env.block_ids.index(object_id)]


def eval_prop(env: GridEnv, prop: PropositionalFunction, state) -> bool:
    """Evaluate a grounded predicate on a state of the matching level."""
    if prop.name in GO_PREDICATES:
        if prop.goal_cell is None:
            raise ValueError(f"{prop.name} requires a goal cell")
        return state.agent == prop.goal_cell
    entity, target = prop.args
    if prop.level == 0:
        pos = _entity_position(env, state, entity)
        if target in env.room_by_id:
            return pos in env.room_by_id[target].cells
        if target in env.door_by_id:
            return pos in env.door_by_id[target].cells
        raise UnknownObjectError(target)
    if target not in env.room_by_id and target not in env.door_by_id:
        raise UnknownObjectError(target)
    return _entity_region(env, state, entity) == target


# ---------------------------------------------------------------------------
# Environment JSON I/O and bundled layouts
# ---------------------------------------------------------------------------


def env_to_dict(env: GridEnv) -> dict:
    return {
        "width": env.width,
        "height": env.height,
        "walls": sorted(list(c) for c in env.walls),
        "rooms": [
            {"id": r.id, "color": r.color, "cells": sorted(list(c) for c in r.cells)}
            for r in env.rooms
        ],
        "doors": [
            {"id": d.id, "cells": sorted(list(c) for c in d.cells)}
            for d in env.doors
        ],
        "blocks": [
            {"id": b.id, "color": b.color, "pos": list(b.position)}
            for b in env.blocks
        ],
        "agent": list(env.agent_position),
    }


def env_from_dict(data: dict) -> GridEnv:
    env = GridEnv(
        width=int(data["width"]),
        height=int(data["height"]),
        walls=frozenset(tuple(c) for c in data["walls"]),
        rooms=tuple(
            Room(r["id"], r["color"], frozenset(tuple(c) for c in r["cells"]))
            for r in data["rooms"]
        ),
        doors=tuple(
            Door(d["id"], frozenset(tuple(c) for c in d["cells"]))
            for d in data["doors"]
        ),
        blocks=tuple(
            Block(b["id"], b["color"], tuple(b["pos"])) for b in data["blocks"]
        ),
        agent_position=tuple(data["agent"]),
    )
    env.validate()
    return env


def save_env(env: GridEnv, path: str | Path) -> None:
    Path(path).write_text(json.dumps(env_to_dict(env), indent=1) + "\n")


def load_env(path: str | Path) -> GridEnv:
    return env_from_dict(json.loads(Path(path).read_text()))


def _border_walls(width: int, height: int) -> set[Cell]:
    walls = set()
    for x in range(width):
        walls.add((x, 0))
        walls.add((x, height - 1))
    for y in range(height):
        walls.add((0, y))
        walls.add((width - 1, y))
    return walls


def _rect(x0: int, y0: int, x1: int, y1: int) -> frozenset[Cell]:
    return frozenset(
        (x, y) for x in range(x0, x1 + 1) for y in range(y0, y1 + 1)
    )


def make_small_env() -> GridEnv:
    """Two rooms joined by one door on a 10x9 grid (oracle-test scale)."""
    width, height = 10, 9
    walls = _border_walls(width, height)
    door_cells = {(4, 4)}
    for y in range(1, height - 1):
        if (4, y) not in door_cells:
            walls.add((4, y))
    env = GridEnv(
        width=width,
        height=height,
        walls=frozenset(walls),
        rooms=(
            Room("room0", "red", _rect(1, 1, 3, 7)),
            Room("room1", "green", _rect(5, 1, 8, 7)),
        ),
        doors=(Door("door0", frozenset(door_cells)),),
        blocks=(Block("block0", "orange", (2, 4)),),
        agent_position=(2, 2),
    )
    env.validate()
    return env


def _ring_env(scale: int, agent: Cell, block: Cell) -> GridEnv:
    """Four rooms in a ring: red and blue on top, green and yellow below.

    Doors join red-blue, red-green, blue-yellow, and green-yellow, so
    diagonally opposite rooms are two hops apart and route choice matters.
    ``scale=1`` yields about 2^14 (agent, block) states, ``scale=2`` about
    2^18, matching the bundled "regular" and "large" instances.
    """
    width = height = 15 if scale == 1 else 26
    mid = width // 2
    hi = height - 2
    q1 = (1 + mid) // 2  # door offset in the lower/left half
    q3 = (mid + width - 1) // 2  # and in the upper/right half
    doors = {
        "door0": (mid, q3),  # red <-> blue
        "door1": (q1, mid),  # red <-> green
        "door2": (q3, mid),  # blue <-> yellow
        "door3": (mid, q1),  # green <-> yellow
    }
    door_cells = set(doors.values())
    walls = _border_walls(width, height)
    for x in range(1, width - 1):
        if (x, mid) not in door_cells:
            walls.add((x, mid))
    for y in range(1, height - 1):
        if (mid, y) not in door_cells:
            walls.add((mid, y))
    env = GridEnv(
        width=width,
        height=height,
        walls=frozenset(walls),
        rooms=(
            Room("room0", "red", _rect(1, mid + 1, mid - 1, hi)),
            Room("room1", "blue", _rect(mid + 1, mid + 1, width - 2, hi)),
            Room("room2", "green", _rect(1, 1, mid - 1, mid - 1)),
            Room("room3", "yellow", _rect(mid + 1, 1, width - 2, mid - 1)),
        ),
        doors=tuple(
            Door(name, frozenset({cell})) for name, cell in sorted(doors.items())
        ),
        blocks=(Block("block0", "orange", block),),
        agent_position=agent,
    )
    env.validate()
    return env


def make_regular_env() -> GridEnv:
    return _ring_env(1, agent=(3, 11), block=(11, 11))


def make_large_env() -> GridEnv:
    return _ring_env(2, agent=(4, 20), block=(21, 21))


_BUILDERS = {
    "small": make_small_env,
    "regular": make_regular_env,
    "large": make_large_env,
}


def bundled_env_path(name: str) -> Path:
    return Path(__file__).parent / "data" / "envs" / f"{name}.json"


def resolve_env(spec: str) -> GridEnv:
    """Load an environment by bundled name (small/regular/large) or file path."""
    if spec in _BUILDERS:
        path = bundled_env_path(spec)
        if path.exists():
            return load_env(path)
        return _BUILDERS[spec]()
    return load_env(spec)
