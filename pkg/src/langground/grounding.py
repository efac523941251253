"""Machine-language reward functions: parsing, environment binding, and the
per-level reward spaces.

The machine language is a flat token string, ``<predicate> [<object-token>]
[<constraint-token>]``.  Lifted forms name objects positionally (``agent0``,
``block0``) and constrain targets by attribute (``roomIsGreen``) or by door
index (``door0``), so the same string grounds in any environment whose
attributes match.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .world import (
    Cell,
    DELTAS,
    GO_DIRECTION,
    GO_PREDICATES,
    GridEnv,
    L1State,
    L2State,
    PropositionalFunction,
)


class ParseError(ValueError):
    """Machine string does not conform to the grammar."""


class NoMatchError(LookupError):
    """No environment object satisfies a constraint token."""


class AmbiguousError(LookupError):
    """More than one environment object satisfies a constraint token."""


_ROOM_CONSTRAINT = re.compile(r"^roomIs([A-Z][a-z]*)$")
_DOOR_CONSTRAINT = re.compile(r"^door(\d+)$")
_BLOCK_TOKEN = re.compile(r"^block(\d+)$")

# predicate -> (object-token kind, levels where it exists)
_PREDICATES = {
    "goNorth": (None, (0,)),
    "goSouth": (None, (0,)),
    "goEast": (None, (0,)),
    "goWest": (None, (0,)),
    "agentInRoom": ("agent", (0,)),
    "blockInRoom": ("block", (0,)),
    "agentInRegion": ("agent", (1, 2)),
    "blockInRegion": ("block", (1, 2)),
}


@dataclass(frozen=True, order=True)
class LiftedRewardFunction:
    """Reward-function template with environment-independent constraints."""

    level: int
    predicate: str
    object_token: str | None = None
    constraint: str | None = None

    def render(self) -> str:
        tokens = [self.predicate]
        if self.object_token is not None:
            tokens.append(self.object_token)
        if self.constraint is not None:
            tokens.append(self.constraint)
        return " ".join(tokens)


@dataclass(frozen=True)
class GroundedRewardFunction:
    """Lifted reward function bound to concrete object ids in one scene.

    ``goal_cells`` is the L0 satisfaction set: the target region's cells, or
    the single displaced cell for the go* primitives.
    """

    level: int
    predicate: str
    entity_id: str  # "agent0" or a concrete block id
    target_region: str | None  # room/door id; None for go* tasks
    goal_cells: frozenset[Cell]

    def render(self) -> str:
        tokens = [self.predicate]
        if self.predicate not in GO_PREDICATES:
            tokens.append(self.entity_id)
            tokens.append(self.target_region or "")
        return " ".join(t for t in tokens if t)

    def to_prop(self) -> PropositionalFunction:
        if self.predicate in GO_PREDICATES:
            (cell,) = self.goal_cells
            return PropositionalFunction(self.predicate, (), 0, goal_cell=cell)
        return PropositionalFunction(
            self.predicate, (self.entity_id, self.target_region), self.level
        )

    def _entity_cell(self, env: GridEnv, state) -> Cell:
        if self.entity_id == "agent0":
            return state.agent
        return state.blocks[env.block_ids.index(self.entity_id)]

    def satisfied_l0(self, env: GridEnv, state) -> bool:
        return self._entity_cell(env, state) in self.goal_cells

    def satisfied_abstract(self, env: GridEnv, state) -> bool:
        """Satisfaction on an L1/L2 state (go* tasks never reach here)."""
        if self.entity_id == "agent0":
            at = state.agent_region if isinstance(state, L1State) else state.agent_room
        else:
            idx = env.block_ids.index(self.entity_id)
            regions = (
                state.block_regions
                if isinstance(state, L1State)
                else state.block_rooms
            )
            at = regions[idx]
        if isinstance(state, L2State) and self.target_region in env.door_by_id:
            return False  # door targets are invisible at L2
        return at == self.target_region


def parse_machine_string(text: str, level: int | None = None) -> LiftedRewardFunction:
    """Parse and validate a machine string, inferring the level if omitted.

    ``agentInRegion``/``blockInRegion`` with a room constraint are valid at
    both abstract levels and default to level 2; pass ``level=1`` for the
    region-graph reading.
    """
    tokens = text.split()
    if not tokens:
        raise ParseError("empty machine string")
    predicate = tokens[0]
    if predicate not in _PREDICATES:
        raise ParseError(f"unknown predicate {predicate!r}")
    obj_kind, levels = _PREDICATES[predicate]
    if obj_kind is None:
        if len(tokens) != 1:
            raise ParseError(f"{predicate} takes no arguments")
        if level is not None and level != 0:
            raise ParseError(f"{predicate} exists only at level 0")
        return LiftedRewardFunction(0, predicate)
    if len(tokens) != 3:
        raise ParseError(
            f"{predicate} takes an object token and one constraint token"
        )
    obj = tokens[1]
    if obj_kind == "agent" and obj != "agent0":
        raise ParseError(f"{predicate} expects agent0, got {obj!r}")
    if obj_kind == "block" and not _BLOCK_TOKEN.match(obj):
        raise ParseError(f"{predicate} expects a block token, got {obj!r}")
    constraint = tokens[2]
    is_room = bool(_ROOM_CONSTRAINT.match(constraint))
    is_door = bool(_DOOR_CONSTRAINT.match(constraint))
    if not (is_room or is_door):
        raise ParseError(f"unknown constraint token {constraint!r}")
    if level is None:
        if 0 in levels:
            level = 0
        else:
            level = 1 if is_door else 2
    if level not in levels:
        raise ParseError(f"{predicate} does not exist at level {level}")
    if is_door and level != 1:
        raise ParseError("door constraints exist only at level 1")
    return LiftedRewardFunction(level, predicate, obj, constraint)


def _resolve_constraint(constraint: str, env: GridEnv) -> str:
    room_match = _ROOM_CONSTRAINT.match(constraint)
    if room_match:
        color = room_match.group(1).lower()
        hits = [room.id for room in env.rooms if room.color == color]
        if not hits:
            raise NoMatchError(f"no room with color {color!r}")
        if len(hits) > 1:
            raise AmbiguousError(f"multiple rooms with color {color!r}: {hits}")
        return hits[0]
    door_match = _DOOR_CONSTRAINT.match(constraint)
    if door_match:
        idx = int(door_match.group(1))
        ordered = sorted(d.id for d in env.doors)
        if idx >= len(ordered):
            raise NoMatchError(f"no door with index {idx}")
        return ordered[idx]
    raise ParseError(f"unknown constraint token {constraint!r}")


def _resolve_entity(token: str | None, env: GridEnv) -> str:
    if token == "agent0" or token is None:
        return "agent0"
    idx = int(_BLOCK_TOKEN.match(token).group(1))
    ordered = sorted(env.block_ids)
    if idx >= len(ordered):
        raise NoMatchError(f"no block with index {idx}")
    return ordered[idx]


def bind(lifted: LiftedRewardFunction, env: GridEnv) -> GroundedRewardFunction:
    """Resolve constraint and object tokens against one environment."""
    if lifted.predicate in GO_PREDICATES:
        delta = DELTAS[GO_DIRECTION[lifted.predicate]]
        goal = (env.agent_position[0] + delta[0], env.agent_position[1] + delta[1])
        return GroundedRewardFunction(
            0, lifted.predicate, "agent0", None, frozenset({goal})
        )
    entity = _resolve_entity(lifted.object_token, env)
    region_id = _resolve_constraint(lifted.constraint, env)
    cells = (
        env.room_by_id[region_id].cells
        if region_id in env.room_by_id
        else env.door_by_id[region_id].cells
    )
    return GroundedRewardFunction(
        lifted.level, lifted.predicate, entity, region_id, frozenset(cells)
    )


_ROOM_FORM = {"agentInRoom": "agent", "blockInRoom": "block",
              "agentInRegion": "agent", "blockInRegion": "block"}


def cross_level_equivalent(
    m: LiftedRewardFunction, target_level: int
) -> LiftedRewardFunction | None:
    """Map a reward function to its counterpart at another level.

    Room-containment tasks translate across all three levels (the predicate
    name switches between the *InRoom and *InRegion families); go* primitives
    and door-constrained targets have no counterpart elsewhere.
    """
    if target_level == m.level:
        return m
    if m.predicate in GO_PREDICATES:
        return None
    if m.constraint is not None and _DOOR_CONSTRAINT.match(m.constraint):
        return None
    kind = _ROOM_FORM[m.predicate]
    predicate = (
        f"{kind}InRoom" if target_level == 0 else f"{kind}InRegion"
    )
    return LiftedRewardFunction(target_level, predicate, m.object_token, m.constraint)


def _room_constraints(env: GridEnv) -> list[str]:
    return [f"roomIs{color.capitalize()}" for color in env.colors]


def enumerate_reward_space(env: GridEnv, level: int) -> list[LiftedRewardFunction]:
    """All lifted reward functions instantiable at a level, in sorted order."""
    rooms = _room_constraints(env)
    out: list[LiftedRewardFunction] = []
    if level == 0:
        out.extend(LiftedRewardFunction(0, name) for name in GO_PREDICATES)
        out.extend(LiftedRewardFunction(0, "agentInRoom", "agent0", c) for c in rooms)
        if env.blocks:
            out.extend(
                LiftedRewardFunction(0, "blockInRoom", "block0", c) for c in rooms
            )
    elif level == 1:
        constraints = rooms + [f"door{i}" for i in range(len(env.doors))]
        out.extend(
            LiftedRewardFunction(1, "agentInRegion", "agent0", c) for c in constraints
        )
        if env.blocks:
            out.extend(
                LiftedRewardFunction(1, "blockInRegion", "block0", c)
                for c in constraints
            )
    elif level == 2:
        out.extend(
            LiftedRewardFunction(2, "agentInRegion", "agent0", c) for c in rooms
        )
        if env.blocks:
            out.extend(
                LiftedRewardFunction(2, "blockInRegion", "block0", c) for c in rooms
            )
    else:
        raise ValueError(f"no reward space at level {level}")
    return sorted(out, key=lambda m: (m.predicate, m.constraint or ""))


def full_reward_space(env: GridEnv) -> list[LiftedRewardFunction]:
    """Every (level, reward) candidate, levels ascending."""
    out: list[LiftedRewardFunction] = []
    for level in (0, 1, 2):
        out.extend(enumerate_reward_space(env, level))
    return out
