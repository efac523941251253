"""Flat and hierarchical planners over the gridworld.

Value convention: goal reward 1 on entering a terminal state, 0 elsewhere,
and the discount applies to the entering step too, so the optimal value of a
state exactly ``d`` steps from the goal is ``gamma**d``.  Under that
convention the Manhattan-distance bound ``gamma**manhattan(s)`` is an
admissible (optimistic) upper bound on the optimal value.

Three planner entry points are exposed through :func:`plan_command`:

* ``base`` -- bounded real-time dynamic programming (BRTDP) on the flat
  primitive-level problem, regardless of the command's abstraction level;
* ``nh``   -- the top-down hierarchical planner without heuristics;
* ``amdp`` -- the hierarchical planner with the Manhattan bound seeding the
  upper values of every primitive-level subproblem.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence
import numpy as np

from .grounding import GroundedRewardFunction
from .world import (
    ACTIONS,
    GridEnv,
    L0State,
    Subtask,
    abstract_actions,
    abstract_step,
    project,
    step_l0,
    step_state,
)

DEFAULT_GAMMA = 0.99
DEFAULT_ALPHA = 1e-3
DEFAULT_TAU = 10.0
DEFAULT_VI_EPSILON = 1e-6
DEFAULT_STATE_CAP = 2_000_000
DEFAULT_MAX_TRIALS = 1_000_000

PLANNER_TOKENS = ("base", "nh", "amdp")


class CapacityExceededError(RuntimeError):
    """Enumerable state space exceeded the configured cap."""


class HeuristicUnavailableError(ValueError):
    """Manhattan bound requested for a goal it cannot cover."""


class UnreachableError(RuntimeError):
    """No terminal state is reachable from the start state."""


class ExecutionDivergedError(RuntimeError):
    """Policy execution exceeded the step cap without termination."""


@dataclass
class ValueBounds:
    """Monotone lower/upper envelopes on optimal values, per touched state."""

    lower: dict
    upper: dict

    def gap(self, state) -> float:
        return self.upper[state] - self.lower[state]


@dataclass
class TraceLeg:
    level: int
    subtask: Subtask | None  # abstract action this leg realizes (None for flat)
    goal: str  # rendered reward function solved in this leg
    actions: tuple[str, ...]
    seconds: float


@dataclass
class PlanTrace:
    legs: list[TraceLeg]
    planning_seconds: float = 0.0

    @property
    def actions(self) -> tuple[str, ...]:
        return tuple(a for leg in self.legs for a in leg.actions)


# ---------------------------------------------------------------------------
# Planning problems
# ---------------------------------------------------------------------------


@dataclass
class PlanContext:
    """Model caches scoped to one planning call.

    Successor sets, distance fields, and the abstract-model graph depend on
    geometry only, so the many subtask problems inside one hierarchical plan
    share them; separate commands deliberately do not, keeping per-command
    timing honest about model-expansion work.
    """

    successors: dict = field(default_factory=dict)
    distance_fields: dict = field(default_factory=dict)
    abstract_graph: dict = field(default_factory=dict)


def _trial_depth_cap(env: GridEnv) -> int:
    """Cap on a single BRTDP trial's walk.

    Scaled with the grid perimeter, not its area: any optimal path fits
    inside 2(W+H), while early uninformed trials would otherwise wander for
    thousands of steps before their first unwind.
    """
    return 2 * (env.width + env.height)


class L0Problem:
    """Flat primitive-level MDP for one grounded reward function."""

    def __init__(self, env: GridEnv, grounded: GroundedRewardFunction,
                 gamma: float = DEFAULT_GAMMA,
                 context: PlanContext | None = None):
        self.env = env
        self.grounded = grounded
        self.gamma = gamma
        self._succ = (context or PlanContext()).successors

    def initial_state(self) -> L0State:
        return self.env.to_l0()

    def actions(self, state: L0State) -> Sequence[str]:
        return ACTIONS

    def successors(self, state: L0State) -> tuple[L0State, ...]:
        cached = self._succ.get(state)
        if cached is None:
            cached = tuple(step_state(self.env, state, a) for a in ACTIONS)
            self._succ[state] = cached
        return cached

    def is_terminal(self, state: L0State) -> bool:
        return self.grounded.satisfied_l0(self.env, state)

    def goal_reachable_quick(self) -> bool:
        return bool(self.grounded.goal_cells & self.env.free_cells)


class AbstractProblem:
    """Level-1/2 MDP over abstract states and region-move subtasks."""

    def __init__(self, env: GridEnv, level: int, grounded: GroundedRewardFunction,
                 gamma: float = DEFAULT_GAMMA,
                 context: PlanContext | None = None):
        self.env = env
        self.level = level
        self.grounded = grounded
        self.gamma = gamma
        self._graph = (context or PlanContext()).abstract_graph

    def initial_state(self):
        return project(self.env, self.level)

    def actions(self, state) -> Sequence[Subtask]:
        entry = self._graph.get((self.level, state))
        if entry is None:
            entry = self._expand(state)
        return entry[0]

    def successors(self, state):
        entry = self._graph.get((self.level, state))
        if entry is None:
            entry = self._expand(state)
        return entry[1]

    def _expand(self, state):
        actions = abstract_actions(self.env, self.level, state)
        nexts = tuple(
            abstract_step(self.env, self.level, state, a) for a in actions
        )
        entry = (actions, nexts)
        self._graph[(self.level, state)] = entry
        return entry

    def is_terminal(self, state) -> bool:
        return self.grounded.satisfied_abstract(self.env, state)


# ---------------------------------------------------------------------------
# Value iteration
# ---------------------------------------------------------------------------


def _enumerate_reachable(problem, s0, cap: int):
    states = [s0]
    seen = {s0}
    frontier = [s0]
    while frontier:
        nxt = []
        for s in frontier:
            if problem.is_terminal(s):
                continue
            for s2 in problem.successors(s):
                if s2 not in seen:
                    seen.add(s2)
                    states.append(s2)
                    nxt.append(s2)
                    if len(states) > cap:
                        raise CapacityExceededError(
                            f"reachable state space exceeds cap {cap}"
                        )
        frontier = nxt
    return states


def value_iteration(problem, s0=None, epsilon: float = DEFAULT_VI_EPSILON,
                    state_cap: int = DEFAULT_STATE_CAP):
    """Solve the problem exactly; returns (greedy policy, value map).

    Bellman backups run over the set reachable from ``s0`` until the max
    residual drops below ``epsilon``.  Deterministic goal-reward problems hit
    their fixed point in finitely many sweeps, so this terminates exactly.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if s0 is None:
        s0 = problem.initial_state()
    states = _enumerate_reachable(problem, s0, state_cap)
    gamma = problem.gamma
    values = {s: 0.0 for s in states}
    nonterminal = [s for s in states if not problem.is_terminal(s)]
    succs = {s: problem.successors(s) for s in nonterminal}
    terminal = {s: problem.is_terminal(s) for s in states}
    while True:
        residual = 0.0
        for s in nonterminal:
            best = 0.0
            for s2 in succs[s]:
                q = gamma * ((1.0 if terminal[s2] else 0.0) + values[s2])
                if q > best:
                    best = q
            delta = abs(best - values[s])
            if delta > residual:
                residual = delta
            values[s] = best
        if residual < epsilon:
            break
    policy = {}
    for s in nonterminal:
        best_q, best_a = -1.0, None
        for a, s2 in zip(problem.actions(s), succs[s]):
            q = gamma * ((1.0 if terminal[s2] else 0.0) + values[s2])
            if q > best_q + 1e-12:
                best_q, best_a = q, a
        policy[s] = best_a
    return policy, values


# ---------------------------------------------------------------------------
# Manhattan upper bound
# ---------------------------------------------------------------------------


def manhattan_upper_bound(
    env: GridEnv,
    goal: GroundedRewardFunction | Sequence[GroundedRewardFunction],
    gamma: float = DEFAULT_GAMMA,
    context: PlanContext | None = None,
) -> Callable[[L0State], float]:
    """Admissible value bound ``gamma**d`` with ``d`` the moved entity's
    Manhattan distance to the nearest goal cell.

    Only single navigation/push goals admit this bound; composites do not
    decompose into one moved entity.
    """
    if not isinstance(goal, GroundedRewardFunction):
        goals = list(goal)
        if len(goals) != 1:
            raise HeuristicUnavailableError(
                "Manhattan bound covers single-subtask goals only"
            )
        goal = goals[0]
    if not goal.goal_cells:
        raise HeuristicUnavailableError("goal has no satisfying cells")
    fields = (context or PlanContext()).distance_fields
    dist = fields.get(goal.goal_cells)
    if dist is None:
        targets = sorted(goal.goal_cells)
        dist = {
            cell: min(abs(cell[0] - gx) + abs(cell[1] - gy)
                      for gx, gy in targets)
            for cell in env.free_cells
        }
        fields[goal.goal_cells] = dist
    entity = goal.entity_id
    if entity == "agent0":
        def bound(state: L0State) -> float:
            return gamma ** dist[state.agent]
    else:
        idx = env.block_ids.index(entity)

        def bound(state: L0State) -> float:
            return gamma ** dist[state.blocks[idx]]

    return bound


# ---------------------------------------------------------------------------
# BRTDP
# ---------------------------------------------------------------------------


@dataclass
class BrtdpResult:
    policy: dict
    bounds: ValueBounds
    converged: bool
    trials: int


class _BrtdpSolver:
    """Bound bookkeeping shared across trials (and across re-rooted runs)."""

    def __init__(self, problem, alpha: float, tau: float,
                 heuristic: Callable | None, rng: np.random.Generator | None,
                 trial_depth_cap: int):
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        self.problem = problem
        self.alpha = alpha
        self.tau = tau
        self.heuristic = heuristic
        self.rng = rng or np.random.default_rng(0)
        self.depth_cap = trial_depth_cap
        self.upper: dict = {}
        self.lower: dict = {}
        self.terminal: dict = {}
        self.trials = 0

    def _touch(self, s) -> None:
        if s in self.upper:
            return
        term = self.problem.is_terminal(s)
        self.terminal[s] = term
        if term:
            self.upper[s] = 0.0
            self.lower[s] = 0.0
        else:
            self.upper[s] = self.heuristic(s) if self.heuristic else 1.0
            self.lower[s] = 0.0

    def gap(self, s) -> float:
        self._touch(s)
        return self.upper[s] - self.lower[s]

    def _backup(self, s) -> None:
        gamma = self.problem.gamma
        best_u, best_l = 0.0, 0.0
        for s2 in self.problem.successors(s):
            self._touch(s2)
            r = 1.0 if self.terminal[s2] else 0.0
            qu = gamma * (r + self.upper[s2])
            ql = gamma * (r + self.lower[s2])
            if qu > best_u:
                best_u = qu
            if ql > best_l:
                best_l = ql
        # clamp keeps both envelopes monotone against float drift
        if best_u < self.upper[s]:
            self.upper[s] = best_u
        if best_l > self.lower[s]:
            self.lower[s] = best_l

    def greedy_action_index(self, s, bound: str = "upper") -> int:
        gamma = self.problem.gamma
        table = self.upper if bound == "upper" else self.lower
        best_q, best_i = -1.0, 0
        for i, s2 in enumerate(self.problem.successors(s)):
            self._touch(s2)
            q = gamma * ((1.0 if self.terminal[s2] else 0.0) + table[s2])
            if q > best_q + 1e-12:
                best_q, best_i = q, i
        return best_i

    def run_trial(self, root) -> None:
        self.trials += 1
        gap_root = self.gap(root)
        threshold = gap_root / self.tau
        s = root
        stack = []
        depth = 0
        while not self.terminal[s]:
            stack.append(s)
            self._backup(s)
            s2 = self.problem.successors(s)[self.greedy_action_index(s)]
            self._touch(s2)
            depth += 1
            if self.terminal[s2] or depth >= self.depth_cap:
                break
            if self.gap(s2) < threshold:
                break
            s = s2
        while stack:
            self._backup(stack.pop())

    def solve(self, root, max_trials: int,
              on_trial: Callable[[int, ValueBounds], None] | None = None) -> bool:
        self._touch(root)
        bounds = ValueBounds(self.lower, self.upper)
        while self.gap(root) >= self.alpha:
            if self.trials >= max_trials:
                return False
            self.run_trial(root)
            if on_trial is not None:
                on_trial(self.trials, bounds)
        return True


def brtdp(
    problem,
    s0=None,
    alpha: float = DEFAULT_ALPHA,
    max_trials: int = DEFAULT_MAX_TRIALS,
    heuristic: Callable | None = None,
    tau: float = DEFAULT_TAU,
    rng: np.random.Generator | None = None,
    on_trial: Callable | None = None,
) -> BrtdpResult:
    """Trial-based planning with upper/lower value bounds.

    Trials walk greedily on the upper bound, stop once the successor gap
    falls under (root gap)/tau, and back both bounds up along the visited
    stack; planning stops when the root gap drops below ``alpha`` or the
    trial budget runs out (flagged via ``converged``).
    """
    if s0 is None:
        s0 = problem.initial_state()
    depth_cap = _trial_depth_cap(problem.env)
    solver = _BrtdpSolver(problem, alpha, tau, heuristic, rng, depth_cap)
    converged = solver.solve(s0, max_trials, on_trial)
    visited = [s for s in solver.upper if not solver.terminal[s]]
    policy = {s: ACTIONS[solver.greedy_action_index(s)] for s in visited}
    return BrtdpResult(
        policy, ValueBounds(solver.lower, solver.upper), converged, solver.trials
    )


def _rollout_brtdp(problem, solver: _BrtdpSolver, s0, max_trials: int,
                   step_cap: int) -> tuple[str, ...]:
    """Walk to the goal greedily on the lower bound, re-converging at any
    loose state.

    Lower bounds are only raised along paths that actually reach the goal,
    so a greedy-on-lower walk from an alpha-converged state is alpha-optimal
    and terminates; greedy-on-upper walks (the exploration rule inside the
    trials) may chase optimistic unexplored successors instead.
    """
    actions: list[str] = []
    s = s0
    while not problem.is_terminal(s):
        if len(actions) >= step_cap:
            raise ExecutionDivergedError(
                f"no terminal state within {step_cap} steps"
            )
        if solver.gap(s) >= solver.alpha:
            if not solver.solve(s, max_trials):
                raise UnreachableError("bound gap would not close; goal unreachable?")
        if solver.lower[s] <= problem.gamma ** step_cap:
            raise UnreachableError("optimal value is indistinguishable from zero")
        idx = solver.greedy_action_index(s, bound="lower")
        actions.append(ACTIONS[idx])
        s = problem.successors(s)[idx]
    return tuple(actions)


# ---------------------------------------------------------------------------
# Hierarchical planning
# ---------------------------------------------------------------------------


def _step_cap(env: GridEnv) -> int:
    return 10 * env.width * env.height


def _plan_l0_leg(
    env: GridEnv,
    grounded: GroundedRewardFunction,
    subtask: Subtask | None,
    use_heuristic: bool,
    alpha: float,
    tau: float,
    max_trials: int,
    rng: np.random.Generator | None,
    gamma: float,
    context: PlanContext,
) -> TraceLeg:
    started = time.perf_counter()
    problem = L0Problem(env, grounded, gamma, context)
    if not problem.goal_reachable_quick():
        raise UnreachableError(f"goal cells of {grounded.render()} are all walls")
    heuristic = (
        manhattan_upper_bound(env, grounded, gamma, context)
        if use_heuristic else None
    )
    depth_cap = _trial_depth_cap(env)
    solver = _BrtdpSolver(problem, alpha, tau, heuristic, rng, depth_cap)
    s0 = problem.initial_state()
    if not solver.solve(s0, max_trials):
        raise UnreachableError(
            f"BRTDP did not converge within {max_trials} trials"
        )
    actions = _rollout_brtdp(problem, solver, s0, max_trials, _step_cap(env))
    return TraceLeg(
        level=0,
        subtask=subtask,
        goal=grounded.render(),
        actions=actions,
        seconds=time.perf_counter() - started,
    )


def _subtask_reward(env: GridEnv, subtask: Subtask, level: int) -> GroundedRewardFunction:
    """Express an abstract action as a goal for the level below."""
    region_id = subtask.target
    cells = (
        env.room_by_id[region_id].cells
        if region_id in env.room_by_id
        else env.door_by_id[region_id].cells
    )
    if subtask.kind == "move_agent":
        predicate, entity = "agentInRegion", "agent0"
    else:
        predicate, entity = "blockInRegion", subtask.block_id
    return GroundedRewardFunction(
        level, predicate, entity, region_id, frozenset(cells)
    )


def amdp_plan(
    env: GridEnv,
    grounded: GroundedRewardFunction,
    use_heuristic: bool = True,
    alpha: float = DEFAULT_ALPHA,
    tau: float = DEFAULT_TAU,
    max_trials: int = DEFAULT_MAX_TRIALS,
    rng: np.random.Generator | None = None,
    gamma: float = DEFAULT_GAMMA,
    vi_epsilon: float = DEFAULT_VI_EPSILON,
) -> PlanTrace:
    """Top-down hierarchical plan for a grounded reward at its own level.

    Levels above 0 are solved with value iteration over the abstract model;
    the chosen subtask sequence is committed to and each subtask becomes a
    planning problem one level down, bottoming out in BRTDP over primitives.
    """
    started = time.perf_counter()
    legs = _plan_at_level(
        env, grounded, grounded.level, None, use_heuristic, alpha, tau,
        max_trials, rng, gamma, vi_epsilon, PlanContext(),
    )
    return PlanTrace(legs, planning_seconds=time.perf_counter() - started)


def _plan_at_level(
    env: GridEnv,
    grounded: GroundedRewardFunction,
    level: int,
    parent_subtask: Subtask | None,
    use_heuristic: bool,
    alpha: float,
    tau: float,
    max_trials: int,
    rng: np.random.Generator | None,
    gamma: float,
    vi_epsilon: float,
    context: PlanContext,
) -> list[TraceLeg]:
    if level == 0:
        if grounded.satisfied_l0(env, env.to_l0()):
            return []
        return [
            _plan_l0_leg(env, grounded, parent_subtask, use_heuristic, alpha,
                         tau, max_trials, rng, gamma, context)
        ]
    problem = AbstractProblem(env, level, grounded, gamma, context)
    s0 = problem.initial_state()
    if problem.is_terminal(s0):
        return []
    policy, values = value_iteration(problem, s0, vi_epsilon)
    if values[s0] <= 0.0:
        raise UnreachableError(
            f"{grounded.render()} unreachable in the level-{level} model"
        )
    # roll the abstract policy out in its own model and commit to the
    # resulting subtask sequence (deterministic domain, no replanning)
    subtasks: list[Subtask] = []
    s = s0
    while not problem.is_terminal(s):
        a = policy[s]
        subtasks.append(a)
        s = abstract_step(env, level, s, a)
        if len(subtasks) > len(values) + 1:
            raise UnreachableError("abstract rollout failed to terminate")
    legs: list[TraceLeg] = []
    current = env
    for subtask in subtasks:
        sub_reward = _subtask_reward(current, subtask, level - 1)
        sub_legs = _plan_at_level(
            current, sub_reward, level - 1, subtask, use_heuristic, alpha,
            tau, max_trials, rng, gamma, vi_epsilon, context,
        )
        legs.extend(sub_legs)
        for leg in sub_legs:
            for action in leg.actions:
                current = step_l0(current, action)
    return legs


def flat_plan(
    env: GridEnv,
    grounded: GroundedRewardFunction,
    alpha: float = DEFAULT_ALPHA,
    tau: float = DEFAULT_TAU,
    max_trials: int = DEFAULT_MAX_TRIALS,
    rng: np.random.Generator | None = None,
    gamma: float = DEFAULT_GAMMA,
) -> PlanTrace:
    """BASE: flat BRTDP over primitives for a goal of any abstraction level."""
    started = time.perf_counter()
    if grounded.satisfied_l0(env, env.to_l0()):
        return PlanTrace([], planning_seconds=time.perf_counter() - started)
    leg = _plan_l0_leg(env, grounded, None, False, alpha, tau, max_trials,
                       rng, gamma, PlanContext())
    return PlanTrace([leg], planning_seconds=time.perf_counter() - started)


def plan_command(
    env: GridEnv,
    grounded: GroundedRewardFunction,
    planner: str,
    alpha: float = DEFAULT_ALPHA,
    tau: float = DEFAULT_TAU,
    max_trials: int = DEFAULT_MAX_TRIALS,
    rng: np.random.Generator | None = None,
    gamma: float = DEFAULT_GAMMA,
) -> PlanTrace:
    if planner == "base":
        return flat_plan(env, grounded, alpha, tau, max_trials, rng, gamma)
    if planner == "nh":
        return amdp_plan(env, grounded, False, alpha, tau, max_trials, rng, gamma)
    if planner == "amdp":
        return amdp_plan(env, grounded, True, alpha, tau, max_trials, rng, gamma)
    raise ValueError(f"unknown planner {planner!r}; expected one of {PLANNER_TOKENS}")


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def execute_trace(env: GridEnv, trace: PlanTrace) -> tuple[GridEnv, list[str]]:
    """Replay a plan's primitive actions on the scene."""
    steps: list[str] = []
    cap = _step_cap(env)
    for action in trace.actions:
        if len(steps) >= cap:
            raise ExecutionDivergedError(f"trace exceeds step cap {cap}")
        env = step_l0(env, action)
        steps.append(action)
    return env, steps


def execute_policy(
    env: GridEnv,
    policy: dict,
    grounded: GroundedRewardFunction,
) -> tuple[GridEnv, list[str]]:
    """Follow a state->action map until the grounded condition holds."""
    steps: list[str] = []
    cap = _step_cap(env)
    state = env.to_l0()
    while not grounded.satisfied_l0(env, state):
        if len(steps) >= cap:
            raise ExecutionDivergedError(f"policy exceeds step cap {cap}")
        action = policy.get(state)
        if action is None:
            raise ExecutionDivergedError(f"policy has no action for {state}")
        state = step_state(env, state, action)
        steps.append(action)
    return env.with_state(state), steps


def execute(plan, env: GridEnv, grounded: GroundedRewardFunction | None = None):
    """Apply a PlanTrace or a policy map to a scene; returns (env, steps)."""
    if isinstance(plan, PlanTrace):
        return execute_trace(env, plan)
    if grounded is None:
        raise ValueError("executing a policy requires the grounded goal")
    return execute_policy(env, plan, grounded)
