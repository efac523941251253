import numpy as np
import pytest

from langground import world


@pytest.fixture(scope="session")
def small_env():
    return world.make_small_env()


@pytest.fixture(scope="session")
def regular_env():
    return world.make_regular_env()


def open_box_env(width=8, height=8, blocks=((4, 4),), agent=(1, 1)):
    """Single green room filling the whole interior; handy for dynamics
    tests that should not care about doors."""
    walls = world._border_walls(width, height)
    cells = world._rect(1, 1, width - 2, height - 2)
    env = world.GridEnv(
        width=width,
        height=height,
        walls=frozenset(walls),
        rooms=(world.Room("room0", "green", cells),),
        doors=(),
        blocks=tuple(
            world.Block(f"block{i}", "orange", pos) for i, pos in enumerate(blocks)
        ),
        agent_position=agent,
    )
    env.validate()
    return env


def corridor_env(length, agent=(1, 1)):
    """1-cell-high corridor of `length` free cells in a single room."""
    width, height = length + 2, 3
    walls = world._border_walls(width, height)
    env = world.GridEnv(
        width=width,
        height=height,
        walls=frozenset(walls),
        rooms=(world.Room("room0", "red", world._rect(1, 1, length, 1)),),
        doors=(),
        blocks=(),
        agent_position=agent,
    )
    env.validate()
    return env


def fd_gradcheck(build_loss, params, h=1e-5, rel_tol=1e-4, abs_tol=1e-7):
    """Central finite differences against backprop for every entry of every
    parameter; independent of the autograd path it checks."""
    loss = build_loss()
    loss.backward()
    # heads that received no batch rows legitimately have no gradient
    grads = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
             for p in params]
    worst = 0.0
    for p, g in zip(params, grads):
        it = np.nditer(p.data, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p.data[i]
            p.data[i] = old + h
            up = build_loss().data.item()
            p.data[i] = old - h
            down = build_loss().data.item()
            p.data[i] = old
            fd = (up - down) / (2 * h)
            err = abs(fd - g[i])
            denom = max(abs(fd), abs(g[i]))
            if err > abs_tol and err > rel_tol * denom:
                raise AssertionError(
                    f"gradient mismatch at {i}: fd={fd:.3e} bp={g[i]:.3e}"
                )
            worst = max(worst, err / denom if denom > 0 else 0.0)
        p.zero_grad()
    return worst
