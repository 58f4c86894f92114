import os

import pytest

from agentmesh.runtime.node import Node

# Manifest sets used across the suite. Keys are levels; missing levels
# get an empty file so the ladder can always be climbed.
PRESENCE_01 = "behaviour cyclic presence handler=presence-responder level=1\n"
WORKER_05 = "behaviour cyclic worker handler=engine-worker level=5\n"
BOARD_05 = ("behaviour cyclic serve handler=ticket-board-server "
            "journal=board.journal level=5\n")


def write_manifests(root, levels: dict[int, str]) -> str:
    d = os.path.join(root, f"man{len(os.listdir(root))}")
    os.makedirs(d)
    for lvl in (0, 1, 3, 5):
        with open(os.path.join(d, f"level.{lvl:02d}.bf"), "w") as fh:
            fh.write(levels.get(lvl, ""))
    return d


@pytest.fixture
def manifest_factory(tmp_path):
    root = tmp_path / "manifests"
    root.mkdir()
    return lambda levels: write_manifests(str(root), levels)


@pytest.fixture
def platform(tmp_path):
    node = Node("platform", resources_dir=str(tmp_path / "res"))
    os.makedirs(node.resources_dir, exist_ok=True)
    node.start()
    yield node
    node.close()
