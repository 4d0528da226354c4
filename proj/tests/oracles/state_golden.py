"""Writes golden initial-state encodings under fixtures/envs/.

Built from the byte layout in docs/state_encoding.md and the initial-state
rules in docs/envs.md, using the independent MT19937-64 in mt64.py.
"""

import os
import struct
import sys

sys.path.insert(0, os.path.dirname(__file__))
from mt64 import MT64  # noqa: E402

ROOT = os.path.join(os.path.dirname(__file__), "..", "..")


def u16(v): return struct.pack("<H", v)
def u32(v): return struct.pack("<I", v)
def i32(v): return struct.pack("<i", v)
def u64(v): return struct.pack("<Q", v)
def i64(v): return struct.pack("<q", v)
def u8(v): return struct.pack("<B", v)
def text(s): return u32(len(s.encode())) + s.encode()


NORTH, EAST = 0, 3


def encode(task, seed, width, height, grid, agents, scores, rng):
    out = b"MSTE" + u16(1) + text(task) + u64(seed) + u32(width) + u32(height)
    out += bytes(grid)
    out += u32(len(agents))
    for slot in sorted(agents):
        x, y, direction, team = agents[slot]
        out += text(slot) + i32(x) + i32(y) + u8(direction) + text(team)
    out += u32(len(scores))
    for team in sorted(scores):
        out += text(team) + i64(scores[team])
    out += u64(0) + u64(0) + u32(0) + u8(0)  # step, episode, turn, flags
    for word in rng.mt:
        out += u64(word)
    out += u64(rng.idx)
    return out


def corridor(seed):
    grid = [0, 0, 0, 0, 1]
    agents = {"agent_0": (0, 0, EAST, "solo")}
    return encode("mosaic/Corridor-v1", seed, 5, 1, grid, agents, {"solo": 0}, MT64(seed))


def teamtag(seed):
    rng = MT64(seed)
    taken = set()
    agents = {}
    for slot in ["blue_0", "blue_1", "green_0", "green_1"]:
        while True:
            idx = rng.below(49)
            cell = (idx % 7, idx // 7)
            if cell not in taken:
                break
        taken.add(cell)
        agents[slot] = (cell[0], cell[1], NORTH, slot.split("_")[0])
    return encode("mosaic/TeamTag-2vs2-v1", seed, 7, 7, [0] * 49, agents, {"blue": 0, "green": 0}, rng)


def main():
    out_dir = os.path.join(ROOT, "fixtures", "envs")
    os.makedirs(out_dir, exist_ok=True)
    for name, blob in [("corridor_seed42.state", corridor(42)), ("teamtag_seed7.state", teamtag(7))]:
        with open(os.path.join(out_dir, name), "wb") as f:
            f.write(blob)
        print(name, len(blob), "bytes")


if __name__ == "__main__":
    main()
