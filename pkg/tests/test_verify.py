import json

import pytest

from conftest import build_task
from luban.dsl import parse_checks
from luban.kernel import FeatureRecord
from luban.verify import ReflectionPacket, make_packet, migrate, resolve, verify
from luban.world import WorldSnapshot


def flat(size=(8, 6, 8)):
    w = WorldSnapshot(size)
    for x in range(size[0]):
        for y in range(size[1]):
            w.blocks[(x, y, 0)] = "dirt"
    return w


def checks(*items):
    return parse_checks(json.dumps({"checks": list(items)}))


def test_reasons():
    w = flat()
    w.blocks[(3, 3, 1)] = w.blocks[(3, 3, 2)] = "stone"
    w.blocks[(5, 5, 1)] = "glass"
    w.anchors["a"] = (1, 1, 1)
    prog = checks(
        {"id": "gone", "kind": "standable", "at": {"anchor": "nowhere"}},
        {"id": "walk", "kind": "reachable", "from": {"anchor": "a"}, "to": {"abs": [6, 1, 1]}},
        {"id": "air", "kind": "reachable", "from": {"anchor": "a"}, "to": {"abs": [6, 1, 4]}},
        {"id": "tall", "kind": "height_at_least", "at": {"abs": [3, 3, 0]}, "min_z": 2},
        {"id": "short", "kind": "height_at_least", "at": {"abs": [3, 3, 0]}, "min_z": 3},
        {"id": "glass", "kind": "material_at", "at": {"abs": [5, 5, 1]}, "material": "glass"},
        {"id": "empty", "kind": "material_at", "at": {"abs": [5, 5, 2]}, "material": "air"},
        {"id": "wrong", "kind": "material_at", "at": {"abs": [5, 5, 1]}, "material": "stone"},
    )
    res = verify(prog, w)
    assert [(c.id, c.status, c.reason) for c in res.checks] == [
        ("gone", 0, "missing_anchor"), ("walk", 1, None), ("air", 0, "not_standable"), ("tall", 1, None),
        ("short", 0, "too_low"), ("glass", 1, None), ("empty", 1, None), ("wrong", 0, "wrong_material")]
    assert res.pass_rate == pytest.approx(4 / 8)


def test_walled_off_target_is_no_path():
    w = flat()
    for y in range(6):
        for z in (1, 2):
            w.blocks[(4, y, z)] = "stone"
    res = verify(checks({"id": "c", "kind": "reachable", "from": {"abs": [1, 1, 1]},
                         "to": {"abs": [6, 1, 1]}}), w)
    assert (res.checks[0].status, res.checks[0].reason) == (0, "no_path")


def test_feature_points_and_verification_is_read_only():
    w = flat()
    for x in (2, 3, 4):
        w.blocks[(x, 2, 1)] = "plank"
    rec = FeatureRecord("grow", frozenset((x, 2, 1) for x in (2, 3, 4)), "plank", 2)
    prog = checks(
        {"id": "top", "kind": "standable", "at": {"feature": "p.f", "point": "top_center"}},
        {"id": "east", "kind": "standable", "at": {"feature": "p.f", "point": "adjacent_east"}},
    )
    (top, east) = resolve(prog, w, {"p.f": rec})
    assert top.points["at"] == (3, 2, 2) and east.points["at"] == (5, 2, 1)
    before = dict(w.blocks)
    assert verify(prog, w, {"p.f": rec}).statuses == [1, 1]
    assert w.blocks == before


def test_migrate_uses_default_points_when_feature_is_absent():
    b = build_task("bridge")
    prog = checks({"id": "deck", "kind": "standable", "at": {"feature": "deck.deck", "point": "top_center"}})
    assert migrate(prog, b.world, b.placed.features).statuses == [1]
    key = prog.checks[0].at.key()
    assert migrate(prog, b.world, {}, {key: b.world.anchors["west_bank"]}).statuses == [1]
    assert migrate(prog, b.world, {}).checks[0].reason == "missing_anchor"


def test_packet_round_trip(tmp_path):
    (tmp_path / "w.ppm").write_bytes(b"P6\n1 1\n255\n\0\0\0")
    res = verify(checks({"id": "s", "kind": "standable", "at": {"abs": [1, 1, 1]}}), flat())
    packet = make_packet("build a shed", res, [1, 0, 1], ["w.ppm"], tmp_path, iteration=2)
    doc = packet.to_json()
    assert doc["complete"] and doc["build"] == {"actions": 3, "failed": 1, "statuses": "101"}
    assert ReflectionPacket.from_json(json.loads(packet.dumps())).to_json() == doc
    with pytest.raises(FileNotFoundError):
        make_packet("x", res, [], ["missing.ppm"], tmp_path)
