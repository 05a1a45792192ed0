import json

import pytest

from hacss.scenario import ConfigInvalid, bundled, from_dict, load, loads

BASE = {"I": 2, "s": 100, "duration": 10}


def fields_of(exc):
    return [f for f, _ in exc.value.problems]


def test_minimal_defaults():
    sc = from_dict(BASE)
    assert sc.capacity == 100 // 12 and sc.engine.header_filter and sc.costs.drop == 1


@pytest.mark.parametrize(
    "patch,field",
    [
        ({"I": 0}, "I"),
        ({"s": 0}, "s"),
        ({"duration": -1}, "duration"),
        ({"seed": -3}, "seed"),
        ({"engine": {"p": 1000}}, "engine.p"),
        ({"costs": {"drop": 5}}, "costs.drop"),
        ({"costs": {"open_body": 0}}, "costs.open_body"),
        ({"attackers": [{"model": "REPLAYER", "rate": -1}]}, "attackers[0].rate"),
        ({"attackers": [{"model": "NOPE"}]}, "attackers[0].model"),
        ({"clients": [{"issuer": 9}]}, "clients[0].issuer"),
        ({"clients": [{"transfers": [{"size": 0}]}]}, "clients[0].transfers[0].size"),
        ({"policy": {"1": ["TELEPORT"]}}, "policy.1"),
        ({"bogus": 1}, "bogus"),
        ({"engine": {"Bee": 1}}, "engine.Bee"),
    ],
)
def test_bad_field_named(patch, field):
    with pytest.raises(ConfigInvalid) as exc:
        from_dict({**BASE, **patch})
    assert field in fields_of(exc)


def test_missing_required():
    with pytest.raises(ConfigInvalid) as exc:
        from_dict({"I": 1})
    assert fields_of(exc) == ["s", "duration"]


def test_json_error_has_line():
    with pytest.raises(ConfigInvalid) as exc:
        loads('{\n "I": 1,\n oops}')
    assert fields_of(exc)[0].startswith("line 3")


def test_round_trip_through_dict():
    sc = load(bundled("flood-demo"))
    assert from_dict(json.loads(json.dumps(sc.to_dict()))) == sc
    assert sc.with_seed(9).seed == 9 and sc.seed == 7
