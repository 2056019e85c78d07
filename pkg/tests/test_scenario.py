import json
from decimal import Decimal

import pytest

from stabcred import scenario, _utils, _utils_tests
from stabcred.constants import DEFAULT_DT, Direction
from stabcred.exceptions import ParseError, SchemaError, RangeError


def parse(x) -> scenario.ScenarioConfig:
    return scenario.parse_scenario(json.dumps(x))


def test_minimal_scenario_defaults():
    """A scenario with only a pool falls back to the documented defaults"""
    config = parse(_utils_tests.minimal_scenario())
    assert config.pool.stable == 1_000_000
    assert config.pool.amplification == 100
    assert config.controller.gain == Decimal("0.15")
    assert config.dt == DEFAULT_DT
    assert config.horizon == 365
    assert config.grid_points == 101
    assert config.rng == scenario.RngConfig("philox", 0)
    assert config.external_markets == ()
    assert config.perps is None


def test_numbers_are_parsed_as_decimals():
    """JSON floats are parsed straight into Decimal, without a binary round trip"""
    config = scenario.parse_scenario('{"pool": {"stable": 0.1, "counter": "0.2", "amplification": 3}}')
    assert config.pool.stable == Decimal("0.1")
    assert config.pool.counter == Decimal("0.2")


def test_baseline_scenario():
    """The baseline scenario parses markets, perps and yield inputs"""
    config = parse(_utils_tests.baseline_scenario())
    market = config.market("isolated")
    assert market.credit_line == scenario.AUTO
    assert market.rate_params.slope2 == Decimal("0.75")
    assert market.reserve_factor == Decimal("0.2")
    assert config.perps.worst_case_drawdown == Decimal("0.06")
    assert config.perps.pnl_model.kind == "gaussian"
    assert config.endogenous_yield.lend_supply == 1_000_000


def test_bundled_example_scenario_loads():
    """The scenario shipped with the project loads"""
    config = scenario.load_scenario(_utils.get_project_root("scenarios", "baseline.json"))
    assert config.horizon == 365
    assert config.cdp_book is not None
    assert config.actions[0].kind == "psm_swap_in"


def test_range_errors_name_the_field():
    """Range errors carry the path of the offending field"""
    x = _utils_tests.baseline_scenario()
    x["external_markets"][0]["rate_params"]["u_optimal"] = "1.2"
    with pytest.raises(RangeError) as e:
        parse(x)
    assert e.value.path == "external_markets[0].rate_params.u_optimal"
    assert str(e.value).startswith("external_markets[0].rate_params.u_optimal:")


def test_missing_pool():
    """A scenario without a pool is a schema error"""
    with pytest.raises(SchemaError) as e:
        parse({"controller": {"gain": "0.15"}})
    assert e.value.path == "pool"


def test_unknown_field():
    """Misspelled fields are rejected"""
    with pytest.raises(SchemaError) as e:
        parse(_utils_tests.minimal_scenario(horizn=10))
    assert e.value.path == "horizn"


@pytest.mark.parametrize("patch, path", [
    ({"controller": {"gain": "0"}}, "controller.gain"),
    ({"horizon": 0}, "horizon"),
    ({"dt": "-1"}, "dt"),
    ({"grid_points": 1}, "grid_points"),
    ({"pool": {"stable": "0", "counter": "1", "amplification": 1}}, "pool.stable"),
    ({"pool": {"stable": "1", "counter": "1", "amplification": 0}}, "pool.amplification"),
])
def test_range_errors(patch, path):
    """Out-of-range values are reported at their field path"""
    with pytest.raises(RangeError) as e:
        parse(_utils_tests.minimal_scenario(**patch))
    assert e.value.path == path


def test_schema_errors():
    """Wrong types, unknown algorithms and dangling action references are schema errors"""
    with pytest.raises(SchemaError):
        parse(_utils_tests.minimal_scenario(horizon="365"))
    with pytest.raises(SchemaError):
        parse(_utils_tests.minimal_scenario(rng={"algorithm": "mt19937"}))
    with pytest.raises(SchemaError):
        parse(_utils_tests.minimal_scenario(actions=[{"step": 0, "kind": "psm_swap_in", "amount": "1"}]))
    with pytest.raises(SchemaError):
        parse(_utils_tests.minimal_scenario(actions=[
            {"step": 0, "kind": "set_rate_params", "market": "nope", "rate_params": {"slope1": "0.2"}}
        ]))


def test_position_debt_is_limited_by_the_ltv_cap():
    """A CDP position may not start above its LTV cap"""
    book = {"positions": [
        {"owner": "alice", "collateral_value": "10000", "liquidation_threshold": "0.8", "ltv_cap": "0.7", "debt": "7001"}
    ]}
    with pytest.raises(RangeError) as e:
        parse(_utils_tests.minimal_scenario(cdp_book=book))
    assert e.value.path == "cdp_book.positions[0].debt"


def test_actions():
    """Scheduled actions parse per kind and must fall inside the horizon"""
    actions = [
        {"step": 1, "kind": "amo_trade", "amount": "1000", "direction": "counter-in"},
        {"step": 2, "kind": "set_rate_params", "market": "isolated", "rate_params": {"slope1": "0.2"}},
        {"step": 3, "kind": "set_controller_gain", "gain": "0.3"},
    ]
    config = parse(_utils_tests.baseline_scenario(actions=actions))
    assert config.actions[0].direction == Direction.COUNTER_IN
    assert config.actions[1].rate_updates == (("slope1", Decimal("0.2")),)
    assert config.actions[2].gain == Decimal("0.3")

    with pytest.raises(RangeError) as e:
        parse(_utils_tests.baseline_scenario(actions=[{"step": 30, "kind": "backfill", "amount": "1"}]))
    assert e.value.path == "actions[0].step"


def test_risks_extend_the_register():
    """Scenario risks are validated like built-in ones"""
    risk = {
        "name": "Oracle Risk",
        "unmitigated": {"likelihood": "B", "consequence": 2},
        "mitigated": {"likelihood": "A", "consequence": 2},
    }
    config = parse(_utils_tests.minimal_scenario(risks=[risk]))
    assert config.risks[0].name == "Oracle Risk"

    risk["mitigated"] = {"likelihood": "C", "consequence": 2}
    with pytest.raises(RangeError) as e:
        parse(_utils_tests.minimal_scenario(risks=[risk]))
    assert e.value.path == "risks[0]"


def test_ray_scaled_rate_params():
    """Rate parameters may be given ray-scaled"""
    x = _utils_tests.baseline_scenario()
    x["external_markets"][0]["rate_params"] = {
        "ray": True, "u_optimal": "0.8", "slope1": "100000000000000000000000000", "slope2": "750000000000000000000000000"
    }
    market = parse(x).market("isolated")
    assert market.rate_params.slope1 == Decimal("0.1")
    assert market.rate_params.slope2 == Decimal("0.75")


def test_malformed_json():
    """Broken JSON and missing files are parse errors"""
    with pytest.raises(ParseError):
        scenario.parse_scenario('{"pool": ')
    with pytest.raises(ParseError):
        scenario.load_scenario("/nonexistent/scenario.json")


def test_emit_and_load(tmp_path):
    """A scenario written by emit_scenario loads back to an equal config with the same hash"""
    config = scenario.load_scenario(_utils.get_project_root("scenarios", "baseline.json"))
    path = tmp_path.joinpath("scenario.json")
    path.write_text(scenario.emit_scenario(config), encoding="utf-8")

    loaded = scenario.load_scenario(path)
    assert loaded == config
    assert loaded.hash == config.hash


def test_write_scenario_helper(tmp_path):
    """write_scenario creates parent directories"""
    path = _utils_tests.write_scenario(tmp_path.joinpath("a", "b.json"), _utils_tests.minimal_scenario())
    assert scenario.load_scenario(path).pool.counter == 1_000_000
