import json
from fractions import Fraction

import pytest

from src.automaton import Edge, EdgeKind, HybridAutomaton, TimedAutomaton, clock_bounds, export_ha, load_ha
from src.net import INFINITY
from src.parser import parse_model
from src.translate import (
    MarkingCapExceeded,
    ccpn_configuration,
    ccpn_to_ha,
    export_hierarchy,
    extract_discrete_part,
    hierarchy,
    timepn_to_timed_automaton,
    translate,
)

CAP = 10_000


def by_marking(ta, **tokens):
    for location in ta.locations.values():
        marking = dict(location.marking)
        if all(marking[p] == n for p, n in tokens.items()):
            return location
    raise LookupError(tokens)


class TestDiscretePart:
    def test_keeps_only_discrete_nodes(self, tanks3_delem):
        part = extract_discrete_part(tanks3_delem)

        assert [p.id for p in part.places] == ["Open_1", "Closed_1", "Open_2", "Closed_2"]
        assert [t.id for t in part.transitions] == ["close_1", "open_1", "close_2", "open_2"]
        assert ("Open_1", "T1") not in part.pre

    def test_timed_automaton_of_the_valves(self, tanks3_delem):
        ta = timepn_to_timed_automaton(extract_discrete_part(tanks3_delem), CAP)

        assert isinstance(ta, TimedAutomaton)
        assert len(ta.locations) == 4
        assert list(ta.clocks) == ["x_close_1", "x_open_1", "x_close_2", "x_open_2"]
        assert ta.location("S0").invariant == ()
        assert ta.location("S0").enabled == ("close_1", "close_2")

    def test_bounded_interval_gives_guard_and_invariant(self, tanks3_delem):
        ta = timepn_to_timed_automaton(extract_discrete_part(tanks3_delem), CAP)
        closed = by_marking(ta, Closed_1=1, Closed_2=0)

        assert [str(c) for c in closed.invariant] == ["x_open_1 <= 10"]
        edge = next(e for e in ta.outgoing(closed.id) if e.label == "open_1")
        assert [str(c) for c in edge.guard] == ["x_open_1 >= 10"]
        assert edge.resets == ("x_close_1",)

    def test_closing_resets_the_reopening_clock(self, tanks3_delem):
        ta = timepn_to_timed_automaton(extract_discrete_part(tanks3_delem), CAP)

        edge = next(e for e in ta.outgoing("S0") if e.label == "close_1")

        assert [str(c) for c in edge.guard] == ["x_close_1 >= 3"]
        assert edge.resets == ("x_open_1",)

    def test_marking_cap(self, tanks3_delem):
        with pytest.raises(MarkingCapExceeded) as excinfo:
            timepn_to_timed_automaton(extract_discrete_part(tanks3_delem), 1)

        assert excinfo.value.cap == 1


class TestContinuousPart:
    def test_configuration_with_both_valves_open(self, tanks3_delem, tanks3):
        ccpn = ccpn_configuration(tanks3_delem, tanks3_delem.initial_marking)

        assert [t.id for t in ccpn.transitions] == ["T1", "T2", "T3", "T4"]
        assert [p.id for p in ccpn.places] == ["P1", "P2", "P3"]
        assert ccpn.pre == tanks3.pre and ccpn.post == tanks3.post

    def test_configuration_follows_closed_valves(self, tanks3_delem):
        one_closed = tanks3_delem.initial_marking.updated({"Open_1": 0, "Closed_1": 1})
        both_closed = one_closed.updated({"Open_2": 0, "Closed_2": 1})

        assert [t.id for t in ccpn_configuration(tanks3_delem, one_closed).transitions] == ["T2", "T3", "T4"]
        assert [t.id for t in ccpn_configuration(tanks3_delem, both_closed).transitions] == ["T3", "T4"]

    def test_ccpn_automaton_flows(self, tanks3):
        ha = ccpn_to_ha(tanks3)

        assert ha.initial == "111"
        assert ha.location("111").flow == {"m1": -1, "m2": -1, "m3": 9}
        zero_m2 = next(e for e in ha.outgoing("111") if e.label == "m2 = 0")
        assert zero_m2.kind is EdgeKind.ZERO
        assert ha.location(zero_m2.target).flow == {"m1": -1, "m2": 0, "m3": 8}

    def test_ccpn_automaton_reaches_steady_state(self, tanks3):
        ha = ccpn_to_ha(tanks3)

        assert ha.location("001").flow == {"m1": 0, "m2": 0, "m3": 7}
        assert [e.kind for e in ha.outgoing("001")] == []

    def test_filling_tank_has_one_location(self):
        ha = ccpn_to_ha(parse_model("place P continuous = 3\ntransition T continuous speed=1\narc T -> P\n"))

        assert list(ha.locations) == ["1"]
        assert ha.edges == []

    def test_empty_tank_with_supply_gets_a_fill_edge(self):
        ha = ccpn_to_ha(parse_model("place P continuous = 0\ntransition T continuous speed=1\narc T -> P\n"))

        assert [(e.source, e.target, e.kind) for e in ha.edges] == [("0", "1", EdgeKind.FILL)]


class TestTranslate:
    def test_flat_automaton_of_tanks3_delem(self, tanks3_delem):
        ha = translate(tanks3_delem, CAP)

        assert ha.initial == "S0|111"
        assert len(ha.locations) <= 16
        assert all(location.signs.endswith("1") for location in ha.locations.values())
        assert ha.location("S0|111").flow == {"m1": -1, "m2": -1, "m3": 9}
        assert ha.initial_valuation["m1"] == 25 and ha.initial_valuation["x_close_1"] == 0

    def test_discrete_edges_keep_the_signs(self, tanks3_delem):
        ha = translate(tanks3_delem, CAP)

        for edge in ha.edges:
            if edge.kind is EdgeKind.DISCRETE:
                assert edge.source.split("|")[1] == edge.target.split("|")[1]
            else:
                assert edge.source.split("|")[0] == edge.target.split("|")[0]

    def test_closed_valves_change_the_flow(self, tanks3_delem):
        ha = translate(tanks3_delem, CAP)
        ta = timepn_to_timed_automaton(extract_discrete_part(tanks3_delem), CAP)
        closed = by_marking(ta, Closed_1=1, Closed_2=1)

        assert ha.location(f"{closed.id}|111").flow == {"m1": -3, "m2": -6, "m3": 9}

    def test_clock_bounds_of_flat_locations(self, tanks3_delem):
        ha = translate(tanks3_delem, CAP)
        ta = timepn_to_timed_automaton(extract_discrete_part(tanks3_delem), CAP)
        closed = by_marking(ta, Closed_1=1, Closed_2=0)

        assert clock_bounds(ha, ha.location("S0|111"), "x_close_1") == (3, INFINITY)
        assert clock_bounds(ha, ha.location(f"{closed.id}|111"), "x_open_1") == (10, 10)

    def test_continuous_net_translates_alone(self, tanks3, caplog):
        with caplog.at_level("WARNING"):
            ha = translate(tanks3, CAP)

        assert "no discrete part" in caplog.text
        assert ha.initial == "111" and ha.clocks == {}

    def test_discrete_net_gives_timed_automaton(self):
        net = parse_model(
            "net blink delementary\n"
            "place On discrete = 1\n"
            "place Off discrete = 0\n"
            "transition off discrete interval=[1,2]\n"
            "transition on discrete interval=[1,2]\n"
            "arc On -> off\narc off -> Off\narc Off -> on\narc on -> On\n"
        )

        ta = translate(net, CAP)

        assert isinstance(ta, TimedAutomaton)
        assert ta.name == "blink"
        assert len(ta.locations) == 2

    def test_hybrid_timed_net_is_rejected(self, tanks3_thresholds):
        with pytest.raises(ValueError, match="delementary"):
            translate(tanks3_thresholds, CAP)

    def test_cap_is_enforced(self, tanks3_delem):
        with pytest.raises(MarkingCapExceeded):
            translate(tanks3_delem, 1)

    def test_translation_is_deterministic(self, tanks3_delem):
        assert export_ha(translate(tanks3_delem, CAP)) == export_ha(translate(tanks3_delem, CAP))

    def test_outgoing_follows_edge_list_changes(self, tanks3_delem):
        ha = translate(tanks3_delem, CAP)
        count = len(ha.outgoing(ha.initial))

        ha.edges.append(Edge(ha.initial, ha.initial, "extra"))
        assert len(ha.outgoing(ha.initial)) == count + 1

        ha.edges = [e for e in ha.edges if e.source != ha.initial]
        assert ha.outgoing(ha.initial) == []


class TestExport:
    def test_dot_shows_flows_and_resets(self, tanks3_delem):
        text = export_ha(translate(tanks3_delem, CAP), "dot")

        assert text.startswith('digraph "tanks3_delem" {')
        assert "dm1/dt=-1" in text
        assert "x_open_1:=0" in text
        assert "style=dashed" in text

    def test_single_location_dot(self):
        ha = ccpn_to_ha(parse_model("place P continuous = 3\ntransition T continuous speed=1\narc T -> P\n"))

        text = export_ha(ha, "dot")

        assert '"1" [shape=doubleoctagon' in text
        assert "->" not in text

    def test_structured_export_loads_back(self, tanks3_delem):
        ha = translate(tanks3_delem, CAP)

        loaded = load_ha(export_ha(ha))

        assert loaded == ha
        assert isinstance(loaded, HybridAutomaton) and not isinstance(loaded, TimedAutomaton)

    def test_structured_document_layout(self, tanks3_delem):
        document = json.loads(export_ha(translate(tanks3_delem, CAP)))

        assert document["schema"] == "hpn-ha/1"
        assert document["variables"][0] == {"name": "m1", "place": "P1"}
        assert document["init"] == {
            "location": "S0|111",
            "valuation": {"m1": "25", "m2": "10", "m3": "5",
                          "x_close_1": "0", "x_open_1": "0", "x_close_2": "0", "x_open_2": "0"},
        }

    def test_unknown_schema_is_rejected(self, tanks3):
        document = json.loads(export_ha(ccpn_to_ha(tanks3)))
        document["schema"] = "hpn-ha/0"

        with pytest.raises(ValueError, match="unsupported automaton schema"):
            load_ha(json.dumps(document))

    def test_dangling_edge_is_rejected(self, tanks3):
        document = json.loads(export_ha(ccpn_to_ha(tanks3)))
        document["edges"][0]["dst"] = "nowhere"

        with pytest.raises(ValueError, match="nowhere"):
            load_ha(json.dumps(document))

    def test_unknown_format(self, tanks3):
        with pytest.raises(ValueError, match="unknown automaton format"):
            export_ha(ccpn_to_ha(tanks3), "svg")


class TestHierarchy:
    def test_one_macro_location_per_valve_state(self, tanks3_delem):
        macro = hierarchy(tanks3_delem, CAP)

        assert [m.id for m in macro] == ["S0", "S1", "S2", "S3"]
        assert macro[0].inner.location("111").flow == {"m1": -1, "m2": -1, "m3": 9}

    def test_dump_lists_inner_automata(self, tanks3_delem):
        document = json.loads(export_hierarchy(tanks3_delem, CAP))

        assert document["name"] == "tanks3_delem"
        assert len(document["macro_locations"]) == 4
        assert document["macro_locations"][0]["marking"] == {"Open_1": 1, "Closed_1": 0, "Open_2": 1, "Closed_2": 0}
        assert document["macro_locations"][0]["inner"]["init"]["location"] == "111"
