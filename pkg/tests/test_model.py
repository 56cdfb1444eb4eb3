import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cyclicprob.model import (
    ModelSyntaxError,
    ModelValidationError,
    Rule,
    detect_useless,
    first_sets,
    left_corner_closure,
    make_plcg,
    parse_cfg,
    parse_markov_chain,
    parse_pcfg,
    parse_plan_model,
    plcg_switch_outcomes,
)

from conftest import G0_TEXT


def rules(*texts):
    out = []
    for text in texts:
        lhs, rhs = text.split("->")
        out.append(Rule(lhs.strip(), tuple(rhs.split())))
    return out


class TestParsePcfg:
    def test_g0(self, g0):
        assert g0.start == "s"
        assert len(g0.rules) == 3
        assert g0.nonterminals == {"s"}
        assert g0.terminals == {"a", "b"}
        assert [r.prob for r in g0.rules_for("s")] == [0.4, 0.3, 0.3]

    def test_single_rule(self):
        g = parse_pcfg("s -> a : 1.0")
        assert len(g.rules) == 1 and g.is_terminal("a")

    def test_sum_violation(self):
        with pytest.raises(ModelValidationError, match="sum to 0.8"):
            parse_pcfg("s -> s s : 0.5\ns -> a : 0.3\n")

    def test_comments_start_and_tight_spacing(self):
        g = parse_pcfg("# header\nstart x   # the start\nx->y z:1\ny -> a : 1\nz -> b:1.0\n")
        assert g.start == "x"
        assert g.rules_for("x")[0].rhs == ("y", "z")

    def test_start_override(self):
        g = parse_pcfg("s -> a : 1\nt -> s : 1\n", start="t")
        assert g.start == "t"

    def test_unknown_start(self):
        with pytest.raises(ModelValidationError, match="start symbol"):
            parse_pcfg(G0_TEXT, start="x")

    def test_epsilon_rule(self):
        with pytest.raises(ModelValidationError, match="epsilon"):
            parse_pcfg("s -> : 1.0")

    def test_useless_rejected(self):
        with pytest.raises(ModelValidationError, match="useless"):
            parse_pcfg("s -> a : 1\nx -> b : 1\n")

    def test_zero_probability_rejected(self):
        with pytest.raises(ModelValidationError):
            parse_pcfg("s -> a : 0\ns -> b : 1\n")

    def test_duplicate_rule(self):
        with pytest.raises(ModelValidationError, match="duplicate"):
            parse_pcfg("s -> a : 0.5\ns -> a : 0.5\n")

    @pytest.mark.parametrize(
        "text, line",
        [
            ("s -> a : 1\nthis is junk\n", 2),
            ("s -> a : x\n", 1),
            ("s -> a\n", 1),
            ("s -> a : 0.5 0.5\n", 1),
            ("start\ns -> a : 1\n", 1),
        ],
    )
    def test_syntax_errors_carry_line(self, text, line):
        with pytest.raises(ModelSyntaxError) as exc:
            parse_pcfg(text)
        assert exc.value.lineno == line
        assert exc.value.code == "E_SYNTAX"

    def test_plan_lines_only_in_plan_files(self):
        with pytest.raises(ModelSyntaxError):
            parse_pcfg("plan s\ns -> a : 1\n")

    def test_empty(self):
        with pytest.raises(ModelValidationError):
            parse_pcfg("# nothing\n")

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(1, 9), min_size=1, max_size=5))
    def test_normalized_weights_accepted(self, weights):
        total = sum(weights)
        text = "".join(f"s -> t{i} : {w / total!r}\n" for i, w in enumerate(weights))
        g = parse_pcfg(text)
        assert abs(sum(r.prob for r in g.rules_for("s")) - 1.0) <= 1e-9
        assert detect_useless(g.rules, g.start) == set()


class TestParseCfg:
    def test_probabilities_optional(self):
        g = parse_cfg("s -> s s\ns -> a : 0.3\ns -> b\n")
        assert all(r.prob is None for r in g.rules)

    def test_structure_still_checked(self):
        with pytest.raises(ModelValidationError):
            parse_cfg("s -> a\nx -> x\n")


class TestDetectUseless:
    def test_all_useful(self):
        assert detect_useless(rules("s -> a"), "s") == set()

    def test_non_productive(self):
        assert detect_useless(rules("s -> a", "x -> x"), "s") == {"x"}

    def test_unreachable(self):
        assert detect_useless(rules("s -> a", "x -> b"), "s") == {"x"}

    def test_reachable_only_through_unproductive_rule(self):
        # y is reachable only via s -> x y, and x never terminates
        got = detect_useless(rules("s -> a", "s -> x y", "x -> x", "y -> b"), "s")
        assert got == {"x", "y"}


class TestLeftCorner:
    def test_g0(self, g0):
        lc = left_corner_closure(g0.rules)
        assert ("s", "s") in lc and lc.is_cyclic()
        assert lc.pairs == {("s", "s"), ("s", "a"), ("s", "b")}

    def test_acyclic(self):
        lc = left_corner_closure(rules("s -> a b"))
        assert lc.pairs == {("s", "a")} and not lc.is_cyclic()

    def test_plan_grammar(self, plan_model):
        lc = left_corner_closure(plan_model.pcfg.rules)
        assert ("Pl", "Cl") in lc and ("Cl", "Pl") in lc
        assert lc.is_cyclic()

    def test_transitive(self):
        lc = left_corner_closure(rules("s -> x c", "x -> y", "y -> a"))
        assert {("s", "x"), ("s", "y"), ("s", "a"), ("x", "a")} <= lc.pairs
        assert not lc.is_cyclic()

    def test_closure_idempotent(self, plan_model):
        lc = left_corner_closure(plan_model.pcfg.rules)
        composed = {(x, z) for (x, y) in lc.pairs for (y2, z) in lc.pairs if y == y2}
        assert composed <= lc.pairs


class TestFirstSets:
    def test_g0(self, g0):
        assert first_sets(g0.rules)["s"] == {"a", "b"}

    def test_simple(self):
        assert first_sets(rules("s -> a b"))["s"] == {"a"}

    def test_plan_grammar(self, plan_model):
        assert first_sets(plan_model.pcfg.rules)["S"] == {"play", "study", "clean", "mow"}

    def test_agrees_with_closure(self, plan_model):
        r = plan_model.pcfg.rules
        lc = left_corner_closure(r)
        terms = plan_model.pcfg.terminals
        for g, ts in first_sets(r).items():
            assert ts <= terms
            assert ts == {t for (x, t) in lc.pairs if x == g and t in terms}


class TestMakePlcg:
    def test_g0_defaults(self, g0_plcg):
        assert g0_plcg.first_dist["s"] == {"a": 0.5, "b": 0.5}
        assert g0_plcg.att_dist["s"] == {"att": 0.5, "pro": 0.5}
        assert g0_plcg.lc_dist[("s", "a")] == {Rule("s", ("a",)): 1.0}
        assert g0_plcg.lc_dist[("s", "s")] == {Rule("s", ("s", "s")): 1.0}

    def test_forced_attach(self):
        m = make_plcg(parse_cfg("s -> a"))
        assert m.att_dist == {} and not m.has_att_switch("s")

    def test_att_override(self):
        m = make_plcg(parse_cfg(G0_TEXT), "att s att 0.7\natt s pro 0.3\n")
        assert m.att_dist["s"] == {"att": 0.7, "pro": 0.3}

    def test_first_and_lc_override(self):
        cfg = parse_cfg("s -> x c\ns -> a\nx -> a\nx -> b\n")
        m = make_plcg(cfg, "first s a 0.25\nfirst s b 0.75\nlc s a s -> a : 0.4\nlc s a x -> a : 0.6\n")
        assert m.first_dist["s"] == {"a": 0.25, "b": 0.75}
        assert m.lc_dist[("s", "a")] == {Rule("s", ("a",)): 0.4, Rule("x", ("a",)): 0.6}

    def test_override_must_sum_to_one(self):
        with pytest.raises(ModelValidationError, match="sums to"):
            make_plcg(parse_cfg(G0_TEXT), "att s att 0.7\n")

    @pytest.mark.parametrize(
        "params",
        ["first s c 1.0", "att x att 1.0", "lc s a s -> b : 1.0", "lc s s s -> a : 1.0"],
    )
    def test_override_unknown_outcome(self, params):
        with pytest.raises(ModelValidationError):
            make_plcg(parse_cfg(G0_TEXT), params)

    def test_override_on_forced_attach(self):
        with pytest.raises(ModelValidationError, match="forced"):
            make_plcg(parse_cfg("s -> a"), "att s att 1.0")

    def test_override_syntax(self):
        with pytest.raises(ModelSyntaxError):
            make_plcg(parse_cfg(G0_TEXT), "bogus s 1.0")

    def test_uniform_supports_match(self, plan_model):
        cfg = parse_cfg("\n".join(str(r).split(" :")[0] for r in plan_model.pcfg.rules), start="S")
        m = make_plcg(cfg)
        lc, first_out, lc_out, att_out = plcg_switch_outcomes(cfg)
        firsts = first_sets(cfg.rules)
        for g, dist in m.first_dist.items():
            assert set(dist) == firsts[g]
            assert all(abs(p - 1 / len(dist)) < 1e-15 for p in dist.values())
        for (g, b), dist in m.lc_dist.items():
            assert (g, b) in lc
            assert set(dist) == set(lc_out[(g, b)])
            for r in dist:
                assert r.rhs[0] == b and (r.lhs == g or (g, r.lhs) in lc)
        assert set(m.att_dist) == {a for a in cfg.nonterminals if (a, a) in lc}


class TestMarkovChain:
    def test_chain(self, chain):
        assert set(chain.states) == {"s0", "s3", "s4"}
        assert chain.is_absorbing("s3") and chain.is_absorbing("s4")
        assert dict(chain.successors("s0")) == {"s0": 0.5, "s3": 0.3, "s4": 0.2}

    def test_self_loop(self):
        c = parse_markov_chain("trans s0 s0 1.0")
        assert c.states == ("s0",)

    def test_sum(self):
        with pytest.raises(ModelValidationError, match="sum to 0.6"):
            parse_markov_chain("trans s0 s1 0.6")

    def test_syntax(self):
        with pytest.raises(ModelSyntaxError):
            parse_markov_chain("s0 -> s1 1.0")

    def test_duplicate_edge(self):
        with pytest.raises(ModelValidationError):
            parse_markov_chain("trans s0 s1 0.5\ntrans s0 s1 0.5\n")


class TestPlanModel:
    def test_plan_grammar(self, plan_model):
        assert plan_model.plans == ("Pl", "St", "Cl", "Mo")
        assert plan_model.plan_prob("St") == 0.4
        assert plan_model.pcfg.start == "S"

    def test_non_unit_start_rule(self):
        with pytest.raises(ModelValidationError, match="not of the form"):
            parse_plan_model("start S\nS -> a : 1\n")

    def test_subset_of_plans(self, models_dir):
        text = (models_dir / "plan.pcfg").read_text()
        text = "\n".join(ln for ln in text.splitlines() if not ln.startswith("plan ") or ln == "plan Pl")
        m = parse_plan_model(text)
        assert m.plans == ("Pl",)

    def test_plan_must_be_start_target(self):
        with pytest.raises(ModelValidationError, match="has no rule"):
            parse_plan_model("start S\nplan X\nS -> Y : 1\nY -> X : 1\nX -> b : 1\n")
