#include <doctest.h>

#include "errors.hpp"
#include "rules.hpp"
#include "support.hpp"

using namespace usrl;

TEST_CASE("example sentence with the heuristic rules yields the expected targets") {
  Corpus c = read_conll09(support::fixture("believe.conll"), ColumnMode::gold);
  RuleSet rules = read_rules(support::fixture("heuristic.rules"));
  DependencyTree tree(c[0]);
  auto s = generate_silver_targets(tree, c[0], 0, 7, rules);
  CHECK(s.arguments == std::set<int>{1, 3, 5, 6, 8});
  CHECK(s.label_kind == LabelKind::silver);

  RuleSet pairs_only = rules;
  pairs_only.tuples.clear();
  CHECK(generate_silver_targets(tree, c[0], 0, 7, pairs_only).arguments == std::set<int>{8});
  CHECK(generate_silver_targets(tree, c[0], 0, 7, RuleSet{}).arguments.empty());
}

TEST_CASE("heuristic rule file loads exactly its pairs and tuples") {
  RuleSet rules = read_rules(support::fixture("heuristic.rules"));
  std::set<PairRule> pairs;
  for (const auto& [r, n] : rules.pairs) pairs.insert(r);
  CHECK(pairs == std::set<PairRule>{{"IN", "ADV"}, {"NNS", "SBJ"}, {"NN", "OBJ"}, {"IN", "LGS"}, {"VBZ", "OBJ"}});
  CHECK(rules.tuples.size() == 5);
  CHECK(rules.contains(TupleRule{"VC", "ADV", "RB"}));
}

TEST_CASE("silver targets match the exhaustive set definition on random trees") {
  nn::Rng rng(5);
  std::size_t checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    auto rs = support::random_sentence(rng, 1 + static_cast<int>(rng.below(15)), 0.5);
    Corpus c = parse_conll09(support::to_conll(rs), ColumnMode::gold);
    RuleSet rules = support::random_rules(rng, 1 + static_cast<int>(rng.below(25)), 1 + static_cast<int>(rng.below(15)));
    DependencyTree tree(c[0]);
    for (int p : c[0].predicates) {
      auto got = generate_silver_targets(tree, c[0], 0, p, rules).arguments;
      REQUIRE(got == support::silver_oracle(c[0], p, rules));
      CHECK(got.count(p) == 0);
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("adding rules never removes silver targets") {
  nn::Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    auto rs = support::random_sentence(rng, 2 + static_cast<int>(rng.below(12)), 0.5);
    Corpus c = parse_conll09(support::to_conll(rs), ColumnMode::gold);
    RuleSet small = support::random_rules(rng, 5, 3);
    RuleSet large = small;
    RuleSet extra = support::random_rules(rng, 10, 6);
    large.pairs.insert(extra.pairs.begin(), extra.pairs.end());
    large.tuples.insert(extra.tuples.begin(), extra.tuples.end());
    DependencyTree tree(c[0]);
    for (int p : c[0].predicates) {
      auto a = generate_silver_targets(tree, c[0], 0, p, small).arguments;
      auto b = generate_silver_targets(tree, c[0], 0, p, large).arguments;
      CHECK(std::includes(b.begin(), b.end(), a.begin(), a.end()));
    }
  }
}

TEST_CASE("mining a single-pattern corpus") {
  std::string text;
  for (int i = 0; i < 4; ++i) {
    text +=
        "1\tdog\tdog\tdog\tNN\tNN\t_\t_\t2\t2\tOBJ\tOBJ\t_\t_\tA1\n"
        "2\tsee\tsee\tsee\tVB\tVB\t_\t_\t0\t0\tROOT\tROOT\tY\tsee.01\t_\n\n";
  }
  Corpus c = parse_conll09(text, ColumnMode::gold);
  RuleSet r = mine_rules(c, gold_assignments(c, true), 300, 20);
  REQUIRE(r.pairs.size() == 1);
  CHECK(r.pairs.at({"NN", "OBJ"}) == 4);
  CHECK(r.tuples.empty());
}

TEST_CASE("mined rules equal a count-and-sort oracle") {
  nn::Rng rng(9);
  std::string text;
  for (int i = 0; i < 50; ++i) text += support::to_conll(support::random_sentence(rng, 3 + static_cast<int>(rng.below(12))));
  Corpus c = parse_conll09(text, ColumnMode::gold);
  auto gold = gold_assignments(c, false);

  std::map<PairRule, long> pairs;
  std::map<TupleRule, long> tuples;
  for (const auto& a : gold) {
    const auto& s = c[a.sentence_id];
    std::vector<int> heads;
    for (const auto& t : s.tokens) heads.push_back(t.head);
    for (int arg : a.arguments) {
      const auto& t = s.token(arg);
      if (t.head == a.predicate_index) ++pairs[{t.pos, t.deprel}];
      if (support::walk_depth(heads, arg) == support::walk_depth(heads, a.predicate_index)) {
        ++tuples[{s.token(a.predicate_index).deprel, t.deprel, t.pos}];
      }
    }
  }
  auto top = [](auto counts, std::size_t cap) {
    std::vector<std::pair<typename decltype(counts)::key_type, long>> v(counts.begin(), counts.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
    if (v.size() > cap) v.resize(cap);
    return decltype(counts)(v.begin(), v.end());
  };
  for (auto [pc, tc] : {std::pair<std::size_t, std::size_t>{300, 20}, {10, 5}, {3, 2}, {1, 1}}) {
    RuleSet r = mine_rules(c, gold, pc, tc);
    CHECK(r.pairs == top(pairs, pc));
    CHECK(r.tuples == top(tuples, tc));
    CHECK(r.pair_cap == pc);
  }
}

TEST_CASE("mining errors") {
  Corpus c = read_conll09(support::fixture("believe.conll"), ColumnMode::gold);
  try {
    mine_rules(c, {}, 300, 20);
    FAIL("expected no-evidence error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::no_evidence);
  }
  CHECK_THROWS_AS(mine_rules(Corpus{}, {}, 300, 20), Error);
  CHECK_THROWS_AS(mine_rules(c, gold_assignments(c, true), 0, 20), Error);
}

TEST_CASE("rule files round-trip, merge duplicates and check versions") {
  nn::Rng rng(3);
  RuleSet r = support::random_rules(rng, 30, 10);
  r.pair_cap = 40;
  r.tuple_cap = 12;
  CHECK(parse_rules(format_rules(r)) == r);

  RuleSet d = parse_rules(
      "USRL-RULES\t1\nCAPS\t300\t20\n# comment\nPAIR\tNN\tOBJ\t3\nPAIR\tNN\tOBJ\t4\nTUPLE\tVC\tSBJ\tNN\t2\n");
  CHECK(d.pairs.size() == 1);
  CHECK(d.pairs.at({"NN", "OBJ"}) == 7);

  auto kind = [](const std::string& text) {
    try {
      parse_rules(text);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::invalid_argument;
  };
  CHECK(kind("USRL-RULES\t2\nCAPS\t300\t20\n") == ErrorKind::version);
  CHECK(kind("USRL-RULES\t1\nCAPS\t300\t20\nPAIR\tNN\n") == ErrorKind::parse);
  CHECK(kind("USRL-RULES\t1\nCAPS\t300\t20\nPAIR\tNN\tOBJ\tmany\n") == ErrorKind::parse);
  CHECK(kind("PAIR\tNN\tOBJ\t1\n") == ErrorKind::parse);

  RuleSet capped = parse_rules("USRL-RULES\t1\nCAPS\t1\t20\nPAIR\tNN\tOBJ\t1\nPAIR\tIN\tADV\t5\n");
  CHECK(capped.pairs.size() == 1);
  CHECK(capped.contains(PairRule{"IN", "ADV"}));
}
