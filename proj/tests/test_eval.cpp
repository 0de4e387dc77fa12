#include <doctest.h>

#include <filesystem>
#include <json.hpp>

#include "errors.hpp"
#include "eval.hpp"
#include "support.hpp"

using namespace usrl;

namespace {

ArgumentAssignment assign(std::size_t sid, int pred, std::set<int> args) {
  ArgumentAssignment a;
  a.sentence_id = sid;
  a.predicate_index = pred;
  a.arguments = std::move(args);
  return a;
}

ClusteringReport score_labels(const std::vector<int>& cluster_of, const std::vector<int>& class_of,
                              ScoringScope scope = ScoringScope::per_verb) {
  std::vector<ClusteredInstance> c;
  GoldRoles g;
  support::single_verb_instances(cluster_of, class_of, &c, &g);
  return score_clustering(c, g, scope);
}

}  // namespace

TEST_CASE("identification scores") {
  Assignments gold = {assign(0, 3, {1, 2}), assign(1, 2, {1})};
  auto same = score_identification(gold, gold);
  CHECK(same.precision == 1.0);
  CHECK(same.recall == 1.0);
  CHECK(same.f1 == 1.0);

  auto half = score_identification({assign(0, 3, {1, 2})}, {assign(0, 3, {2, 3})});
  CHECK(half.tp == 1);
  CHECK(half.precision == 0.5);
  CHECK(half.recall == 0.5);
  CHECK(half.f1 == 0.5);

  auto empty = score_identification({assign(0, 3, {})}, {assign(0, 3, {1})});
  CHECK(empty.precision == 0.0);
  CHECK(empty.precision_undefined);
  CHECK(empty.recall == 0.0);

  auto one_sided = score_identification({assign(0, 3, {1}), assign(5, 1, {2})}, {assign(0, 3, {1})});
  CHECK(one_sided.fp == 1);
  CHECK_FALSE(one_sided.warnings.empty());
}

TEST_CASE("identification scores match direct counting on random assignments") {
  nn::Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    Assignments pred, gold;
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      std::set<int> p, g;
      for (int t = 1; t <= 12; ++t) {
        if (rng.uniform() < 0.3) p.insert(t);
        if (rng.uniform() < 0.3) g.insert(t);
      }
      for (int t = 1; t <= 12; ++t) {
        tp += p.count(t) && g.count(t);
        fp += p.count(t) && !g.count(t);
        fn += !p.count(t) && g.count(t);
      }
      pred.push_back(assign(s, 13, p));
      gold.push_back(assign(s, 13, g));
    }
    auto r = score_identification(pred, gold);
    CHECK(r.tp == tp);
    CHECK(r.fp == fp);
    CHECK(r.fn == fn);
    const double P = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double R = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    CHECK(std::abs(r.precision - P) <= 1e-12);
    CHECK(std::abs(r.recall - R) <= 1e-12);
    CHECK(std::abs(r.f1 - (P + R > 0 ? 2 * P * R / (P + R) : 0.0)) <= 1e-12);
  }
}

TEST_CASE("hand-derived purity and collocation fixture") {
  // C1 = {a1, a2, a3}, C2 = {a4, a5}; G1 = {a1, a2}, G2 = {a3, a4, a5}.
  auto r = score_labels({1, 1, 1, 2, 2}, {1, 1, 2, 2, 2});
  CHECK(std::abs(r.purity - 0.8) <= 1e-12);
  CHECK(std::abs(r.collocation - 0.8) <= 1e-12);
  CHECK(std::abs(r.f1 - 0.8) <= 1e-12);
  REQUIRE(r.per_role.size() == 2);
  CHECK(r.per_role[0].key == "A1");
  CHECK(r.per_role[0].collocation == 1.0);

  auto perfect = score_labels({4, 4, 9, 9, 9}, {1, 1, 2, 2, 2});
  CHECK(perfect.purity == 1.0);
  CHECK(perfect.collocation == 1.0);
  CHECK(perfect.f1 == 1.0);
  CHECK(harmonic_f1(0.0, 0.7) == 0.0);
}

TEST_CASE("purity and collocation match the brute-force oracle and its invariances") {
  nn::Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<int> cl, gl;
    for (std::size_t i = 0; i < n; ++i) {
      cl.push_back(static_cast<int>(rng.below(1 + rng.below(6))));
      gl.push_back(static_cast<int>(rng.below(1 + rng.below(6))));
    }
    auto o = support::brute_force_pu_co(cl, gl);
    for (auto scope : {ScoringScope::per_verb, ScoringScope::global}) {
      auto r = score_labels(cl, gl, scope);
      CHECK(std::abs(r.purity - o.purity) <= 1e-12);
      CHECK(std::abs(r.collocation - o.collocation) <= 1e-12);
      CHECK(std::abs(r.f1 - o.f1) <= 1e-12);
      CHECK((r.f1 == 0.0) == (r.purity * r.collocation == 0.0));
    }
    // Relabelling clusters and permuting instances change nothing.
    std::vector<int> relabelled;
    for (int c : cl) relabelled.push_back(100 - 3 * c);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<int> pc, pg;
    for (auto i : perm) pc.push_back(relabelled[i]), pg.push_back(gl[i]);
    auto p = support::brute_force_pu_co(pc, pg);
    auto rp = score_labels(pc, pg);
    CHECK(std::abs(rp.purity - o.purity) <= 1e-12);
    CHECK(std::abs(rp.collocation - o.collocation) <= 1e-12);
    CHECK(std::abs(p.purity - o.purity) <= 1e-12);

    // Merging two clusters never increases purity; splitting one never increases collocation.
    if (n >= 2) {
      std::vector<int> merged = cl;
      for (auto& c : merged) {
        if (c == cl[1]) c = cl[0];
      }
      CHECK(score_labels(merged, gl).purity <= o.purity + 1e-12);
      std::vector<int> split = cl;
      for (std::size_t i = 0; i < n; ++i) {
        if (split[i] == cl[0] && rng.uniform() < 0.5) split[i] = 1000;
      }
      CHECK(score_labels(split, gl).collocation <= o.collocation + 1e-12);
    }
  }
}

TEST_CASE("per-verb aggregation is the count-weighted mean of the verb rows") {
  nn::Rng rng(4);
  std::vector<ClusteredInstance> c;
  GoldRoles g;
  for (int i = 0; i < 60; ++i) {
    const std::string lex = "v" + std::to_string(rng.below(4));
    c.push_back({static_cast<std::size_t>(i), 1, 2, lex, static_cast<int>(rng.below(3))});
    g[{static_cast<std::size_t>(i), 1, 2}] = "A" + std::to_string(rng.below(3));
  }
  c.push_back({999, 1, 2, "v0", 0});  // no gold role
  auto r = score_clustering(c, g, ScoringScope::per_verb);
  CHECK(r.excluded == 1);
  CHECK(r.instances == 60);
  double pu = 0, co = 0;
  std::size_t total = 0;
  for (const auto& row : r.per_verb) {
    pu += row.purity * static_cast<double>(row.count);
    co += row.collocation * static_cast<double>(row.count);
    total += row.count;
  }
  CHECK(total == 60);
  CHECK(std::abs(pu / 60 - r.purity) <= 1e-12);
  CHECK(std::abs(co / 60 - r.collocation) <= 1e-12);
  for (std::size_t i = 1; i < r.per_verb.size(); ++i) CHECK(r.per_verb[i - 1].count >= r.per_verb[i].count);
  CHECK_THROWS_AS(score_clustering({}, g, ScoringScope::per_verb), Error);
}

TEST_CASE("per-role rows group adjunct roles and report absent roles") {
  std::vector<ClusteredInstance> c = {{0, 1, 2, "v", 0}, {0, 1, 3, "v", 0}, {0, 1, 4, "v", 1}};
  GoldRoles g = {{{0, 1, 2}, "AM-TMP"}, {{0, 1, 3}, "TMP"}, {{0, 1, 4}, "A0"}, {{0, 1, 9}, "A2"}};
  CHECK(role_group("AM-TMP") == "TMP");
  std::vector<std::string> notices;
  auto rows = per_role_breakdown(c, g, ScoringScope::per_verb, &notices);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].key == "TMP");
  CHECK(rows[1].count == 2);
  CHECK(rows[1].purity == 1.0);
  CHECK(rows[1].collocation == 1.0);
  REQUIRE(notices.size() == 1);
  CHECK(notices[0].find("A2") != std::string::npos);
}

TEST_CASE("reports render as tables and JSON lines; clusters round-trip through TSV") {
  auto r = score_labels({1, 1, 1, 2, 2}, {1, 1, 2, 2, 2});
  std::string table = format_clustering_table(r);
  CHECK(table.find(kPerRoleDefinition) != std::string::npos);
  std::istringstream lines(format_clustering_json(r));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    auto j = nlohmann::json::parse(line);
    CHECK(j.contains("report"));
    ++count;
  }
  CHECK(count >= 3);
  auto id = nlohmann::json::parse(format_identification_json(score_identification({assign(0, 1, {2})}, {assign(0, 1, {2})})));
  CHECK(id["f1"] == 1.0);

  std::vector<ClusteredInstance> rows = {{0, 3, 1, "buy", 0}, {2, 5, 4, "sell", 7}};
  auto path = std::filesystem::temp_directory_path() / "usrl_clusters_test.tsv";
  write_clusters_tsv(path, rows);
  auto back = read_clusters_tsv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[1].lexeme == "sell");
  CHECK(back[1].cluster_id == 7);
  CHECK(back[0].predicate_token == 3);
  std::filesystem::remove(path);
}

TEST_CASE("a single role clustered perfectly scores one in its row") {
  std::vector<ClusteredInstance> c = {{0, 1, 2, "v", 5}, {1, 1, 3, "v", 5}, {2, 4, 1, "v", 5}};
  GoldRoles g = {{{0, 1, 2}, "A0"}, {{1, 1, 3}, "A0"}, {{2, 4, 1}, "A0"}};
  auto r = score_clustering(c, g, ScoringScope::per_verb);
  REQUIRE(r.per_role.size() == 1);
  CHECK(r.per_role[0].key == "A0");
  CHECK(r.per_role[0].purity == 1.0);
  CHECK(r.per_role[0].collocation == 1.0);
  CHECK(r.f1 == 1.0);
}
