#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <json.hpp>

#include "config.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "pipeline.hpp"
#include "support.hpp"

using namespace usrl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Config fixture_config(const fs::path& work) {
  Config c;
  c.load_file(support::fixture("fixture.conf"));
  c.set("train_corpus", support::fixture("fixture20.conll").string());
  c.set("test_corpus", support::fixture("fixture20.conll").string());
  c.set("work_dir", work.string());
  return c;
}

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("defaults carry the reference hyperparameters") {
  Config c;
  CHECK(c.get("zeta_schedules") == "0.09:0.095,0.095:0.1,0.1:0.105,0.105:0.11");
  CHECK(c.get_int("epochs") == 24);
  CHECK(c.get_int("batch") == 128);
  CHECK(c.get_double("alpha") == 0.1);
  CHECK(c.get_int("dim_word") == 100);
  CHECK(c.get_int("dim_pos") == 32);
  CHECK(c.get_int("dim_flag") == 16);
  CHECK(c.get_int_list("ae_hidden") == std::vector<int>{512, 256, 128});
  CHECK(c.get_int("window") == 2);
  CHECK(c.get_int("negatives") == 5);
  CHECK(c.problems().empty());
}

TEST_CASE("config files, environment overrides and explicit settings stack") {
  Config c;
  c.load_text("# comment\nepochs = 3  # trailing\nscoring=plain\n");
  CHECK(c.get_int("epochs") == 3);
  CHECK(c.get("scoring") == "plain");
  setenv("USRL_EPOCHS", "5", 1);
  c.apply_env();
  unsetenv("USRL_EPOCHS");
  CHECK(c.get_int("epochs") == 5);
  c.set("epochs", "7");
  CHECK(c.get_int("epochs") == 7);
  try {
    c.load_text("bogus = 1\nno equals sign\nepochs = 2\n", "x.conf");
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    std::string msg = e.what();
    CHECK(msg.find("x.conf:1") != std::string::npos);
    CHECK(msg.find("x.conf:2") != std::string::npos);
  }
  CHECK_THROWS_AS(c.set("bogus", "1"), Error);
}

TEST_CASE("validation lists every problem") {
  Config c;
  c.set("epochs", "0");
  c.set("scoring", "fancy");
  c.set("threshold", "1.5");
  c.set("dim_char", "7");
  auto problems = c.problems("pipeline");
  CHECK(problems.size() == 6);  // four values plus two missing corpora
  try {
    c.validate("pipeline");
    FAIL("expected a config error");
  } catch (const Error& e) {
    std::string msg = e.what();
    for (const auto& p : problems) CHECK(msg.find(p) != std::string::npos);
  }
}

TEST_CASE("config hash depends on values only") {
  Config a, b;
  CHECK(a.hash() == b.hash());
  b.set("seed", "2");
  CHECK(a.hash() != b.hash());
  CHECK(a.hash().size() == 16);
}

TEST_CASE("fixture pipeline runs end to end, stamps manifests and reruns byte-identically") {
  const auto work = fresh_dir("usrl_pipeline_test");
  Config c = fixture_config(work);
  std::ostringstream log;
  auto result = run_subcommand(c, "pipeline", &log);
  const WorkPaths p = work_paths(c);
  for (const auto& f : {p.rules(), p.silver(), p.identifier(1), p.identifier(4), p.identifier_trace(2), p.predicted(),
                        p.autoencoder(), p.roles(), p.clusters(), p.baseline_clusters(),
                        p.report("identification", "jsonl"), p.report("clustering", "txt"),
                        p.report("baseline", "jsonl")}) {
    INFO(f.string());
    REQUIRE(fs::exists(f));
    auto manifest = nlohmann::json::parse(slurp(f.string() + ".manifest.json"));
    CHECK(manifest["config_hash"] == c.hash());
    CHECK(manifest["seed"] == 7);
    CHECK(manifest["version"] == kVersion);
  }
  CHECK(result.artifacts.size() >= 13);

  // Structural validity of the reports.
  auto id = nlohmann::json::parse(slurp(p.report("identification", "jsonl")));
  CHECK(id["report"] == "identification");
  CHECK((id["f1"] >= 0.0 && id["f1"] <= 1.0));
  std::istringstream cl(slurp(p.report("clustering", "jsonl")));
  std::string first;
  std::getline(cl, first);
  auto head = nlohmann::json::parse(first);
  CHECK(head["report"] == "clustering");
  CHECK(head["instances"].get<int>() > 0);

  // Determinism: rerun the training subcommands and compare bytes.
  std::map<fs::path, std::string> before;
  for (const auto& a : result.artifacts) before[a] = slurp(a);
  for (const char* sub : {"train-identify", "train-autoencoder", "train-roles", "cluster", "evaluate"}) {
    auto again = run_subcommand(c, sub, nullptr);
    for (const auto& a : again.artifacts) {
      INFO(a.string());
      CHECK(slurp(a) == before.at(a));
    }
  }
  fs::remove_all(work);
}

TEST_CASE("evaluate with predicted equal to gold scores F1 = 1") {
  const auto work = fresh_dir("usrl_evaluate_test");
  Config c = fixture_config(work);
  c.set("predicted_path", support::fixture("fixture20.conll").string());
  run_subcommand(c, "evaluate", nullptr);
  auto id = nlohmann::json::parse(slurp(work_paths(c).report("identification", "jsonl")));
  CHECK(id["f1"] == 1.0);
  CHECK(id["precision"] == 1.0);
  fs::remove_all(work);
}

TEST_CASE("missing inputs and unknown subcommands are reported") {
  const auto work = fresh_dir("usrl_missing_test");
  Config c = fixture_config(work);
  try {
    run_subcommand(c, "predict-identify", nullptr);
    FAIL("expected an io error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::io);
    CHECK(std::string(e.what()).find("train-identify") != std::string::npos);
  }
  CHECK_THROWS_AS(run_subcommand(c, "dance", nullptr), Error);
  fs::remove_all(work);
}
