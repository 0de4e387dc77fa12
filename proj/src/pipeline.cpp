#include "pipeline.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "corpus.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "identifier.hpp"
#include "roleinduction.hpp"
#include "rules.hpp"

namespace usrl {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

class Run {
 public:
  Run(const Config& config, std::string subcommand, std::ostream* log)
      : config_(config), subcommand_(std::move(subcommand)), log_(log), paths_(work_paths(config)) {}

  const Config& config() const { return config_; }
  const WorkPaths& paths() const { return paths_; }
  ColumnMode mode() const { return parse_column_mode(config_.get("column_mode")); }
  bool verbs_only() const { return config_.get_bool("verbs_only"); }

  void info(const std::string& msg) {
    if (log_) *log_ << "[" << subcommand_ << "] " << msg << "\n";
  }

  Corpus corpus(const std::string& key) {
    fs::path path = config_.get(key);
    note_input(path);
    Corpus c = read_conll09(path, mode());
    info("read " + std::to_string(c.size()) + " sentences from " + path.string());
    return c;
  }

  fs::path input(const fs::path& path, const std::string& producer) {
    if (!fs::exists(path)) {
      throw Error(ErrorKind::io, path.string() + " not found; run " + producer + " first");
    }
    note_input(path);
    return path;
  }

  void note_input(const fs::path& path) { inputs_[path.string()] = hex64(fnv1a64(read_file(path))); }

  // Records an artifact written by the caller and stamps its manifest.
  void produced(const fs::path& path) {
    nlohmann::ordered_json m;
    m["artifact"] = path.filename().string();
    m["subcommand"] = subcommand_;
    m["version"] = kVersion;
    m["seed"] = config_.seed();
    m["config_hash"] = config_.hash();
    m["artifact_fnv1a64"] = hex64(fnv1a64(read_file(path)));
    nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
    for (const auto& [p, h] : inputs_) inputs.push_back({{"path", p}, {"fnv1a64", h}});
    m["inputs"] = inputs;
    nlohmann::ordered_json cfg;
    for (const auto& [k, v] : config_.values()) cfg[k] = v;
    m["config"] = cfg;
    write_file(path.string() + ".manifest.json", m.dump(2) + "\n");
    result_.artifacts.push_back(path);
    info("wrote " + path.string());
  }

  RunResult& result() { return result_; }

 private:
  const Config& config_;
  std::string subcommand_;
  std::ostream* log_;
  WorkPaths paths_;
  std::map<std::string, std::string> inputs_;
  RunResult result_;
};

std::vector<ZetaSchedule> schedules(const Config& c) {
  std::vector<ZetaSchedule> out;
  std::stringstream in(c.get("zeta_schedules"));
  std::string item;
  const int epochs = static_cast<int>(c.get_int("epochs"));
  while (std::getline(in, item, ',')) {
    auto colon = item.find(':');
    ZetaSchedule s;
    s.start = std::stod(item.substr(0, colon));
    s.end = std::stod(item.substr(colon + 1));
    s.epochs = epochs;
    s.validate();
    out.push_back(s);
  }
  return out;
}

FeatureConfig feature_config(const Config& c) {
  FeatureConfig f;
  f.dim_word = static_cast<int>(c.get_int("dim_word"));
  f.dim_lemma = static_cast<int>(c.get_int("dim_lemma"));
  f.dim_char = static_cast<int>(c.get_int("dim_char"));
  f.dim_pos = static_cast<int>(c.get_int("dim_pos"));
  f.dim_flag = static_cast<int>(c.get_int("dim_flag"));
  f.char_embed = static_cast<int>(c.get_int("char_embed"));
  f.char_hidden = static_cast<int>(c.get_int("char_hidden"));
  f.word_hidden = static_cast<int>(c.get_int("word_hidden"));
  f.mlp_hidden = static_cast<int>(c.get_int("mlp_hidden"));
  f.validate();
  return f;
}

std::uint64_t member_seed(const Config& c, int member) { return nn::derive_seed(c.seed(), 100 + member); }

fs::path rules_file(const Config& c) {
  return c.get("rules_path").empty() ? work_paths(c).rules() : fs::path(c.get("rules_path"));
}

fs::path predicted_file(const Config& c) {
  return c.get("predicted_path").empty() ? work_paths(c).predicted() : fs::path(c.get("predicted_path"));
}

fs::path clusters_file(const Config& c) {
  return c.get("clusters_path").empty() ? work_paths(c).clusters() : fs::path(c.get("clusters_path"));
}

void mine_rules_cmd(Run& run) {
  const Config& c = run.config();
  Corpus train = run.corpus("train_corpus");
  Assignments arguments;
  if (c.get("argument_source") == "gold") {
    arguments = gold_assignments(train, run.verbs_only());
  } else {
    fs::path seed_path = run.input(c.get("seed_rules"), "a rule file");
    arguments = generate_silver_corpus(train, read_rules(seed_path), run.verbs_only());
  }
  RuleSet rules = mine_rules(train, arguments, static_cast<std::size_t>(c.get_int("pair_cap")),
                             static_cast<std::size_t>(c.get_int("tuple_cap")));
  run.info("kept " + std::to_string(rules.pairs.size()) + " pairs and " + std::to_string(rules.tuples.size()) +
           " tuples");
  write_rules(run.paths().rules(), rules);
  run.produced(run.paths().rules());
}

void silver_cmd(Run& run) {
  const Config& c = run.config();
  Corpus train = run.corpus("train_corpus");
  RuleSet rules = read_rules(run.input(rules_file(c), "mine-rules"));
  Assignments silver = generate_silver_corpus(train, rules, run.verbs_only());
  std::size_t args = 0;
  for (const auto& a : silver) args += a.arguments.size();
  run.info(std::to_string(args) + " silver arguments over " + std::to_string(silver.size()) + " predicates");
  write_conll09(run.paths().silver(), with_argument_columns(train, silver));
  run.produced(run.paths().silver());
}

void train_identify_cmd(Run& run) {
  const Config& c = run.config();
  fs::path silver_path = run.input(run.paths().silver(), "silver");
  Corpus silver_corpus = read_conll09(silver_path, run.mode());
  Assignments silver = gold_assignments(silver_corpus, run.verbs_only());
  for (auto& a : silver) a.label_kind = LabelKind::silver;
  const FeatureConfig features = feature_config(c);
  const auto members = schedules(c);

  std::optional<Corpus> dev;
  Assignments dev_gold;
  if (!c.get("dev_corpus").empty()) {
    dev = run.corpus("dev_corpus");
    dev_gold = gold_assignments(*dev, run.verbs_only());
  }
  const double threshold = c.get_double("threshold");
  DevScorer scorer = nullptr;
  if (dev) {
    scorer = [&](const IdentifierModel& model) {
      const IdentifierModel* one[] = {&model};
      return score_identification(ensemble_predict_corpus(one, *dev, run.verbs_only(), threshold), dev_gold).f1;
    };
  }

  std::vector<std::optional<TrainedIdentifier>> trained(members.size());
  std::vector<std::exception_ptr> failures(members.size());
  auto train_member = [&](std::size_t k) {
    try {
      IdentifierTrainOptions o;
      o.schedule = members[k];
      o.batch = static_cast<int>(c.get_int("batch"));
      o.seed = member_seed(c, static_cast<int>(k));
      o.learning_rate = c.get_double("learning_rate");
      o.l2 = c.get_double("l2");
      o.loss_form = parse_loss_form(c.get("loss_form"));
      o.adversarial = c.get_bool("adversarial");
      trained[k] = train_identifier(silver_corpus, silver, features, o, scorer);
    } catch (...) {
      failures[k] = std::current_exception();
    }
  };
  const std::size_t threads = static_cast<std::size_t>(c.get_int("threads"));
  run.info("training " + std::to_string(members.size()) + " ensemble members on " + std::to_string(silver.size()) +
           " predicates");
  for (std::size_t begin = 0; begin < members.size(); begin += threads) {
    const std::size_t end = std::min(members.size(), begin + threads);
    if (end - begin == 1) {
      train_member(begin);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t k = begin; k < end; ++k) pool.emplace_back(train_member, k);
      for (auto& t : pool) t.join();
    }
  }
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  for (std::size_t k = 0; k < members.size(); ++k) {
    const int member = static_cast<int>(k) + 1;
    const auto& last = trained[k]->trace.back();
    std::ostringstream msg;
    msg << "member " << member << ": zeta " << members[k].start << "->" << members[k].end << ", final main loss "
        << last.main_loss;
    if (last.dev_f1) msg << ", dev F1 " << *last.dev_f1;
    run.info(msg.str());
    trained[k]->model.save(run.paths().identifier(member));
    run.produced(run.paths().identifier(member));
    write_file(run.paths().identifier_trace(member), format_trace_csv(trained[k]->trace));
    run.produced(run.paths().identifier_trace(member));
  }
}

void predict_identify_cmd(Run& run) {
  const Config& c = run.config();
  const std::size_t members = schedules(c).size();
  std::vector<IdentifierModel> models;
  for (std::size_t k = 1; k <= members; ++k) {
    models.push_back(IdentifierModel::load(run.input(run.paths().identifier(static_cast<int>(k)), "train-identify")));
  }
  std::vector<const IdentifierModel*> pointers;
  for (const auto& m : models) pointers.push_back(&m);
  Corpus test = run.corpus("test_corpus");
  Assignments predicted = ensemble_predict_corpus(pointers, test, run.verbs_only(), c.get_double("threshold"));
  std::size_t args = 0;
  for (const auto& a : predicted) args += a.arguments.size();
  run.info(std::to_string(args) + " predicted arguments over " + std::to_string(predicted.size()) + " predicates");
  write_conll09(run.paths().predicted(), with_argument_columns(test, predicted));
  run.produced(run.paths().predicted());
}

// Role-induction inputs shared by train-autoencoder, train-roles, cluster and baseline-synfunc.
struct RoleInputs {
  Corpus corpus;
  Assignments arguments;
  std::vector<ArgInstance> instances;
};

RoleInputs role_inputs(Run& run) {
  const Config& c = run.config();
  RoleInputs in;
  in.corpus = run.corpus("test_corpus");
  if (c.get("role_arguments") == "gold") {
    in.arguments = gold_assignments(in.corpus, run.verbs_only());
  } else {
    Corpus predicted = read_conll09(run.input(run.paths().predicted(), "predict-identify"), run.mode());
    if (predicted.size() != in.corpus.size()) {
      throw Error(ErrorKind::structure, "predicted file and test corpus differ in sentence count");
    }
    in.arguments = gold_assignments(predicted, run.verbs_only());
    for (auto& a : in.arguments) {
      a.label_kind = LabelKind::predicted;
      a.roles.clear();
    }
  }
  in.instances = build_instances(in.corpus, in.arguments, static_cast<int>(c.get_int("window")));
  if (in.instances.empty()) throw Error(ErrorKind::no_evidence, "no argument instances for role induction");
  run.info(std::to_string(in.instances.size()) + " argument instances");
  return in;
}

EmbeddingSource embedding_source(Run& run) {
  const Config& c = run.config();
  if (c.get("embeddings_mode") == "file") return EmbeddingSource::load(run.input(c.get("embeddings_path"), "an encoder"));
  return EmbeddingSource::random(static_cast<int>(c.get_int("random_dim")), nn::derive_seed(c.seed(), 400));
}

bool autoencoder_used(const Config& c, const EmbeddingSource& source) {
  const std::string& mode = c.get("autoencoder");
  if (mode == "on") return true;
  if (mode == "off") return false;
  return source.dim() != c.get_int("role_dim");
}

AutoencoderConfig autoencoder_config(const Config& c) {
  AutoencoderConfig a;
  a.hidden = c.get_int_list("ae_hidden");
  a.bottleneck = static_cast<int>(c.get_int("role_dim"));
  a.epochs = static_cast<int>(c.get_int("ae_epochs"));
  a.batch = static_cast<int>(c.get_int("ae_batch"));
  a.learning_rate = c.get_double("ae_learning_rate");
  return a;
}

std::string loss_csv(const std::vector<double>& losses) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < losses.size(); ++e) out << e << ',' << losses[e] << '\n';
  return out.str();
}

void train_autoencoder_cmd(Run& run) {
  const Config& c = run.config();
  RoleInputs in = role_inputs(run);
  EmbeddingSource source = embedding_source(run);
  std::set<std::pair<std::size_t, int>> keys;
  for (const auto& inst : in.instances) {
    keys.insert({inst.sentence_id, inst.arg_token});
    keys.insert({inst.sentence_id, inst.predicate_index});
    for (int t : inst.context) keys.insert({inst.sentence_id, t});
  }
  std::vector<Vector> vectors;
  for (const auto& [sid, token] : keys) {
    if (auto v = source.lookup(sid, token, in.corpus[sid].token(token).form)) vectors.push_back(*v);
  }
  run.info("training autoencoder " + std::to_string(source.dim()) + " -> " + c.get("role_dim") + " on " +
           std::to_string(vectors.size()) + " vectors");
  auto trained = train_autoencoder(vectors, autoencoder_config(c), nn::derive_seed(c.seed(), 300));
  run.info("reconstruction loss " + std::to_string(trained.epoch_loss.front()) + " -> " +
           std::to_string(trained.epoch_loss.back()));
  trained.model.save(run.paths().autoencoder());
  run.produced(run.paths().autoencoder());
  write_file(run.paths().autoencoder_trace(), loss_csv(trained.epoch_loss));
  run.produced(run.paths().autoencoder_trace());
}

void train_roles_cmd(Run& run) {
  const Config& c = run.config();
  RoleInputs in = role_inputs(run);
  EmbeddingSource source = embedding_source(run);
  std::optional<Autoencoder> ae;
  if (autoencoder_used(c, source)) {
    ae = Autoencoder::load(run.input(run.paths().autoencoder(), "train-autoencoder"));
    if (ae->output_dim() != c.get_int("role_dim") || ae->input_dim() != source.dim()) {
      throw Error(ErrorKind::config, "autoencoder checkpoint maps " + std::to_string(ae->input_dim()) + " -> " +
                                         std::to_string(ae->output_dim()) + ", rerun train-autoencoder");
    }
  } else if (source.dim() != c.get_int("role_dim")) {
    throw Error(ErrorKind::config, "input width " + std::to_string(source.dim()) + " differs from role_dim " +
                                       c.get("role_dim") + " and the autoencoder is off");
  }
  EncodedTokens tokens = encode_tokens_for(in.corpus, in.instances, source, ae ? &*ae : nullptr);
  RoleTrainOptions o;
  o.negatives = static_cast<int>(c.get_int("negatives"));
  o.epochs = static_cast<int>(c.get_int("role_epochs"));
  o.batch = static_cast<int>(c.get_int("role_batch"));
  o.learning_rate = c.get_double("role_learning_rate");
  o.l2 = c.get_double("role_l2");
  o.scoring = parse_scoring(c.get("scoring"));
  o.predicate_context = c.get_bool("predicate_context");
  o.seed = nn::derive_seed(c.seed(), 200);
  auto trained = train_role_embeddings(in.instances, tokens, o);
  if (trained.skipped) run.info("warning: " + std::to_string(trained.skipped) + " instances have no context and were skipped");
  run.info("objective per pair " + std::to_string(trained.epoch_loss.front()) + " -> " +
           std::to_string(trained.epoch_loss.back()));
  trained.model.save(run.paths().roles());
  run.produced(run.paths().roles());
  write_file(run.paths().roles_trace(), loss_csv(trained.epoch_loss));
  run.produced(run.paths().roles_trace());
}

void cluster_cmd(Run& run) {
  const Config& c = run.config();
  RoleInputs in = role_inputs(run);
  RoleModel model = RoleModel::load(run.input(run.paths().roles(), "train-roles"));
  if (model.instance_count() != in.instances.size()) {
    throw Error(ErrorKind::structure, "roles checkpoint covers " + std::to_string(model.instance_count()) +
                                          " instances but the current arguments give " +
                                          std::to_string(in.instances.size()) + "; rerun train-roles");
  }
  for (std::size_t i = 0; i < in.instances.size(); ++i) {
    const auto& inst = in.instances[i];
    if (model.instance_keys()[i] != std::make_tuple(inst.sentence_id, inst.predicate_index, inst.arg_token)) {
      throw Error(ErrorKind::structure, "roles checkpoint does not match the current arguments; rerun train-roles");
    }
  }
  std::vector<Vector> vectors;
  for (std::size_t i = 0; i < in.instances.size(); ++i) vectors.push_back(model.argument_vector(i));
  const double alpha = c.get_double("alpha");
  const double tau = c.get_double("tau");
  std::vector<RoleClustering> clusterings;
  std::size_t total = 0;
  for (const auto& [lexeme, members] : group_by_lexeme(in.instances)) {
    clusterings.push_back(agglomerate(members, in.instances, vectors, alpha, tau));
    total += clusterings.back().clusters.size();
  }
  run.info(std::to_string(total) + " clusters over " + std::to_string(clusterings.size()) + " lexemes");
  auto rows = assign_cluster_ids(clusterings, in.instances, vectors, c.get_bool("merge_lexemes"), alpha, tau);
  write_clusters_tsv(run.paths().clusters(), rows);
  run.produced(run.paths().clusters());
}

void baseline_cmd(Run& run) {
  RoleInputs in = role_inputs(run);
  std::vector<RoleClustering> clusterings;
  for (const auto& [lexeme, members] : group_by_lexeme(in.instances)) {
    clusterings.push_back(syntactic_function_baseline(members, in.instances));
  }
  auto rows = assign_cluster_ids(clusterings, in.instances, {}, false, 0.0, 0.0);
  write_clusters_tsv(run.paths().baseline_clusters(), rows);
  run.produced(run.paths().baseline_clusters());
}

void evaluate_cmd(Run& run, std::ostream* log) {
  const Config& c = run.config();
  Corpus test = run.corpus("test_corpus");
  Assignments gold = gold_assignments(test, run.verbs_only());
  bool scored = false;
  auto emit = [&](const std::string& name, const std::string& table, const std::string& json) {
    if (log) *log << table;
    write_file(run.paths().report(name, "txt"), table);
    run.produced(run.paths().report(name, "txt"));
    write_file(run.paths().report(name, "jsonl"), json);
    run.produced(run.paths().report(name, "jsonl"));
    scored = true;
  };
  const fs::path predicted_path = predicted_file(c);
  if (fs::exists(predicted_path)) {
    run.note_input(predicted_path);
    Corpus predicted_corpus = read_conll09(predicted_path, run.mode());
    Assignments predicted = gold_assignments(predicted_corpus, run.verbs_only());
    for (auto& a : predicted) a.label_kind = LabelKind::predicted;
    auto report = score_identification(predicted, gold);
    emit("identification", format_identification_table(report), format_identification_json(report));
  }
  const auto scope = parse_scoring_scope(c.get("scoring_scope"));
  const GoldRoles roles = gold_roles(gold);
  const std::pair<std::string, fs::path> clusterings[] = {{"clustering", clusters_file(c)},
                                                          {"baseline", run.paths().baseline_clusters()}};
  for (const auto& [name, path] : clusterings) {
    if (!fs::exists(path)) continue;
    run.note_input(path);
    auto report = score_clustering(read_clusters_tsv(path), roles, scope);
    emit(name, format_clustering_table(report), format_clustering_json(report));
  }
  if (!scored) {
    throw Error(ErrorKind::io, "nothing to evaluate: none of " + predicted_path.string() + ", " +
                                   clusters_file(c).string() + ", " + run.paths().baseline_clusters().string() +
                                   " exists");
  }
}

using Step = std::function<void(Run&)>;

}  // namespace

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names = {"mine-rules",      "silver",      "train-identify", "predict-identify",
                                                 "train-autoencoder", "train-roles", "cluster",        "baseline-synfunc",
                                                 "evaluate",        "pipeline"};
  return names;
}

WorkPaths work_paths(const Config& config) { return WorkPaths{config.get("work_dir")}; }

RunResult run_subcommand(const Config& config, const std::string& subcommand, std::ostream* log) {
  const auto& names = subcommand_names();
  if (std::find(names.begin(), names.end(), subcommand) == names.end()) {
    throw Error(ErrorKind::invalid_argument, "unknown subcommand '" + subcommand + "'");
  }
  config.validate(subcommand);
  std::error_code ec;
  fs::create_directories(config.get("work_dir"), ec);
  if (ec) throw Error(ErrorKind::io, "cannot create " + config.get("work_dir") + ": " + ec.message());

  const std::map<std::string, Step> steps = {
      {"mine-rules", mine_rules_cmd},
      {"silver", silver_cmd},
      {"train-identify", train_identify_cmd},
      {"predict-identify", predict_identify_cmd},
      {"train-autoencoder", train_autoencoder_cmd},
      {"train-roles", train_roles_cmd},
      {"cluster", cluster_cmd},
      {"baseline-synfunc", baseline_cmd},
      {"evaluate", [log](Run& r) { evaluate_cmd(r, log); }},
  };
  if (subcommand != "pipeline") {
    Run run(config, subcommand, log);
    steps.at(subcommand)(run);
    return run.result();
  }

  std::vector<std::string> chain;
  if (config.get("rules_path").empty()) chain.push_back("mine-rules");
  chain.insert(chain.end(), {"silver", "train-identify", "predict-identify"});
  {
    Run probe(config, "pipeline", nullptr);
    if (autoencoder_used(config, embedding_source(probe))) chain.push_back("train-autoencoder");
  }
  chain.insert(chain.end(), {"train-roles", "cluster", "baseline-synfunc", "evaluate"});
  RunResult all;
  for (const auto& name : chain) {
    Run run(config, name, log);
    steps.at(name)(run);
    all.artifacts.insert(all.artifacts.end(), run.result().artifacts.begin(), run.result().artifacts.end());
  }
  return all;
}

}  // namespace usrl
