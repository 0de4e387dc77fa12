#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "errors.hpp"

namespace usrl {

namespace {

struct KeySpec {
  const char* name;
  const char* value;
  const char* help;
};

// Keep in sync with the README configuration table.
const KeySpec kKeys[] = {
    {"train_corpus", "", "CoNLL-2009 training corpus (rule mining, silver labels, identifier training)"},
    {"test_corpus", "", "CoNLL-2009 corpus to label, cluster and score"},
    {"dev_corpus", "", "optional CoNLL-2009 dev corpus scored after every identifier epoch"},
    {"column_mode", "gold", "gold | auto column family"},
    {"verbs_only", "true", "only predicates whose POS starts with VB"},
    {"work_dir", "work", "directory receiving every artifact"},
    {"rules_path", "", "rule file for silver; empty uses <work_dir>/rules.tsv written by mine-rules"},
    {"predicted_path", "", "arguments scored by evaluate; empty uses <work_dir>/predicted.conll"},
    {"clusters_path", "", "clusters scored by evaluate; empty uses <work_dir>/clusters.tsv"},
    {"pair_cap", "300", "pair rules kept by mine-rules"},
    {"tuple_cap", "20", "tuple rules kept by mine-rules"},
    {"argument_source", "gold", "gold | silver-seed arguments counted by mine-rules"},
    {"seed_rules", "", "rule file producing the arguments when argument_source = silver-seed"},
    {"dim_word", "100", "word embedding width"},
    {"dim_lemma", "100", "lemma embedding width"},
    {"dim_char", "100", "character BiLSTM output width (2 * char_hidden)"},
    {"dim_pos", "32", "POS embedding width"},
    {"dim_flag", "16", "predicate flag embedding width"},
    {"char_embed", "32", "character lookup width"},
    {"char_hidden", "50", "character LSTM hidden size per direction"},
    {"word_hidden", "128", "word LSTM hidden size per direction"},
    {"mlp_hidden", "128", "tanh MLP width"},
    {"zeta_schedules", "0.09:0.095,0.095:0.1,0.1:0.105,0.105:0.11", "start:end per ensemble member"},
    {"epochs", "24", "identifier epochs"},
    {"batch", "128", "identifier mini-batch size (sentence-predicate items)"},
    {"learning_rate", "0.1", "identifier Adagrad learning rate"},
    {"l2", "1e-6", "identifier L2 coefficient"},
    {"loss_form", "log", "log | literal per-token loss"},
    {"adversarial", "on", "on | off adversarial term"},
    {"threshold", "0.5", "ensemble decision threshold on the mean positive probability"},
    {"embeddings_mode", "random", "random | file"},
    {"embeddings_path", "", "external per-token vectors (DIM header) when embeddings_mode = file"},
    {"random_dim", "50", "width of random input vectors"},
    {"autoencoder", "auto", "auto | on | off; auto reduces only when the input width differs from role_dim"},
    {"ae_hidden", "512,256,128", "autoencoder hidden widths"},
    {"ae_epochs", "20", "autoencoder epochs"},
    {"ae_batch", "32", "autoencoder mini-batch size"},
    {"ae_learning_rate", "0.01", "autoencoder Adagrad learning rate"},
    {"role_dim", "50", "role embedding width D"},
    {"role_arguments", "predicted", "predicted | gold arguments fed to role induction"},
    {"window", "2", "context window on each side of the argument"},
    {"negatives", "5", "negative samples per (target, context) pair"},
    {"role_epochs", "10", "role embedding epochs"},
    {"role_batch", "16", "role embedding mini-batch size (instances)"},
    {"role_learning_rate", "0.05", "role embedding Adagrad learning rate"},
    {"role_l2", "1e-6", "role embedding L2 coefficient"},
    {"scoring", "composed", "composed | plain pair scoring"},
    {"predicate_context", "true", "use the predicate as a context of every argument"},
    {"alpha", "0.1", "violation penalty weight"},
    {"tau", "0", "merge stops when the best similarity falls below tau"},
    {"merge_lexemes", "false", "merge per-lexeme clusters once more across lexemes"},
    {"scoring_scope", "per-verb", "per-verb | global clustering scores"},
    {"seed", "1", "base seed"},
    {"threads", "1", "ensemble members trained concurrently"},
};

const KeySpec* find_spec(const std::string& key) {
  for (const auto& k : kKeys) {
    if (key == k.name) return &k;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_long(const std::string& s, long* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  long v = std::strtol(s.c_str(), &end, 10);
  if (errno || *end != '\0') return false;
  *out = v;
  return true;
}

bool parse_double(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(s.c_str(), &end);
  if (errno || *end != '\0') return false;
  *out = v;
  return true;
}

bool parse_int_list(const std::string& s, std::vector<int>* out) {
  out->clear();
  if (trim(s).empty()) return true;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    long v = 0;
    if (!parse_long(trim(item), &v)) return false;
    out->push_back(static_cast<int>(v));
  }
  return true;
}

}  // namespace

bool parse_bool(const std::string& text, bool* out) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "on" || t == "yes" || t == "1") {
    *out = true;
    return true;
  }
  if (t == "false" || t == "off" || t == "no" || t == "0") {
    *out = false;
    return true;
  }
  return false;
}

std::uint64_t fnv1a64(const std::string& data, std::uint64_t h) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

Config::Config() {
  for (const auto& k : kKeys) values_[k.name] = k.value;
}

const std::vector<std::string>& Config::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& k : kKeys) out.emplace_back(k.name);
    return out;
  }();
  return names;
}

bool Config::known(const std::string& key) { return find_spec(key) != nullptr; }

std::string Config::default_value(const std::string& key) {
  auto* spec = find_spec(key);
  if (!spec) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
  return spec->value;
}

std::string Config::description(const std::string& key) {
  auto* spec = find_spec(key);
  if (!spec) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
  return spec->help;
}

void Config::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open config " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  load_text(buffer.str(), path.string());
}

void Config::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> errors;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(origin + ":" + std::to_string(number) + ": expected key = value");
      continue;
    }
    std::string key = trim(line.substr(0, eq));
    if (!known(key)) {
      errors.push_back(origin + ":" + std::to_string(number) + ": unknown key '" + key + "'");
      continue;
    }
    values_[key] = trim(line.substr(eq + 1));
  }
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw Error(ErrorKind::config, msg);
  }
}

void Config::apply_env(const std::string& prefix) {
  for (const auto& k : kKeys) {
    std::string name = prefix + k.name;
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
    if (const char* v = std::getenv(name.c_str())) values_[k.name] = v;
  }
}

void Config::set(const std::string& key, const std::string& value) {
  if (!known(key)) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
  values_[key] = trim(value);
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
  return it->second;
}

long Config::get_int(const std::string& key) const {
  long v = 0;
  if (!parse_long(get(key), &v)) throw Error(ErrorKind::config, key + " must be an integer, got '" + get(key) + "'");
  return v;
}

double Config::get_double(const std::string& key) const {
  double v = 0;
  if (!parse_double(get(key), &v)) throw Error(ErrorKind::config, key + " must be a number, got '" + get(key) + "'");
  return v;
}

bool Config::get_bool(const std::string& key) const {
  bool v = false;
  if (!parse_bool(get(key), &v)) throw Error(ErrorKind::config, key + " must be on/off or true/false, got '" + get(key) + "'");
  return v;
}

std::vector<int> Config::get_int_list(const std::string& key) const {
  std::vector<int> v;
  if (!parse_int_list(get(key), &v)) {
    throw Error(ErrorKind::config, key + " must be a comma-separated list of integers, got '" + get(key) + "'");
  }
  return v;
}

std::uint64_t Config::seed() const {
  const std::string& s = get("seed");
  char* end = nullptr;
  errno = 0;
  unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || errno || *end != '\0' || s[0] == '-') {
    throw Error(ErrorKind::config, "seed must be a non-negative integer, got '" + s + "'");
  }
  return v;
}

std::vector<std::string> Config::problems(const std::string& subcommand) const {
  std::vector<std::string> out;
  auto v = [&](const std::string& key) -> const std::string& { return values_.at(key); };
  auto check_int = [&](const char* key, long lo) {
    long x = 0;
    if (!parse_long(v(key), &x)) out.push_back(std::string(key) + " must be an integer, got '" + v(key) + "'");
    else if (x < lo) out.push_back(std::string(key) + " must be >= " + std::to_string(lo) + ", got " + v(key));
  };
  auto check_positive = [&](const char* key) {
    double x = 0;
    if (!parse_double(v(key), &x)) out.push_back(std::string(key) + " must be a number, got '" + v(key) + "'");
    else if (!(x > 0)) out.push_back(std::string(key) + " must be > 0, got " + v(key));
  };
  auto check_nonneg = [&](const char* key) {
    double x = 0;
    if (!parse_double(v(key), &x)) out.push_back(std::string(key) + " must be a number, got '" + v(key) + "'");
    else if (!(x >= 0)) out.push_back(std::string(key) + " must be >= 0, got " + v(key));
  };
  auto check_number = [&](const char* key) {
    double x = 0;
    if (!parse_double(v(key), &x)) out.push_back(std::string(key) + " must be a number, got '" + v(key) + "'");
  };
  auto check_bool = [&](const char* key) {
    bool b = false;
    if (!parse_bool(v(key), &b)) out.push_back(std::string(key) + " must be on/off or true/false, got '" + v(key) + "'");
  };
  auto check_choice = [&](const char* key, std::initializer_list<const char*> choices) {
    for (const char* c : choices) {
      if (v(key) == c) return;
    }
    std::string msg = std::string(key) + " must be one of";
    for (const char* c : choices) msg += std::string(" ") + c;
    out.push_back(msg + ", got '" + v(key) + "'");
  };

  check_choice("column_mode", {"gold", "auto"});
  check_bool("verbs_only");
  if (v("work_dir").empty()) out.push_back("work_dir must not be empty");
  check_int("pair_cap", 1);
  check_int("tuple_cap", 1);
  check_choice("argument_source", {"gold", "silver-seed"});
  for (const char* key : {"dim_word", "dim_lemma", "dim_char", "dim_pos", "dim_flag", "char_embed", "char_hidden",
                          "word_hidden", "mlp_hidden"}) {
    check_int(key, 1);
  }
  {
    long dc = 0, ch = 0;
    if (parse_long(v("dim_char"), &dc) && parse_long(v("char_hidden"), &ch) && dc != 2 * ch) {
      out.push_back("dim_char must equal 2 * char_hidden (" + v("dim_char") + " vs " + v("char_hidden") + ")");
    }
  }
  {
    std::stringstream in(v("zeta_schedules"));
    std::string item;
    int count = 0;
    while (std::getline(in, item, ',')) {
      ++count;
      auto colon = item.find(':');
      double a = 0, b = 0;
      if (colon == std::string::npos || !parse_double(trim(item.substr(0, colon)), &a) ||
          !parse_double(trim(item.substr(colon + 1)), &b) || !(a > 0) || !(b > 0)) {
        out.push_back("zeta_schedules entry '" + item + "' must be start:end with positive values");
      }
    }
    if (count == 0) out.push_back("zeta_schedules must list at least one start:end schedule");
  }
  check_int("epochs", 1);
  check_int("batch", 1);
  check_positive("learning_rate");
  check_nonneg("l2");
  check_choice("loss_form", {"log", "literal"});
  check_bool("adversarial");
  {
    double t = 0;
    if (!parse_double(v("threshold"), &t) || !(t > 0 && t < 1)) out.push_back("threshold must lie in (0, 1), got '" + v("threshold") + "'");
  }
  check_choice("embeddings_mode", {"random", "file"});
  check_int("random_dim", 1);
  check_choice("autoencoder", {"auto", "on", "off"});
  {
    std::vector<int> hidden;
    if (!parse_int_list(v("ae_hidden"), &hidden)) out.push_back("ae_hidden must be a comma-separated list of integers");
    else if (std::any_of(hidden.begin(), hidden.end(), [](int h) { return h < 1; })) out.push_back("ae_hidden entries must be >= 1");
  }
  check_int("ae_epochs", 1);
  check_int("ae_batch", 1);
  check_positive("ae_learning_rate");
  check_int("role_dim", 1);
  check_choice("role_arguments", {"predicted", "gold"});
  check_int("window", 0);
  check_int("negatives", 0);
  check_int("role_epochs", 1);
  check_int("role_batch", 1);
  check_positive("role_learning_rate");
  check_nonneg("role_l2");
  check_choice("scoring", {"composed", "plain"});
  check_bool("predicate_context");
  check_nonneg("alpha");
  check_number("tau");
  check_bool("merge_lexemes");
  check_choice("scoring_scope", {"per-verb", "global"});
  {
    const std::string& s = v("seed");
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
      out.push_back("seed must be a non-negative integer, got '" + s + "'");
    }
  }
  check_int("threads", 1);
  {
    long w = 0;
    bool pc = false;
    if (parse_long(v("window"), &w) && parse_bool(v("predicate_context"), &pc) && w == 0 && !pc) {
      out.push_back("window = 0 with predicate_context off leaves no contexts to train on");
    }
  }

  if (subcommand.empty()) return out;
  static const std::set<std::string> needs_train = {"mine-rules", "silver", "train-identify", "pipeline"};
  static const std::set<std::string> needs_test = {"predict-identify", "train-autoencoder", "train-roles", "cluster",
                                                   "baseline-synfunc", "evaluate", "pipeline"};
  static const std::set<std::string> needs_embeddings = {"train-autoencoder", "train-roles", "pipeline"};
  auto require = [&](const char* key, const char* why) {
    if (v(key).empty()) out.push_back(std::string(key) + " is required by " + subcommand + " (" + why + ")");
    else if (!std::filesystem::exists(v(key))) out.push_back(std::string(key) + " does not exist: " + v(key));
  };
  if (needs_train.count(subcommand)) require("train_corpus", "training corpus");
  if (needs_test.count(subcommand)) require("test_corpus", "corpus to label and score");
  if (!v("dev_corpus").empty() && !std::filesystem::exists(v("dev_corpus"))) {
    out.push_back("dev_corpus does not exist: " + v("dev_corpus"));
  }
  if ((subcommand == "silver") && !v("rules_path").empty()) require("rules_path", "rule file");
  if ((subcommand == "mine-rules" || subcommand == "pipeline") && v("argument_source") == "silver-seed") {
    require("seed_rules", "argument_source = silver-seed");
  }
  if (needs_embeddings.count(subcommand) && v("embeddings_mode") == "file") {
    require("embeddings_path", "embeddings_mode = file");
  }
  return out;
}

void Config::validate(const std::string& subcommand) const {
  auto list = problems(subcommand);
  if (list.empty()) return;
  std::string msg = "invalid configuration (" + std::to_string(list.size()) + " problem" + (list.size() == 1 ? "" : "s") + "):";
  for (const auto& p : list) msg += "\n  " + p;
  throw Error(ErrorKind::config, msg);
}

std::string Config::hash() const {
  std::string text;
  for (const auto& [k, val] : values_) text += k + "=" + val + "\n";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

std::string Config::dump() const {
  std::string out;
  for (const auto& k : kKeys) out += std::string(k.name) + " = " + values_.at(k.name) + "\n";
  return out;
}

}  // namespace usrl
