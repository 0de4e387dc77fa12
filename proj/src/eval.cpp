#include "eval.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"

namespace usrl {

namespace {

using Key = std::pair<std::size_t, int>;

double ratio(std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }

// Contingency counts of one scoring unit: cluster -> class -> count.
struct Contingency {
  std::map<int, std::map<std::string, std::size_t>> by_cluster;
  std::map<std::string, std::map<int, std::size_t>> by_class;
  std::size_t n = 0;

  void add(int cluster, const std::string& cls) {
    ++by_cluster[cluster][cls];
    ++by_class[cls][cluster];
    ++n;
  }

  std::size_t purity_sum() const {
    std::size_t total = 0;
    for (const auto& [c, classes] : by_cluster) {
      std::size_t best = 0;
      for (const auto& [cls, count] : classes) best = std::max(best, count);
      total += best;
    }
    return total;
  }

  std::size_t collocation_sum() const {
    std::size_t total = 0;
    for (const auto& [cls, clusters] : by_class) {
      std::size_t best = 0;
      for (const auto& [c, count] : clusters) best = std::max(best, count);
      total += best;
    }
    return total;
  }
};

std::string fixed(double v, int digits = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

}  // namespace

const char* const kPerRoleDefinition =
    "per-role: CO_j = sum max_i |G_j n C_i| / sum |G_j|; PU_j = sum max_k |G_k n C*_j| / sum |C*_j| where C*_j is "
    "the cluster holding most of G_j; sums over lexemes (per-verb) or pooled (global); roles grouped with the AM- "
    "prefix removed";

double harmonic_f1(double a, double b) { return a + b == 0.0 ? 0.0 : 2.0 * a * b / (a + b); }

IdentificationReport score_identification(const Assignments& predicted, const Assignments& gold) {
  std::map<Key, const ArgumentAssignment*> pred_index, gold_index;
  for (const auto& a : predicted) pred_index[{a.sentence_id, a.predicate_index}] = &a;
  for (const auto& a : gold) gold_index[{a.sentence_id, a.predicate_index}] = &a;

  IdentificationReport report;
  for (const auto& [key, p] : pred_index) {
    auto it = gold_index.find(key);
    if (it == gold_index.end()) {
      report.fp += p->arguments.size();
      report.warnings.push_back("predicate " + std::to_string(key.second) + " of sentence " +
                                std::to_string(key.first) + " has predictions but no gold entry");
      continue;
    }
    for (int arg : p->arguments) {
      if (it->second->arguments.count(arg)) {
        ++report.tp;
      } else {
        ++report.fp;
      }
    }
  }
  for (const auto& [key, g] : gold_index) {
    auto it = pred_index.find(key);
    if (it == pred_index.end()) {
      report.fn += g->arguments.size();
      report.warnings.push_back("predicate " + std::to_string(key.second) + " of sentence " +
                                std::to_string(key.first) + " has gold arguments but no prediction entry");
      continue;
    }
    for (int arg : g->arguments) {
      if (!it->second->arguments.count(arg)) ++report.fn;
    }
  }
  report.precision_undefined = report.tp + report.fp == 0;
  report.recall_undefined = report.tp + report.fn == 0;
  report.precision = ratio(report.tp, report.tp + report.fp);
  report.recall = ratio(report.tp, report.tp + report.fn);
  report.f1 = harmonic_f1(report.precision, report.recall);
  return report;
}

std::string to_string(ScoringScope scope) { return scope == ScoringScope::per_verb ? "per-verb" : "global"; }

ScoringScope parse_scoring_scope(const std::string& text) {
  if (text == "per-verb") return ScoringScope::per_verb;
  if (text == "global") return ScoringScope::global;
  throw Error(ErrorKind::invalid_argument, "scoring scope must be per-verb or global, got '" + text + "'");
}

GoldRoles gold_roles(const Assignments& gold) {
  GoldRoles out;
  for (const auto& a : gold) {
    for (const auto& [arg, role] : a.roles) out[{a.sentence_id, a.predicate_index, arg}] = role;
  }
  return out;
}

std::string role_group(const std::string& role) { return role.rfind("AM-", 0) == 0 ? role.substr(3) : role; }

std::vector<ClusterScoreRow> per_role_breakdown(const std::vector<ClusteredInstance>& clustering, const GoldRoles& gold,
                                                ScoringScope scope, std::vector<std::string>* notices) {
  std::map<std::string, Contingency> units;
  std::set<std::string> lexemes;
  for (const auto& c : clustering) {
    auto it = gold.find({c.sentence_id, c.predicate_token, c.arg_token});
    if (it == gold.end()) continue;
    units[scope == ScoringScope::per_verb ? c.lexeme : std::string()].add(c.cluster_id, role_group(it->second));
    lexemes.insert(c.lexeme);
  }
  struct Acc {
    std::size_t co_num = 0, co_den = 0, pu_num = 0, pu_den = 0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& [unit, table] : units) {
    for (const auto& [role, clusters] : table.by_class) {
      int best_cluster = 0;
      std::size_t best = 0, size = 0;
      for (const auto& [c, count] : clusters) {
        size += count;
        if (count > best) {
          best = count;
          best_cluster = c;
        }
      }
      std::size_t dominant = 0, cluster_size = 0;
      for (const auto& [cls, count] : table.by_cluster.at(best_cluster)) {
        dominant = std::max(dominant, count);
        cluster_size += count;
      }
      auto& a = acc[role];
      a.co_num += best;
      a.co_den += size;
      a.pu_num += dominant;
      a.pu_den += cluster_size;
    }
  }
  if (notices) {
    std::set<std::string> gold_groups;
    for (const auto& [key, role] : gold) gold_groups.insert(role_group(role));
    for (const auto& role : gold_groups) {
      if (!acc.count(role)) notices->push_back("role " + role + " has no clustered instances; skipped");
    }
  }
  std::vector<ClusterScoreRow> rows;
  for (const auto& [role, a] : acc) {
    ClusterScoreRow row;
    row.key = role;
    row.count = a.co_den;
    row.purity = ratio(a.pu_num, a.pu_den);
    row.collocation = ratio(a.co_num, a.co_den);
    row.f1 = harmonic_f1(row.purity, row.collocation);
    rows.push_back(row);
  }
  return rows;
}

ClusteringReport score_clustering(const std::vector<ClusteredInstance>& clustering, const GoldRoles& gold,
                                  ScoringScope scope) {
  ClusteringReport report;
  report.scope = scope;
  std::map<std::string, Contingency> by_lexeme;
  Contingency pooled;
  for (const auto& c : clustering) {
    auto it = gold.find({c.sentence_id, c.predicate_token, c.arg_token});
    if (it == gold.end()) {
      ++report.excluded;
      continue;
    }
    by_lexeme[c.lexeme].add(c.cluster_id, it->second);
    pooled.add(c.cluster_id, it->second);
  }
  if (pooled.n == 0) throw Error(ErrorKind::invalid_argument, "empty clustering: no instance has a gold role");
  report.instances = pooled.n;
  if (report.excluded) {
    report.notices.push_back(std::to_string(report.excluded) + " clustered instances have no gold role and were excluded");
  }

  std::size_t pu_sum = 0, co_sum = 0;
  for (const auto& [lexeme, table] : by_lexeme) {
    ClusterScoreRow row;
    row.key = lexeme;
    row.count = table.n;
    row.purity = ratio(table.purity_sum(), table.n);
    row.collocation = ratio(table.collocation_sum(), table.n);
    row.f1 = harmonic_f1(row.purity, row.collocation);
    report.per_verb.push_back(row);
    pu_sum += table.purity_sum();
    co_sum += table.collocation_sum();
  }
  std::stable_sort(report.per_verb.begin(), report.per_verb.end(),
                   [](const auto& a, const auto& b) { return a.count > b.count; });
  if (scope == ScoringScope::global) {
    pu_sum = pooled.purity_sum();
    co_sum = pooled.collocation_sum();
  }
  report.purity = ratio(pu_sum, report.instances);
  report.collocation = ratio(co_sum, report.instances);
  report.f1 = harmonic_f1(report.purity, report.collocation);
  report.per_role = per_role_breakdown(clustering, gold, scope, &report.notices);
  return report;
}

std::string format_identification_table(const IdentificationReport& r) {
  std::ostringstream out;
  out << "argument identification\n";
  out << "  tp " << r.tp << "  fp " << r.fp << "  fn " << r.fn << '\n';
  out << "  P  " << fixed(100 * r.precision, 2) << (r.precision_undefined ? "  (undefined: no predictions)" : "") << '\n';
  out << "  R  " << fixed(100 * r.recall, 2) << (r.recall_undefined ? "  (undefined: no gold arguments)" : "") << '\n';
  out << "  F1 " << fixed(100 * r.f1, 2) << '\n';
  for (const auto& w : r.warnings) out << "  warning: " << w << '\n';
  return out.str();
}

std::string format_identification_json(const IdentificationReport& r) {
  nlohmann::ordered_json j;
  j["report"] = "identification";
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["precision_undefined"] = r.precision_undefined;
  j["recall_undefined"] = r.recall_undefined;
  j["warnings"] = r.warnings.size();
  return j.dump() + "\n";
}

std::string format_clustering_table(const ClusteringReport& r) {
  std::ostringstream out;
  out << "role clustering (" << to_string(r.scope) << ", N=" << r.instances << ")\n";
  out << "# " << kPerRoleDefinition << '\n';
  out << "  PU " << fixed(100 * r.purity, 2) << "  CO " << fixed(100 * r.collocation, 2) << "  F1 "
      << fixed(100 * r.f1, 2) << '\n';
  auto table = [&](const char* title, const std::vector<ClusterScoreRow>& rows) {
    out << '\n' << std::left << std::setw(20) << title << std::right << std::setw(8) << "freq" << std::setw(8) << "PU"
        << std::setw(8) << "CO" << std::setw(8) << "F1" << '\n';
    for (const auto& row : rows) {
      out << std::left << std::setw(20) << row.key << std::right << std::setw(8) << row.count << std::setw(8)
          << fixed(100 * row.purity, 1) << std::setw(8) << fixed(100 * row.collocation, 1) << std::setw(8)
          << fixed(100 * row.f1, 1) << '\n';
    }
  };
  table("verb", r.per_verb);
  table("role", r.per_role);
  for (const auto& n : r.notices) out << "notice: " << n << '\n';
  return out.str();
}

std::string format_clustering_json(const ClusteringReport& r) {
  std::ostringstream out;
  nlohmann::ordered_json head;
  head["report"] = "clustering";
  head["scope"] = to_string(r.scope);
  head["instances"] = r.instances;
  head["excluded"] = r.excluded;
  head["purity"] = r.purity;
  head["collocation"] = r.collocation;
  head["f1"] = r.f1;
  head["per_role_definition"] = kPerRoleDefinition;
  out << head.dump() << '\n';
  auto rows = [&](const char* kind, const std::vector<ClusterScoreRow>& list) {
    for (const auto& row : list) {
      nlohmann::ordered_json j;
      j["report"] = kind;
      j["key"] = row.key;
      j["count"] = row.count;
      j["purity"] = row.purity;
      j["collocation"] = row.collocation;
      j["f1"] = row.f1;
      out << j.dump() << '\n';
    }
  };
  rows("clustering.verb", r.per_verb);
  rows("clustering.role", r.per_role);
  return out.str();
}

void write_clusters_tsv(const std::filesystem::path& path, const std::vector<ClusteredInstance>& clustering) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << "sentence_id\tpredicate_token\targ_token\tlexeme\tcluster_id\n";
  for (const auto& c : clustering) {
    out << c.sentence_id << '\t' << c.predicate_token << '\t' << c.arg_token << '\t' << c.lexeme << '\t' << c.cluster_id
        << '\n';
  }
}

std::vector<ClusteredInstance> read_clusters_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::vector<ClusteredInstance> out;
  std::string line;
  std::size_t line_number = 0;
  auto number = [&](const std::string& text, auto& value) {
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw Error(ErrorKind::parse, path.string() + ": line " + std::to_string(line_number) + ": bad number '" + text + "'");
    }
  };
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line_number == 1) continue;
    std::vector<std::string> f;
    std::istringstream fields(line);
    std::string field;
    while (std::getline(fields, field, '\t')) f.push_back(field);
    if (f.size() != 5) throw Error(ErrorKind::parse, path.string() + ": line " + std::to_string(line_number) + ": expected 5 columns");
    ClusteredInstance c;
    number(f[0], c.sentence_id);
    number(f[1], c.predicate_token);
    number(f[2], c.arg_token);
    c.lexeme = f[3];
    number(f[4], c.cluster_id);
    out.push_back(c);
  }
  return out;
}

}  // namespace usrl
