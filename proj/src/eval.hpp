#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "corpus.hpp"

namespace usrl {

struct IdentificationReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;  // no predictions at all
  bool recall_undefined = false;     // no gold arguments at all
  std::vector<std::string> warnings;
};

// Arguments match on (sentence, predicate token, argument token). A predicate present on one side
// only contributes all-fp or all-fn and a warning.
IdentificationReport score_identification(const Assignments& predicted, const Assignments& gold);

// One clustered argument instance, as written to the clustering TSV.
struct ClusteredInstance {
  std::size_t sentence_id = 0;
  int predicate_token = 0;
  int arg_token = 0;
  std::string lexeme;
  int cluster_id = 0;
};

enum class ScoringScope { per_verb, global };

std::string to_string(ScoringScope scope);
ScoringScope parse_scoring_scope(const std::string& text);

struct ClusterScoreRow {
  std::string key;  // lexeme or role
  std::size_t count = 0;
  double purity = 0.0;
  double collocation = 0.0;
  double f1 = 0.0;
};

struct ClusteringReport {
  ScoringScope scope = ScoringScope::per_verb;
  std::size_t instances = 0;  // N
  std::size_t excluded = 0;   // clustered instances without a gold role
  double purity = 0.0;
  double collocation = 0.0;
  double f1 = 0.0;
  std::vector<ClusterScoreRow> per_verb;  // sorted by frequency, then lexeme
  std::vector<ClusterScoreRow> per_role;  // sorted by role
  std::vector<std::string> notices;
};

double harmonic_f1(double a, double b);

// Gold role per (sentence, predicate, argument).
using GoldRoles = std::map<std::tuple<std::size_t, int, int>, std::string>;
GoldRoles gold_roles(const Assignments& gold);

// Role name used for per-role grouping: "AM-TMP" -> "TMP".
std::string role_group(const std::string& role);

// PU = (1/N) sum_i max_j |G_j n C_i|, CO = (1/N) sum_j max_i |G_j n C_i|.
// Per-verb scope scores each lexeme separately and weights by its instance count;
// global scope pools all instances with clusters keyed by cluster id and classes by role.
ClusteringReport score_clustering(const std::vector<ClusteredInstance>& clustering, const GoldRoles& gold,
                                  ScoringScope scope);

// Per-role rows (also filled in by score_clustering). Within each scoring unit (lexeme, or the
// whole set in global scope), for role j let C* be the cluster holding most of G_j:
//   CO_j = sum max_i |G_j n C_i| / sum |G_j|
//   PU_j = sum max_k |G_k n C*| / sum |C*|
// with sums over scoring units.
std::vector<ClusterScoreRow> per_role_breakdown(const std::vector<ClusteredInstance>& clustering, const GoldRoles& gold,
                                                ScoringScope scope, std::vector<std::string>* notices = nullptr);

extern const char* const kPerRoleDefinition;

std::string format_identification_table(const IdentificationReport& report);
std::string format_identification_json(const IdentificationReport& report);
std::string format_clustering_table(const ClusteringReport& report);
std::string format_clustering_json(const ClusteringReport& report);

void write_clusters_tsv(const std::filesystem::path& path, const std::vector<ClusteredInstance>& clustering);
std::vector<ClusteredInstance> read_clusters_tsv(const std::filesystem::path& path);

}  // namespace usrl
