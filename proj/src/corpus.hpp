#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace usrl {

// Which column family populates POS/HEAD/DEPREL (and lemma).
enum class ColumnMode { gold, automatic };

std::string to_string(ColumnMode mode);
ColumnMode parse_column_mode(const std::string& text);

struct Token {
  int index = 0;  // 1-based
  std::string form;
  std::string lemma;
  std::string pos;
  int head = 0;  // 0 = artificial root
  std::string deprel;
  bool is_predicate = false;
  std::optional<std::string> pred_sense;
  std::vector<std::optional<std::string>> apreds;  // one cell per predicate column, nullopt for "_"
};

struct AnnotatedSentence {
  std::vector<Token> tokens;
  std::vector<int> predicates;  // token indices, in APRED column order
  ColumnMode source = ColumnMode::gold;
  std::vector<std::vector<std::string>> rows;  // verbatim columns for writing back

  std::size_t size() const { return tokens.size(); }
  const Token& token(int index) const { return tokens.at(static_cast<std::size_t>(index - 1)); }
  bool is_verb(int index) const;
};

using Corpus = std::vector<AnnotatedSentence>;

// Parent/children/depth view over the head links of one sentence. Node 0 is the root.
class DependencyTree {
 public:
  explicit DependencyTree(const AnnotatedSentence& sentence);
  // Builds straight from a head vector (heads[i-1] is the head of token i).
  explicit DependencyTree(const std::vector<int>& heads);

  std::size_t size() const { return parent_.size() - 1; }
  int parent(int node) const { return parent_.at(static_cast<std::size_t>(node)); }
  int depth(int node) const { return depth_.at(static_cast<std::size_t>(node)); }
  const std::vector<int>& children(int node) const { return children_.at(static_cast<std::size_t>(node)); }

  bool dominates(int ancestor, int node) const;
  int lca(int a, int b) const;
  int distance(int a, int b) const { return depth(a) + depth(b) - 2 * depth(lca(a, b)); }
  // Node sequence from `from` to `to`, both inclusive.
  std::vector<int> path(int from, int to) const;

 private:
  void build();

  std::vector<int> parent_;
  std::vector<std::vector<int>> children_;
  std::vector<int> depth_;
};

DependencyTree build_tree(const AnnotatedSentence& sentence);

enum class LabelKind { silver, predicted, gold };

std::string to_string(LabelKind kind);

struct ArgumentAssignment {
  std::size_t sentence_id = 0;
  int predicate_index = 0;
  std::set<int> arguments;
  LabelKind label_kind = LabelKind::gold;
  std::map<int, std::string> roles;  // gold only
};

// Assignments in corpus order; lookups are by (sentence, predicate).
using Assignments = std::vector<ArgumentAssignment>;

Corpus read_conll09(const std::filesystem::path& path, ColumnMode mode);
Corpus parse_conll09(const std::string& text, ColumnMode mode, const std::string& origin = "<string>");
void write_conll09(const std::filesystem::path& path, const Corpus& corpus);
std::string format_conll09(const Corpus& corpus);

// Predicates of a sentence, optionally restricted to POS tags starting with "VB".
std::vector<int> selected_predicates(const AnnotatedSentence& sentence, bool verbs_only);

// Gold arguments from the APRED columns: a token is an argument of predicate k iff its k-th cell is not "_".
Assignments gold_assignments(const Corpus& corpus, bool verbs_only);

// Copy of `corpus` whose APRED columns mark each assigned argument with "ARG" (or its role when
// roles are present). Predicate columns without an assignment are cleared to "_".
Corpus with_argument_columns(const Corpus& corpus, const Assignments& assignments);

}  // namespace usrl
