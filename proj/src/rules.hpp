#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>

#include "corpus.hpp"

namespace usrl {

// (argument POS, argument's relation to its head) for arguments that are children of the predicate.
struct PairRule {
  std::string arg_pos;
  std::string arg_deprel;
  auto operator<=>(const PairRule&) const = default;
};

// (predicate's relation to its head, argument's relation to its head, argument POS) for arguments
// at the same root distance as the predicate.
struct TupleRule {
  std::string pred_deprel;
  std::string arg_deprel;
  std::string arg_pos;
  auto operator<=>(const TupleRule&) const = default;
};

struct RuleSet {
  static constexpr std::size_t kDefaultPairCap = 300;
  static constexpr std::size_t kDefaultTupleCap = 20;

  std::map<PairRule, long> pairs;
  std::map<TupleRule, long> tuples;
  std::size_t pair_cap = kDefaultPairCap;
  std::size_t tuple_cap = kDefaultTupleCap;

  bool contains(const PairRule& rule) const { return pairs.count(rule) != 0; }
  bool contains(const TupleRule& rule) const { return tuples.count(rule) != 0; }
  // Drops everything below the caps: highest count first, ties by lexicographic rule order.
  void enforce_caps();

  bool operator==(const RuleSet&) const = default;
};

// Counts pair/tuple configurations over the arguments in `arguments` and keeps the top rules.
RuleSet mine_rules(const Corpus& corpus, const Assignments& arguments, std::size_t pair_cap, std::size_t tuple_cap);

// Two-stage silver labelling: children of the predicate matched against the pairs, then nodes at
// the predicate's depth matched against the tuples. The predicate itself is never selected.
ArgumentAssignment generate_silver_targets(const DependencyTree& tree, const AnnotatedSentence& sentence,
                                           std::size_t sentence_id, int predicate_index, const RuleSet& rules);

Assignments generate_silver_corpus(const Corpus& corpus, const RuleSet& rules, bool verbs_only);

constexpr int kRuleFileVersion = 1;

std::string format_rules(const RuleSet& rules);
RuleSet parse_rules(const std::string& text, const std::string& origin = "<string>");
void write_rules(const std::filesystem::path& path, const RuleSet& rules);
RuleSet read_rules(const std::filesystem::path& path);

}  // namespace usrl
