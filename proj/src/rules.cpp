#include "rules.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "errors.hpp"

namespace usrl {

namespace {

template <typename Rule>
void keep_top(std::map<Rule, long>& table, std::size_t cap) {
  if (table.size() <= cap) return;
  std::vector<std::pair<Rule, long>> ranked(table.begin(), table.end());
  // Map order is already lexicographic, so a stable sort by count keeps the tie order.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  ranked.resize(cap);
  table = std::map<Rule, long>(ranked.begin(), ranked.end());
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string field;
  while (std::getline(in, field, '\t')) out.push_back(field);
  return out;
}

long parse_count(const std::string& text, const std::string& origin, std::size_t line) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || value < 0) {
    throw Error(ErrorKind::parse, origin + ": line " + std::to_string(line) + ": bad count '" + text + "'");
  }
  return value;
}

}  // namespace

void RuleSet::enforce_caps() {
  keep_top(pairs, pair_cap);
  keep_top(tuples, tuple_cap);
}

RuleSet mine_rules(const Corpus& corpus, const Assignments& arguments, std::size_t pair_cap, std::size_t tuple_cap) {
  if (pair_cap < 1 || tuple_cap < 1) throw Error(ErrorKind::invalid_argument, "rule caps must be at least 1");
  RuleSet rules;
  rules.pair_cap = pair_cap;
  rules.tuple_cap = tuple_cap;
  std::size_t instances = 0;
  for (const auto& a : arguments) {
    if (a.sentence_id >= corpus.size()) throw Error(ErrorKind::invalid_argument, "assignment sentence out of range");
    const auto& sentence = corpus[a.sentence_id];
    DependencyTree tree(sentence);
    const auto& pred = sentence.token(a.predicate_index);
    for (int arg : a.arguments) {
      ++instances;
      const auto& t = sentence.token(arg);
      if (tree.parent(arg) == a.predicate_index) {
        ++rules.pairs[{t.pos, t.deprel}];
      } else if (tree.depth(arg) == tree.depth(a.predicate_index)) {
        ++rules.tuples[{pred.deprel, t.deprel, t.pos}];
      }
    }
  }
  if (instances == 0) throw Error(ErrorKind::no_evidence, "no evidence: corpus has no argument instances to mine");
  rules.enforce_caps();
  return rules;
}

ArgumentAssignment generate_silver_targets(const DependencyTree& tree, const AnnotatedSentence& sentence,
                                           std::size_t sentence_id, int predicate_index, const RuleSet& rules) {
  ArgumentAssignment out;
  out.sentence_id = sentence_id;
  out.predicate_index = predicate_index;
  out.label_kind = LabelKind::silver;

  for (int child : tree.children(predicate_index)) {
    const auto& t = sentence.token(child);
    if (rules.contains(PairRule{t.pos, t.deprel})) out.arguments.insert(child);
  }

  const int target_depth = tree.depth(predicate_index);
  const auto& pred_deprel = sentence.token(predicate_index).deprel;
  for (const auto& t : sentence.tokens) {
    if (t.index == predicate_index || out.arguments.count(t.index)) continue;
    if (tree.depth(t.index) != target_depth) continue;
    if (rules.contains(TupleRule{pred_deprel, t.deprel, t.pos})) out.arguments.insert(t.index);
  }
  return out;
}

Assignments generate_silver_corpus(const Corpus& corpus, const RuleSet& rules, bool verbs_only) {
  Assignments out;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    DependencyTree tree(corpus[s]);
    for (int p : selected_predicates(corpus[s], verbs_only)) {
      out.push_back(generate_silver_targets(tree, corpus[s], s, p, rules));
    }
  }
  return out;
}

std::string format_rules(const RuleSet& rules) {
  std::ostringstream out;
  out << "USRL-RULES\t" << kRuleFileVersion << '\n';
  out << "CAPS\t" << rules.pair_cap << '\t' << rules.tuple_cap << '\n';
  for (const auto& [r, count] : rules.pairs) out << "PAIR\t" << r.arg_pos << '\t' << r.arg_deprel << '\t' << count << '\n';
  for (const auto& [r, count] : rules.tuples) {
    out << "TUPLE\t" << r.pred_deprel << '\t' << r.arg_deprel << '\t' << r.arg_pos << '\t' << count << '\n';
  }
  return out.str();
}

RuleSet parse_rules(const std::string& text, const std::string& origin) {
  RuleSet rules;
  std::istringstream in(text);
  std::string line;
  std::size_t line_number = 0;
  bool saw_header = false;
  auto malformed = [&](const std::string& why) {
    return Error(ErrorKind::parse, origin + ": line " + std::to_string(line_number) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_number;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto f = split_tabs(line);
    if (!saw_header) {
      if (f.size() != 2 || f[0] != "USRL-RULES") throw malformed("missing USRL-RULES header");
      if (f[1] != std::to_string(kRuleFileVersion)) {
        throw Error(ErrorKind::version, origin + ": rule file version " + f[1] + ", expected " +
                                            std::to_string(kRuleFileVersion));
      }
      saw_header = true;
      continue;
    }
    auto nonempty = [&](std::size_t from, std::size_t to) {
      for (std::size_t i = from; i < to; ++i) {
        if (f[i].empty()) throw malformed("empty rule field");
      }
    };
    if (f[0] == "CAPS" && f.size() == 3) {
      rules.pair_cap = static_cast<std::size_t>(parse_count(f[1], origin, line_number));
      rules.tuple_cap = static_cast<std::size_t>(parse_count(f[2], origin, line_number));
      if (rules.pair_cap < 1 || rules.tuple_cap < 1) throw malformed("caps must be at least 1");
    } else if (f[0] == "PAIR" && f.size() == 4) {
      nonempty(1, 3);
      rules.pairs[{f[1], f[2]}] += parse_count(f[3], origin, line_number);
    } else if (f[0] == "TUPLE" && f.size() == 5) {
      nonempty(1, 4);
      rules.tuples[{f[1], f[2], f[3]}] += parse_count(f[4], origin, line_number);
    } else {
      throw malformed("unrecognised rule line");
    }
  }
  if (!saw_header) throw Error(ErrorKind::parse, origin + ": empty rule file");
  rules.enforce_caps();
  return rules;
}

void write_rules(const std::filesystem::path& path, const RuleSet& rules) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << format_rules(rules);
}

RuleSet read_rules(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_rules(buffer.str(), path.string());
}

}  // namespace usrl
