// Shared generators and independent oracles for the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "corpus.hpp"
#include "eval.hpp"
#include "neuralkit.hpp"
#include "rules.hpp"

namespace support {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(USRL_FIXTURE_DIR) / name;
}

inline const std::vector<std::string>& pos_tags() {
  static const std::vector<std::string> tags = {"NN", "NNS", "VB", "VBD", "VBZ", "IN", "RB", "DT", "PRP", "CC"};
  return tags;
}

inline const std::vector<std::string>& deprels() {
  static const std::vector<std::string> rels = {"SBJ", "OBJ", "ADV", "VC", "NMOD", "PMOD", "LGS", "DEP", "LOC"};
  return rels;
}

// Random heads forming a tree: tokens are attached in a random order to an already attached node.
inline std::vector<int> random_heads(usrl::nn::Rng& rng, int n) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i + 1;
  rng.shuffle(order);
  std::vector<int> heads(static_cast<std::size_t>(n), 0);
  std::vector<int> attached = {0};
  for (int t : order) {
    heads[static_cast<std::size_t>(t - 1)] = attached[rng.below(attached.size())];
    attached.push_back(t);
  }
  return heads;
}

struct RandomSentence {
  std::vector<int> heads;
  std::vector<std::string> pos;
  std::vector<std::string> rels;
  std::vector<int> predicates;
  std::vector<std::vector<std::string>> roles;  // roles[k][i]: cell of token i+1 for predicate k
};

inline RandomSentence random_sentence(usrl::nn::Rng& rng, int n, double predicate_rate = 0.3,
                                      double argument_rate = 0.4) {
  RandomSentence s;
  s.heads = random_heads(rng, n);
  for (int i = 0; i < n; ++i) {
    s.pos.push_back(pos_tags()[rng.below(pos_tags().size())]);
    s.rels.push_back(s.heads[static_cast<std::size_t>(i)] == 0 ? "ROOT" : deprels()[rng.below(deprels().size())]);
    if (rng.uniform() < predicate_rate) s.predicates.push_back(i + 1);
  }
  static const std::vector<std::string> roles = {"A0", "A1", "A2", "AM-TMP", "AM-LOC"};
  for (int p : s.predicates) {
    std::vector<std::string> col;
    for (int i = 1; i <= n; ++i) {
      col.push_back(i != p && rng.uniform() < argument_rate ? roles[rng.below(roles.size())] : "_");
    }
    s.roles.push_back(col);
  }
  return s;
}

inline std::string to_conll(const RandomSentence& s) {
  std::ostringstream out;
  const int n = static_cast<int>(s.heads.size());
  for (int i = 1; i <= n; ++i) {
    const auto k = static_cast<std::size_t>(i - 1);
    const bool pred = std::count(s.predicates.begin(), s.predicates.end(), i) > 0;
    const std::string form = "w" + std::to_string(i);
    out << i << '\t' << form << '\t' << form << '\t' << form << '\t' << s.pos[k] << '\t' << s.pos[k] << "\t_\t_\t"
        << s.heads[k] << '\t' << s.heads[k] << '\t' << s.rels[k] << '\t' << s.rels[k] << '\t' << (pred ? "Y" : "_")
        << '\t' << (pred ? form + ".01" : "_");
    for (const auto& col : s.roles) out << '\t' << col[k];
    out << '\n';
  }
  out << '\n';
  return out.str();
}

inline usrl::RuleSet random_rules(usrl::nn::Rng& rng, int pairs, int tuples) {
  usrl::RuleSet r;
  auto pick = [&](const std::vector<std::string>& v) { return v[rng.below(v.size())]; };
  std::vector<std::string> rels = deprels();
  rels.push_back("ROOT");
  for (int i = 0; i < pairs; ++i) r.pairs[{pick(pos_tags()), pick(deprels())}] += 1;
  for (int i = 0; i < tuples; ++i) r.tuples[{pick(rels), pick(rels), pick(pos_tags())}] += 1;
  return r;
}

// Depth by walking head links; independent of DependencyTree.
inline int walk_depth(const std::vector<int>& heads, int node) {
  int d = 0;
  while (node != 0) {
    node = heads[static_cast<std::size_t>(node - 1)];
    ++d;
  }
  return d;
}

// Exhaustive set definition of the silver targets: every token is tested directly.
inline std::set<int> silver_oracle(const usrl::AnnotatedSentence& s, int predicate, const usrl::RuleSet& rules) {
  std::vector<int> heads;
  for (const auto& t : s.tokens) heads.push_back(t.head);
  const auto& p = s.token(predicate);
  std::set<int> out;
  for (const auto& t : s.tokens) {
    if (t.index == predicate) continue;
    bool stage1 = t.head == predicate && rules.pairs.count({t.pos, t.deprel});
    bool stage2 = walk_depth(heads, t.index) == walk_depth(heads, predicate) &&
                  rules.tuples.count({p.deprel, t.deprel, t.pos});
    if (stage1 || stage2) out.insert(t.index);
  }
  return out;
}

// Shortest path by breadth-first search over the undirected tree including the root node 0.
inline std::vector<int> bfs_path(const std::vector<int>& heads, int from, int to) {
  const int n = static_cast<int>(heads.size());
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n + 1));
  for (int i = 1; i <= n; ++i) {
    adj[static_cast<std::size_t>(i)].push_back(heads[static_cast<std::size_t>(i - 1)]);
    adj[static_cast<std::size_t>(heads[static_cast<std::size_t>(i - 1)])].push_back(i);
  }
  std::vector<int> prev(static_cast<std::size_t>(n + 1), -1);
  std::deque<int> queue = {from};
  prev[static_cast<std::size_t>(from)] = from;
  while (!queue.empty()) {
    int x = queue.front();
    queue.pop_front();
    for (int y : adj[static_cast<std::size_t>(x)]) {
      if (prev[static_cast<std::size_t>(y)] == -1) {
        prev[static_cast<std::size_t>(y)] = x;
        queue.push_back(y);
      }
    }
  }
  std::vector<int> path = {to};
  while (path.back() != from) path.push_back(prev[static_cast<std::size_t>(path.back())]);
  std::reverse(path.begin(), path.end());
  return path;
}

struct OracleScores {
  double purity = 0.0;
  double collocation = 0.0;
  double f1 = 0.0;
};

// PU/CO by enumerating every (cluster, class) intersection.
inline OracleScores brute_force_pu_co(const std::vector<int>& cluster_of, const std::vector<int>& class_of) {
  std::set<int> clusters(cluster_of.begin(), cluster_of.end());
  std::set<int> classes(class_of.begin(), class_of.end());
  const double n = static_cast<double>(cluster_of.size());
  auto overlap = [&](int c, int g) {
    int count = 0;
    for (std::size_t i = 0; i < cluster_of.size(); ++i) count += cluster_of[i] == c && class_of[i] == g;
    return count;
  };
  OracleScores s;
  double pu = 0, co = 0;
  for (int c : clusters) {
    int best = 0;
    for (int g : classes) best = std::max(best, overlap(c, g));
    pu += best;
  }
  for (int g : classes) {
    int best = 0;
    for (int c : clusters) best = std::max(best, overlap(c, g));
    co += best;
  }
  s.purity = pu / n;
  s.collocation = co / n;
  s.f1 = s.purity + s.collocation > 0 ? 2 * s.purity * s.collocation / (s.purity + s.collocation) : 0.0;
  return s;
}

// Builds one-lexeme clustering input: instance i is argument token i+1 of predicate 0 in sentence 0.
inline void single_verb_instances(const std::vector<int>& cluster_of, const std::vector<int>& class_of,
                                  std::vector<usrl::ClusteredInstance>* clustering, usrl::GoldRoles* gold) {
  for (std::size_t i = 0; i < cluster_of.size(); ++i) {
    clustering->push_back({0, 0, static_cast<int>(i) + 1, "verb", cluster_of[i]});
    (*gold)[{0, 0, static_cast<int>(i) + 1}] = "A" + std::to_string(class_of[i]);
  }
}

// Synthetic identification data: one verb predicate per sentence, and a token is an argument iff
// its POS is NN or PRP. `flip_rate` flips that fraction of the non-predicate labels in `noisy`.
struct SyntheticIdentification {
  usrl::Corpus corpus;
  usrl::Assignments gold;
  usrl::Assignments noisy;
};

inline SyntheticIdentification synthetic_identification(usrl::nn::Rng& rng, int sentences, double flip_rate = 0.0) {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> lexicon = {
      {"NN", {"dog", "table", "market", "river", "teacher", "price", "garden", "report"}},
      {"PRP", {"he", "she", "they", "it", "we"}},
      {"DT", {"the", "a", "this", "every"}},
      {"JJ", {"red", "quick", "small", "old", "bright"}},
      {"IN", {"in", "on", "under", "with", "for"}},
      {"RB", {"quickly", "often", "never", "very"}},
  };
  static const std::vector<std::string> verbs = {"see", "take", "give", "find", "make", "hold"};
  std::string text;
  for (int s = 0; s < sentences; ++s) {
    RandomSentence rs;
    const int n = 4 + static_cast<int>(rng.below(7));
    rs.heads = random_heads(rng, n);
    const int pred = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(n)));
    rs.predicates = {pred};
    std::vector<std::string> forms, col;
    for (int i = 1; i <= n; ++i) {
      std::string pos, form;
      if (i == pred) {
        pos = "VB";
        form = verbs[rng.below(verbs.size())];
      } else {
        const auto& entry = lexicon[rng.below(lexicon.size())];
        pos = entry.first;
        form = entry.second[rng.below(entry.second.size())];
      }
      rs.pos.push_back(pos);
      rs.rels.push_back(rs.heads[static_cast<std::size_t>(i - 1)] == 0 ? "ROOT" : "DEP");
      forms.push_back(form);
      col.push_back(i != pred && (pos == "NN" || pos == "PRP") ? "A1" : "_");
    }
    rs.roles = {col};
    std::string block = to_conll(rs);
    // Replace the placeholder forms and lemmas with lexicon words.
    std::istringstream lines(block);
    std::string line;
    int i = 0;
    while (std::getline(lines, line) && !line.empty()) {
      std::vector<std::string> cells;
      std::stringstream cs(line);
      std::string cell;
      while (std::getline(cs, cell, '\t')) cells.push_back(cell);
      cells[1] = cells[2] = cells[3] = forms[static_cast<std::size_t>(i++)];
      if (cells[12] == "Y") cells[13] = cells[2] + ".01";
      for (std::size_t k = 0; k < cells.size(); ++k) text += (k ? "\t" : "") + cells[k];
      text += "\n";
    }
    text += "\n";
  }
  SyntheticIdentification out;
  out.corpus = usrl::parse_conll09(text, usrl::ColumnMode::gold);
  out.gold = usrl::gold_assignments(out.corpus, true);
  out.noisy = out.gold;
  for (auto& a : out.noisy) {
    a.roles.clear();
    a.label_kind = usrl::LabelKind::silver;
    const int n = static_cast<int>(out.corpus[a.sentence_id].size());
    for (int t = 1; t <= n; ++t) {
      if (t == a.predicate_index || rng.uniform() >= flip_rate) continue;
      if (a.arguments.count(t)) a.arguments.erase(t);
      else a.arguments.insert(t);
    }
  }
  return out;
}

// Two synthetic roles for one verb: each sentence carries one argument of each role, and the
// window around a role's argument only contains words from that role's context vocabulary.
// Role A arguments attach as SBJ or ADV, role B arguments as OBJ or LOC.
inline usrl::Corpus synthetic_roles(usrl::nn::Rng& rng, int sentences) {
  auto pick = [&](const std::string& prefix, int n) { return prefix + std::to_string(rng.below(static_cast<std::size_t>(n))); };
  std::string text;
  for (int s = 0; s < sentences; ++s) {
    const std::string rel_a = rng.uniform() < 0.5 ? "SBJ" : "ADV";
    const std::string rel_b = rng.uniform() < 0.5 ? "OBJ" : "LOC";
    // id form pos head deprel role
    std::vector<std::tuple<std::string, std::string, int, std::string, std::string>> toks = {
        {pick("ca", 6), "JJ", 3, "NMOD", "_"}, {pick("ca", 6), "JJ", 3, "NMOD", "_"},
        {pick("xa", 4), "NN", 6, rel_a, "A0"},  {pick("ca", 6), "JJ", 3, "NMOD", "_"},
        {pick("ca", 6), "JJ", 3, "NMOD", "_"}, {"acts", "VBZ", 0, "ROOT", "_"},
        {pick("cb", 6), "JJ", 9, "NMOD", "_"}, {pick("cb", 6), "JJ", 9, "NMOD", "_"},
        {pick("xb", 4), "NN", 6, rel_b, "A1"},  {pick("cb", 6), "JJ", 9, "NMOD", "_"},
        {pick("cb", 6), "JJ", 9, "NMOD", "_"}};
    for (std::size_t i = 0; i < toks.size(); ++i) {
      const auto& [form, pos, head, rel, role] = toks[i];
      const bool pred = i == 5;
      const std::string lemma = pred ? "act" : form;
      text += std::to_string(i + 1) + "\t" + form + "\t" + lemma + "\t" + lemma + "\t" + pos + "\t" + pos +
              "\t_\t_\t" + std::to_string(head) + "\t" + std::to_string(head) + "\t" + rel + "\t" + rel + "\t" +
              (pred ? "Y\tact.01" : "_\t_") + "\t" + role + "\n";
    }
    text += "\n";
  }
  return usrl::parse_conll09(text, usrl::ColumnMode::gold);
}

}  // namespace support
