#pragma once

#include <Eigen/Dense>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "eval.hpp"
#include "neuralkit.hpp"

namespace usrl {

using Vector = Eigen::VectorXd;

// First edge on the tree path from a token toward the predicate. `inverse` (rendered "^-1") is
// set when the token is not inside the predicate's subtree, so a direct dependent keeps the bare
// relation and e.g. a subject of the predicate's auxiliary becomes SBJ^-1.
struct DepLabel {
  std::string relation;
  bool inverse = false;

  static DepLabel self() { return {"SELF", false}; }
  std::string str() const { return inverse ? relation + "^-1" : relation; }
  static DepLabel parse(const std::string& text);
  auto operator<=>(const DepLabel&) const = default;
};

DepLabel derive_dep_label(const DependencyTree& tree, const AnnotatedSentence& sentence, int token, int predicate);

struct ArgInstance {
  std::size_t sentence_id = 0;
  std::size_t predicate_occurrence_id = 0;
  int predicate_index = 0;
  std::string predicate_lexeme;
  int arg_token = 0;
  std::string arg_form;  // lowercased
  DepLabel dep_label;
  std::vector<int> context;                // window tokens, excluding argument and predicate
  std::vector<DepLabel> context_labels;    // label of each context token toward the predicate
};

std::vector<ArgInstance> build_instances(const Corpus& corpus, const Assignments& assignments, int window);

// Per-token input vectors: an external per-(sentence, token) file, or random vectors keyed by
// lowercased form.
class EmbeddingSource {
 public:
  enum class Mode { file, random };

  static EmbeddingSource load(const std::filesystem::path& path);
  static EmbeddingSource parse(const std::string& text, const std::string& origin = "<string>");
  static EmbeddingSource random(int dim, std::uint64_t seed);

  Mode mode() const { return mode_; }
  int dim() const { return dim_; }
  // nullopt when an external file does not cover the token.
  std::optional<Vector> lookup(std::size_t sentence_id, int token, const std::string& form) const;

 private:
  Mode mode_ = Mode::random;
  int dim_ = 0;
  std::uint64_t seed_ = 0;
  std::map<std::pair<std::size_t, int>, Vector> vectors_;
};

struct AutoencoderConfig {
  std::vector<int> hidden = {512, 256, 128};
  int bottleneck = 50;
  int epochs = 20;
  int batch = 32;
  double learning_rate = 0.01;
  double l2 = 0.0;
};

// Stacked autoencoder: encoder input -> hidden... -> bottleneck, mirrored decoder. ReLU everywhere
// except the bottleneck layer and the final reconstruction layer, which are linear.
class Autoencoder {
 public:
  static Autoencoder create(int input_dim, const AutoencoderConfig& config, std::uint64_t seed);
  static Autoencoder load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  nn::Var encode(nn::Graph& g, nn::Var x) const;  // x: input_dim x batch
  nn::Var reconstruct(nn::Graph& g, nn::Var x) const;
  Vector encode(const Vector& x) const;
  // Mean over columns of the squared reconstruction error.
  nn::Var loss(nn::Graph& g, const nn::Tensor& batch) const;

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  nn::ParameterStore& store() { return store_; }

 private:
  void bind();

  std::vector<int> sizes_;  // input, hidden..., bottleneck
  nn::ParameterStore store_;
  std::vector<nn::Linear> encoder_;
  std::vector<nn::Linear> decoder_;  // applied in order: bottleneck side first
};

struct AutoencoderTraining {
  Autoencoder model;
  std::vector<double> epoch_loss;
};

AutoencoderTraining train_autoencoder(const std::vector<Vector>& vectors, const AutoencoderConfig& config,
                                      std::uint64_t seed);

// Encoded (D-dim) vectors for the token occurrences the role model needs.
struct EncodedTokens {
  int dim = 0;
  std::map<std::pair<std::size_t, int>, Vector> vectors;
  Vector unk;  // initial value of the shared row for tokens the source does not cover
};

EncodedTokens encode_tokens_for(const Corpus& corpus, const std::vector<ArgInstance>& instances,
                                const EmbeddingSource& source, const Autoencoder* autoencoder);

enum class Scoring { composed, plain };

std::string to_string(Scoring scoring);
Scoring parse_scoring(const std::string& text);

struct RoleTrainOptions {
  int negatives = 5;
  int epochs = 10;
  int batch = 16;
  double learning_rate = 0.05;
  double l2 = 1e-6;
  Scoring scoring = Scoring::composed;
  bool predicate_context = true;
  std::uint64_t seed = 1;
};

// Argument, context and negative tables at width D plus per-label transforms D_l (target side) and
// E_l (context side). The predicate's context transform is the identity and is not a parameter.
class RoleModel {
 public:
  struct ContextRef {
    nn::Index row;   // row of the context table
    std::string label;  // "SELF" for the predicate
  };

  static RoleModel create(const std::vector<ArgInstance>& instances, const EncodedTokens& tokens, Scoring scoring,
                          std::uint64_t seed);
  static RoleModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // Contexts of an instance: the predicate first (when enabled), then the window tokens.
  std::vector<ContextRef> contexts(std::size_t instance, bool predicate_context) const;
  // sigma-argument of a (target, context) pair and of a (target, negative) pair.
  nn::Var pair_score(nn::Graph& g, std::size_t instance, const ContextRef& context) const;
  nn::Var negative_score(nn::Graph& g, std::size_t instance, nn::Index negative_row) const;
  // J for one instance with explicit negatives: negatives[k] are the rows for the k-th context pair.
  nn::Var objective(nn::Graph& g, std::size_t instance, const std::vector<ContextRef>& contexts,
                    const std::vector<std::vector<nn::Index>>& negatives) const;

  nn::Index sample_negative(nn::Rng& rng) const;
  Vector argument_vector(std::size_t instance) const;
  nn::Tensor context_transform(const std::string& label) const;
  nn::Tensor target_transform(const std::string& label) const;

  std::size_t instance_count() const { return instance_keys_.size(); }
  const std::vector<std::tuple<std::size_t, int, int>>& instance_keys() const { return instance_keys_; }
  Scoring scoring() const { return scoring_; }
  int dim() const { return dim_; }
  nn::ParameterStore& store() { return store_; }

 private:
  void bind();
  nn::Var context_side(nn::Graph& g, nn::Var u, const std::string& label) const;

  int dim_ = 0;
  Scoring scoring_ = Scoring::composed;
  nn::ParameterStore store_;
  nn::Embedding args_, ctx_, neg_;
  std::map<std::string, nn::Parameter*> target_, context_;
  std::vector<std::tuple<std::size_t, int, int>> instance_keys_;  // (sentence, predicate, argument)
  std::vector<std::string> instance_labels_;
  std::vector<std::vector<ContextRef>> instance_contexts_;  // window contexts per instance
  std::vector<nn::Index> predicate_rows_;
  std::vector<double> negative_cdf_;  // unigram^0.75 over argument forms
};

struct RoleTraining {
  RoleModel model;
  std::vector<double> epoch_loss;  // mean J per (target, context) pair
  std::size_t skipped = 0;         // instances without any context
};

RoleTraining train_role_embeddings(const std::vector<ArgInstance>& instances, const EncodedTokens& tokens,
                                   const RoleTrainOptions& options);

struct Cluster {
  std::vector<std::size_t> members;  // instance indices, ascending
  Vector centroid;
  std::string label;
};

struct RoleClustering {
  std::string lexeme;
  std::vector<Cluster> clusters;
};

double cosine(const Vector& a, const Vector& b);
Vector centroid_of(const std::vector<std::size_t>& members, const std::vector<Vector>& vectors);

// pen = (|V(C,C')| + |V(C',C)|) / (|C| + |C'|), V(C,C') = members of C sharing a predicate
// occurrence with some member of C'.
double violation_penalty(const Cluster& a, const Cluster& b, const std::vector<ArgInstance>& instances);
double cluster_similarity(const Cluster& a, const Cluster& b, const std::vector<ArgInstance>& instances,
                          double alpha = 0.1);

// Greedy merging: repeatedly join the most similar pair while its similarity is >= tau. Clusters are
// ordered by (size desc, label asc); among equal scores the earliest pair in that order wins and
// the merged cluster keeps the first cluster's label.
std::vector<Cluster> greedy_merge(std::vector<Cluster> clusters, const std::vector<ArgInstance>& instances,
                                  const std::vector<Vector>& vectors, double alpha, double tau);

// One seed per distinct dependency label among `members`, in label order.
std::vector<Cluster> seed_clusters(const std::vector<std::size_t>& members, const std::vector<ArgInstance>& instances,
                                   const std::vector<Vector>& vectors);

RoleClustering agglomerate(const std::vector<std::size_t>& members, const std::vector<ArgInstance>& instances,
                           const std::vector<Vector>& vectors, double alpha = 0.1, double tau = 0.0);

RoleClustering syntactic_function_baseline(const std::vector<std::size_t>& members,
                                           const std::vector<ArgInstance>& instances);

// Instance indices grouped by predicate lexeme, lexemes in lexicographic order.
std::map<std::string, std::vector<std::size_t>> group_by_lexeme(const std::vector<ArgInstance>& instances);

// Flattens per-lexeme clusterings into TSV rows. With `merge_across_lexemes`, the per-lexeme
// clusters are merged once more with greedy_merge and share ids across lexemes.
std::vector<ClusteredInstance> assign_cluster_ids(const std::vector<RoleClustering>& clusterings,
                                                  const std::vector<ArgInstance>& instances,
                                                  const std::vector<Vector>& vectors, bool merge_across_lexemes,
                                                  double alpha, double tau);

}  // namespace usrl
