#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "neuralkit.hpp"

namespace usrl {

enum class LossForm { log, literal };

std::string to_string(LossForm form);
LossForm parse_loss_form(const std::string& text);

struct FeatureConfig {
  int dim_word = 100;
  int dim_lemma = 100;
  int dim_char = 100;  // output of the character BiLSTM = 2 * char_hidden
  int dim_pos = 32;
  int dim_flag = 16;
  int char_embed = 32;  // character lookup width fed to the character BiLSTM
  int char_hidden = 50;
  int word_hidden = 128;
  int mlp_hidden = 128;

  int input_dim() const { return dim_word + dim_lemma + dim_char + dim_pos + dim_flag; }
  void validate() const;
};

// zeta(t) = start * (end / start)^(t / (T - 1)) for epoch t in [0, T).
struct ZetaSchedule {
  double start = 0.09;
  double end = 0.095;
  int epochs = 24;

  double at(int epoch) const;
  void validate() const;
};

// The four member schedules used for the ensemble.
std::vector<ZetaSchedule> default_schedules(int epochs);

class Vocabulary {
 public:
  Vocabulary();  // row 0 is the UNK entry
  int add(const std::string& item);
  int lookup(const std::string& item) const;
  std::size_t size() const { return items_.size(); }
  const std::vector<std::string>& items() const { return items_; }
  static Vocabulary from_items(const std::vector<std::string>& items);

 private:
  std::map<std::string, int> ids_;
  std::vector<std::string> items_;
};

struct Vocabularies {
  Vocabulary words;  // lowercased forms
  Vocabulary lemmas;
  Vocabulary pos;
  Vocabulary chars;  // UTF-8 code points
};

Vocabularies build_vocabularies(const Corpus& corpus);
std::vector<std::string> utf8_characters(const std::string& text);

// One (sentence, predicate) training or scoring item; labels[i] is the silver label of token i+1.
struct IdentificationExample {
  const AnnotatedSentence* sentence = nullptr;
  std::size_t sentence_id = 0;
  int predicate = 0;
  std::vector<int> labels;
};

std::vector<IdentificationExample> make_examples(const Corpus& corpus, const Assignments& assignments);

class IdentifierModel {
 public:
  struct Outputs {
    nn::Var main_logits;  // 2 x n
    nn::Var adv_logits;   // 2 x n
  };

  static IdentifierModel create(const FeatureConfig& config, Vocabularies vocab, std::uint64_t seed);
  static IdentifierModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // x_i = [word; lemma; char-BiLSTM; POS; predicate flag] for every token.
  std::vector<nn::Var> encode_tokens(nn::Graph& g, const AnnotatedSentence& sentence, int predicate) const;
  Outputs forward(nn::Graph& g, std::span<const nn::Var> features) const;
  // Positive-class probability of the main classifier per token.
  std::vector<double> positive_probabilities(const AnnotatedSentence& sentence, int predicate) const;

  const FeatureConfig& config() const { return config_; }
  const Vocabularies& vocab() const { return vocab_; }
  nn::ParameterStore& store() { return store_; }
  const nn::ParameterStore& store() const { return store_; }

 private:
  void bind();

  FeatureConfig config_;
  Vocabularies vocab_;
  nn::ParameterStore store_;
  nn::Embedding word_, lemma_, char_, pos_, flag_;
  nn::BiLstm char_lstm_, word_lstm_;
  nn::Linear mlp_, main_, adversarial_;
};

struct LossTerms {
  nn::Var total;
  nn::Var main_sum;  // sum of per-token losses of the main classifier
  nn::Var adv_sum;   // sum of per-token losses of the adversarial classifier against 1 - y
};

// L = (1/N) sum l(p, y) + (zeta/N) sum l(p', 1 - y); the second term is dropped when the
// adversarial layer is off. `normalizer` is N (token count of the whole batch).
LossTerms identification_loss(nn::Graph& g, const IdentifierModel& model,
                              std::span<const IdentificationExample> examples, double zeta, bool adversarial,
                              LossForm form, double normalizer);

struct IdentifierTrainOptions {
  ZetaSchedule schedule;
  int batch = 128;
  std::uint64_t seed = 1;
  double learning_rate = 0.1;
  double l2 = 1e-6;
  LossForm loss_form = LossForm::log;
  bool adversarial = true;
};

struct EpochTrace {
  int epoch = 0;
  double zeta = 0.0;
  double main_loss = 0.0;  // mean per token
  double adv_loss = 0.0;   // mean per token
  std::optional<double> dev_f1;
};

struct TrainedIdentifier {
  IdentifierModel model;
  std::vector<EpochTrace> trace;
};

// Dev scorer called after each epoch; returns an F1 in [0, 1].
using DevScorer = std::function<double(const IdentifierModel&)>;

TrainedIdentifier train_identifier(const Corpus& corpus, const Assignments& silver, const FeatureConfig& config,
                                   const IdentifierTrainOptions& options, const DevScorer& dev = nullptr);

// Token is an argument iff the mean positive probability over the models reaches the threshold.
ArgumentAssignment ensemble_predict(std::span<const IdentifierModel* const> models, const AnnotatedSentence& sentence,
                                    std::size_t sentence_id, int predicate, double threshold = 0.5);

Assignments ensemble_predict_corpus(std::span<const IdentifierModel* const> models, const Corpus& corpus,
                                    bool verbs_only, double threshold = 0.5);

std::string format_trace_csv(const std::vector<EpochTrace>& trace);

}  // namespace usrl
