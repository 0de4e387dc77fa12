#pragma once

// Small reverse-mode autodiff kernel shared by the identification and role models.
//
// A Graph is a tape of nodes rebuilt for every example or minibatch. Values are float64
// Eigen matrices; column vectors are n x 1. Every op checks its output for NaN/Inf.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace usrl::nn {

using Tensor = Eigen::MatrixXd;
using Index = Eigen::Index;

// Deterministic RNG: raw mt19937_64 output mapped by hand so results do not depend on the
// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal(double mean, double stddev);
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent seed for a named sub-stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor accum;  // Adagrad: running sum of squared gradients
  // Lookup tables: gradients and updates only touch the rows used since the last zero_grad.
  bool sparse_rows = false;
  std::set<Index> touched;
};

class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& add(const std::string& name, Tensor init, bool sparse_rows = false);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  void zero_grad();
  void scale_grad(double factor);
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.cbegin(); }
  auto end() const { return params_.cend(); }

  std::uint64_t seed = 0;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

constexpr std::uint32_t kCheckpointVersion = 1;

// Binary checkpoint: magic, version, endianness tag, seed, metadata blob, then per parameter
// name, shape, values and Adagrad state.
void save_checkpoint(std::ostream& out, const ParameterStore& store, const std::string& metadata);
ParameterStore load_checkpoint(std::istream& in, std::string* metadata);
void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store, const std::string& metadata);
ParameterStore load_checkpoint(const std::filesystem::path& path, std::string* metadata);

struct Var {
  int id = -1;
};

class Graph {
 public:
  Var constant(Tensor value);
  Var param(Parameter& p);
  // Row `r` of a lookup table, returned as a column vector.
  Var row(Parameter& table, Index r);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var add_bias(Var m, Var bias);  // bias (n x 1) broadcast over the columns of m
  Var sub(Var a, Var b);
  Var cmul(Var a, Var b);
  Var scale(Var a, double k);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var relu(Var a);
  Var softmax(Var a);      // per column
  Var log_softmax(Var a);  // per column
  Var log_sigmoid(Var a);
  Var concat(std::span<const Var> parts);       // stacks rows
  Var concat_cols(std::span<const Var> parts);  // stacks columns
  Var slice(Var a, Index start, Index rows);
  Var pick(Var a, Index r, Index c = 0);
  Var sum(Var a);
  Var dot(Var a, Var b);
  Var add_n(std::span<const Var> parts);

  const Tensor& value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).value; }
  double scalar(Var v) const;
  const Tensor& grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).grad; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and propagates into node and parameter gradients.
  void backward(Var loss);

 private:
  using Backward = std::function<void(Graph&, int)>;
  struct Node {
    Tensor value;
    Tensor grad;
    Backward back;
  };

  Var push(Tensor value, Backward back, const char* op);
  Tensor& g(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
  const Tensor& v(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  std::vector<Node> nodes_;
  std::map<const Parameter*, Var> params_;
};

// Glorot-uniform weights, zero bias.
Tensor glorot(Index rows, Index cols, Rng& rng);
Tensor gaussian(Index rows, Index cols, double stddev, Rng& rng);

class Linear {
 public:
  Linear() = default;
  static Linear create(ParameterStore& store, const std::string& name, Index in, Index out, Rng& rng);
  static Linear bind(ParameterStore& store, const std::string& name);

  Var operator()(Graph& g, Var x) const;
  Index in() const { return weight_->value.cols(); }
  Index out() const { return weight_->value.rows(); }
  Parameter& weight() const { return *weight_; }
  Parameter& bias() const { return *bias_; }

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
};

class Embedding {
 public:
  Embedding() = default;
  static Embedding create(ParameterStore& store, const std::string& name, Index rows, Index dim, Rng& rng);
  static Embedding bind(ParameterStore& store, const std::string& name);

  Var operator()(Graph& g, Index row) const { return g.row(*table_, row); }
  Index rows() const { return table_->value.rows(); }
  Index dim() const { return table_->value.cols(); }
  Parameter& table() const { return *table_; }

 private:
  Parameter* table_ = nullptr;
};

// LSTM cell. Stacked gate layout in W (4h x in), U (4h x h), b (4h): input, forget, output, candidate.
//   i = sigma(.), f = sigma(.), o = sigma(.), g = tanh(.)
//   c' = f * c + i * g,  h' = o * tanh(c')
class LstmCell {
 public:
  struct State {
    Var h;
    Var c;
  };

  LstmCell() = default;
  static LstmCell create(ParameterStore& store, const std::string& name, Index in, Index hidden, Rng& rng);
  static LstmCell bind(ParameterStore& store, const std::string& name);

  State initial(Graph& g) const;
  State step(Graph& g, Var x, State prev) const;
  Index hidden() const { return u_->value.cols(); }
  Index in() const { return w_->value.cols(); }

 private:
  Parameter* w_ = nullptr;
  Parameter* u_ = nullptr;
  Parameter* b_ = nullptr;
};

class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(LstmCell forward, LstmCell backward) : forward_(forward), backward_(backward) {}
  static BiLstm create(ParameterStore& store, const std::string& name, Index in, Index hidden, Rng& rng);
  static BiLstm bind(ParameterStore& store, const std::string& name);

  // Output t = [forward h_t; backward h_t]; throws on an empty sequence.
  std::vector<Var> operator()(Graph& g, std::span<const Var> xs) const;
  // [forward h_{n-1}; backward h_0]: the last state each direction reaches.
  Var final_states(Graph& g, std::span<const Var> xs) const;
  Index hidden() const { return forward_.hidden(); }
  const LstmCell& forward_cell() const { return forward_; }
  const LstmCell& backward_cell() const { return backward_; }

 private:
  LstmCell forward_;
  LstmCell backward_;
};

struct AdagradOptions {
  double learning_rate = 0.1;
  double l2 = 0.0;
  double epsilon = 1e-8;
};

// theta <- theta - lr * g / (sqrt(G) + eps), with G += g^2 and g = grad + l2 * theta.
void adagrad_step(ParameterStore& store, const AdagradOptions& options);
void sgd_step(ParameterStore& store, double learning_rate, double l2);

struct GradientCheck {
  double max_relative_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

// Central finite differences over parameter entries (at most `max_entries` per parameter,
// spread evenly; 0 means all). Relative error is |a - n| / max(|a|, |n|, floor).
GradientCheck check_gradients(ParameterStore& store, const std::function<Var(Graph&)>& loss, double step = 1e-5,
                              std::size_t max_entries = 0, double floor = 1e-6);

}  // namespace usrl::nn
