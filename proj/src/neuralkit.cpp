#include "neuralkit.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "errors.hpp"

namespace usrl::nn {

namespace {

constexpr char kMagic[8] = {'U', 'S', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kEndianTag = 0x01020304u;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream out;
    out << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x" << b.cols();
    throw Error(ErrorKind::invalid_argument, out.str());
  }
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorKind::parse, "checkpoint truncated");
  return value;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  auto n = read_pod<std::uint64_t>(in);
  if (n > (1ull << 32)) throw Error(ErrorKind::parse, "checkpoint string length corrupt");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw Error(ErrorKind::parse, "checkpoint truncated");
  return s;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(sizeof(double) * t.size()));
}

void read_tensor(std::istream& in, Tensor& t) {
  in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(sizeof(double) * t.size()));
  if (!in) throw Error(ErrorKind::parse, "checkpoint truncated");
}

}  // namespace

double Rng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * M_PI * u2);
  has_spare_ = true;
  return mean + stddev * r * std::cos(2.0 * M_PI * u2);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finaliser over the combined words
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Parameter& ParameterStore::add(const std::string& name, Tensor init, bool sparse_rows) {
  if (contains(name)) throw Error(ErrorKind::invalid_argument, "duplicate parameter " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Tensor::Zero(init.rows(), init.cols());
  p->accum = Tensor::Zero(init.rows(), init.cols());
  p->value = std::move(init);
  p->sparse_rows = sparse_rows;
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterStore::at(std::string_view name) {
  for (auto& p : params_) {
    if (p->name == name) return *p;
  }
  throw Error(ErrorKind::invalid_argument, "no parameter named " + std::string(name));
}

const Parameter& ParameterStore::at(std::string_view name) const {
  return const_cast<ParameterStore*>(this)->at(name);
}

bool ParameterStore::contains(std::string_view name) const {
  for (const auto& p : params_) {
    if (p->name == name) return true;
  }
  return false;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) {
    if (p->sparse_rows) {
      for (Index r : p->touched) p->grad.row(r).setZero();
      p->touched.clear();
    } else {
      p->grad.setZero();
    }
  }
}

void ParameterStore::scale_grad(double factor) {
  for (auto& p : params_) {
    if (p->sparse_rows) {
      for (Index r : p->touched) p->grad.row(r) *= factor;
    } else {
      p->grad *= factor;
    }
  }
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void save_checkpoint(std::ostream& out, const ParameterStore& store, const std::string& metadata) {
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kCheckpointVersion);
  write_pod(out, kEndianTag);
  write_pod<std::uint64_t>(out, store.seed);
  write_string(out, metadata);
  write_pod<std::uint64_t>(out, store.size());
  for (const auto& p : store) {
    write_string(out, p->name);
    write_pod<std::uint8_t>(out, p->sparse_rows ? 1 : 0);
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.rows()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.cols()));
    write_tensor(out, p->value);
    write_tensor(out, p->accum);
  }
  if (!out) throw Error(ErrorKind::io, "checkpoint write failed");
}

ParameterStore load_checkpoint(std::istream& in, std::string* metadata) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw Error(ErrorKind::parse, "not a usrl checkpoint");
  auto version = read_pod<std::uint32_t>(in);
  auto tag = read_pod<std::uint32_t>(in);
  if (tag != kEndianTag) throw Error(ErrorKind::version, "checkpoint written with a different byte order");
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::version, "checkpoint version " + std::to_string(version) + ", expected " +
                                        std::to_string(kCheckpointVersion));
  }
  ParameterStore store;
  store.seed = read_pod<std::uint64_t>(in);
  auto meta = read_string(in);
  if (metadata) *metadata = std::move(meta);
  auto count = read_pod<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name = read_string(in);
    bool sparse = read_pod<std::uint8_t>(in) != 0;
    auto rows = static_cast<Index>(read_pod<std::uint64_t>(in));
    auto cols = static_cast<Index>(read_pod<std::uint64_t>(in));
    Tensor value(rows, cols);
    read_tensor(in, value);
    auto& p = store.add(name, std::move(value), sparse);
    read_tensor(in, p.accum);
  }
  return store;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store, const std::string& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  save_checkpoint(out, store, metadata);
}

ParameterStore load_checkpoint(const std::filesystem::path& path, std::string* metadata) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  return load_checkpoint(in, metadata);
}

// ---------------------------------------------------------------------------------------------
// Graph

Var Graph::push(Tensor value, Backward back, const char* op) {
  if (!value.allFinite()) throw Error(ErrorKind::numeric, std::string("non-finite value produced by ") + op);
  nodes_.push_back(Node{std::move(value), Tensor(), std::move(back)});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

double Graph::scalar(Var x) const {
  const auto& t = value(x);
  if (t.size() != 1) throw Error(ErrorKind::invalid_argument, "scalar() on a non-scalar node");
  return t(0, 0);
}

Var Graph::constant(Tensor value) { return push(std::move(value), nullptr, "constant"); }

Var Graph::param(Parameter& p) {
  if (auto it = params_.find(&p); it != params_.end()) return it->second;
  return params_[&p] = push(p.value, [&p](Graph& gr, int self) { p.grad += gr.g(self); }, "param");
}

Var Graph::row(Parameter& table, Index r) {
  if (r < 0 || r >= table.value.rows()) throw Error(ErrorKind::invalid_argument, "row lookup out of range in " + table.name);
  return push(table.value.row(r).transpose(),
              [&table, r](Graph& gr, int self) {
                table.grad.row(r) += gr.g(self).transpose();
                if (table.sparse_rows) table.touched.insert(r);
              },
              "row");
}

Var Graph::matmul(Var a, Var b) {
  if (v(a.id).cols() != v(b.id).rows()) {
    std::ostringstream out;
    out << "matmul: shape mismatch " << v(a.id).rows() << "x" << v(a.id).cols() << " * " << v(b.id).rows() << "x"
        << v(b.id).cols();
    throw Error(ErrorKind::invalid_argument, out.str());
  }
  Tensor out = v(a.id) * v(b.id);
  return push(std::move(out),
              [a, b](Graph& gr, int self) {
                const Tensor& gs = gr.g(self);
                gr.g(a.id).noalias() += gs * gr.v(b.id).transpose();
                gr.g(b.id).noalias() += gr.v(a.id).transpose() * gs;
              },
              "matmul");
}

Var Graph::add(Var a, Var b) {
  check_same_shape(v(a.id), v(b.id), "add");
  return push(v(a.id) + v(b.id),
              [a, b](Graph& gr, int self) {
                gr.g(a.id) += gr.g(self);
                gr.g(b.id) += gr.g(self);
              },
              "add");
}

Var Graph::add_bias(Var m, Var bias) {
  if (v(bias.id).cols() != 1 || v(bias.id).rows() != v(m.id).rows()) {
    throw Error(ErrorKind::invalid_argument, "add_bias: bias must be a column matching the rows");
  }
  Tensor out = v(m.id).colwise() + v(bias.id).col(0);
  return push(std::move(out),
              [m, bias](Graph& gr, int self) {
                gr.g(m.id) += gr.g(self);
                gr.g(bias.id) += gr.g(self).rowwise().sum();
              },
              "add_bias");
}

Var Graph::sub(Var a, Var b) {
  check_same_shape(v(a.id), v(b.id), "sub");
  return push(v(a.id) - v(b.id),
              [a, b](Graph& gr, int self) {
                gr.g(a.id) += gr.g(self);
                gr.g(b.id) -= gr.g(self);
              },
              "sub");
}

Var Graph::cmul(Var a, Var b) {
  check_same_shape(v(a.id), v(b.id), "cmul");
  return push(v(a.id).cwiseProduct(v(b.id)),
              [a, b](Graph& gr, int self) {
                gr.g(a.id) += gr.g(self).cwiseProduct(gr.v(b.id));
                gr.g(b.id) += gr.g(self).cwiseProduct(gr.v(a.id));
              },
              "cmul");
}

Var Graph::scale(Var a, double k) {
  return push(v(a.id) * k, [a, k](Graph& gr, int self) { gr.g(a.id) += k * gr.g(self); }, "scale");
}

Var Graph::tanh(Var a) {
  Tensor out = v(a.id).array().tanh().matrix();
  return push(std::move(out),
              [a](Graph& gr, int self) {
                const Tensor& y = gr.v(self);
                gr.g(a.id).array() += gr.g(self).array() * (1.0 - y.array().square());
              },
              "tanh");
}

Var Graph::sigmoid(Var a) {
  Tensor out = v(a.id).unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
  });
  return push(std::move(out),
              [a](Graph& gr, int self) {
                const Tensor& y = gr.v(self);
                gr.g(a.id).array() += gr.g(self).array() * y.array() * (1.0 - y.array());
              },
              "sigmoid");
}

Var Graph::relu(Var a) {
  return push(v(a.id).cwiseMax(0.0),
              [a](Graph& gr, int self) {
                gr.g(a.id).array() += (gr.v(a.id).array() > 0.0).select(gr.g(self).array(), 0.0);
              },
              "relu");
}

Var Graph::softmax(Var a) {
  const Tensor& x = v(a.id);
  Tensor out(x.rows(), x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    auto e = (x.col(c).array() - x.col(c).maxCoeff()).exp();
    out.col(c) = (e / e.sum()).matrix();
  }
  return push(std::move(out),
              [a](Graph& gr, int self) {
                const Tensor& y = gr.v(self);
                const Tensor& gs = gr.g(self);
                for (Index c = 0; c < y.cols(); ++c) {
                  double inner = gs.col(c).dot(y.col(c));
                  gr.g(a.id).col(c).array() += y.col(c).array() * (gs.col(c).array() - inner);
                }
              },
              "softmax");
}

Var Graph::log_softmax(Var a) {
  const Tensor& x = v(a.id);
  Tensor out(x.rows(), x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    double m = x.col(c).maxCoeff();
    double lse = m + std::log((x.col(c).array() - m).exp().sum());
    out.col(c) = x.col(c).array() - lse;
  }
  return push(std::move(out),
              [a](Graph& gr, int self) {
                const Tensor& y = gr.v(self);
                const Tensor& gs = gr.g(self);
                for (Index c = 0; c < y.cols(); ++c) {
                  gr.g(a.id).col(c).array() += gs.col(c).array() - y.col(c).array().exp() * gs.col(c).sum();
                }
              },
              "log_softmax");
}

Var Graph::log_sigmoid(Var a) {
  // log sigma(x) = -(max(-x, 0) + log1p(exp(-|x|)))
  Tensor out = v(a.id).unaryExpr([](double x) { return -(std::max(-x, 0.0) + std::log1p(std::exp(-std::abs(x)))); });
  return push(std::move(out),
              [a](Graph& gr, int self) {
                Tensor sig_neg = gr.v(a.id).unaryExpr([](double x) {
                  if (x >= 0) {
                    double e = std::exp(-x);
                    return e / (1.0 + e);
                  }
                  return 1.0 / (1.0 + std::exp(x));
                });
                gr.g(a.id).array() += gr.g(self).array() * sig_neg.array();
              },
              "log_sigmoid");
}

Var Graph::concat(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorKind::invalid_argument, "concat of nothing");
  Index rows = 0;
  const Index cols = v(parts[0].id).cols();
  for (auto p : parts) {
    if (v(p.id).cols() != cols) throw Error(ErrorKind::invalid_argument, "concat: column mismatch");
    rows += v(p.id).rows();
  }
  Tensor out(rows, cols);
  Index offset = 0;
  for (auto p : parts) {
    out.middleRows(offset, v(p.id).rows()) = v(p.id);
    offset += v(p.id).rows();
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return push(std::move(out),
              [ids](Graph& gr, int self) {
                Index off = 0;
                for (auto p : ids) {
                  Index r = gr.v(p.id).rows();
                  gr.g(p.id) += gr.g(self).middleRows(off, r);
                  off += r;
                }
              },
              "concat");
}

Var Graph::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorKind::invalid_argument, "concat_cols of nothing");
  const Index rows = v(parts[0].id).rows();
  Index cols = 0;
  for (auto p : parts) {
    if (v(p.id).rows() != rows) throw Error(ErrorKind::invalid_argument, "concat_cols: row mismatch");
    cols += v(p.id).cols();
  }
  Tensor out(rows, cols);
  Index offset = 0;
  for (auto p : parts) {
    out.middleCols(offset, v(p.id).cols()) = v(p.id);
    offset += v(p.id).cols();
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return push(std::move(out),
              [ids](Graph& gr, int self) {
                Index off = 0;
                for (auto p : ids) {
                  Index c = gr.v(p.id).cols();
                  gr.g(p.id) += gr.g(self).middleCols(off, c);
                  off += c;
                }
              },
              "concat_cols");
}

Var Graph::slice(Var a, Index start, Index rows) {
  if (start < 0 || rows < 0 || start + rows > v(a.id).rows()) throw Error(ErrorKind::invalid_argument, "slice out of range");
  return push(v(a.id).middleRows(start, rows),
              [a, start, rows](Graph& gr, int self) { gr.g(a.id).middleRows(start, rows) += gr.g(self); }, "slice");
}

Var Graph::pick(Var a, Index r, Index c) {
  if (r < 0 || c < 0 || r >= v(a.id).rows() || c >= v(a.id).cols()) throw Error(ErrorKind::invalid_argument, "pick out of range");
  Tensor out(1, 1);
  out(0, 0) = v(a.id)(r, c);
  return push(std::move(out), [a, r, c](Graph& gr, int self) { gr.g(a.id)(r, c) += gr.g(self)(0, 0); }, "pick");
}

Var Graph::sum(Var a) {
  Tensor out(1, 1);
  out(0, 0) = v(a.id).sum();
  return push(std::move(out), [a](Graph& gr, int self) { gr.g(a.id).array() += gr.g(self)(0, 0); }, "sum");
}

Var Graph::dot(Var a, Var b) {
  check_same_shape(v(a.id), v(b.id), "dot");
  Tensor out(1, 1);
  out(0, 0) = v(a.id).cwiseProduct(v(b.id)).sum();
  return push(std::move(out),
              [a, b](Graph& gr, int self) {
                double gs = gr.g(self)(0, 0);
                gr.g(a.id) += gs * gr.v(b.id);
                gr.g(b.id) += gs * gr.v(a.id);
              },
              "dot");
}

Var Graph::add_n(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorKind::invalid_argument, "add_n of nothing");
  Tensor out = v(parts[0].id);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    check_same_shape(out, v(parts[i].id), "add_n");
    out += v(parts[i].id);
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return push(std::move(out),
              [ids](Graph& gr, int self) {
                for (auto p : ids) gr.g(p.id) += gr.g(self);
              },
              "add_n");
}

void Graph::backward(Var loss) {
  if (value(loss).size() != 1) throw Error(ErrorKind::invalid_argument, "backward needs a scalar loss");
  for (auto& n : nodes_) n.grad = Tensor::Zero(n.value.rows(), n.value.cols());
  nodes_[static_cast<std::size_t>(loss.id)].grad(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (n.back) n.back(*this, i);
  }
}

// ---------------------------------------------------------------------------------------------
// Layers

Tensor glorot(Index rows, Index cols, Rng& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) t(r, c) = rng.uniform(-bound, bound);
  }
  return t;
}

Tensor gaussian(Index rows, Index cols, double stddev, Rng& rng) {
  Tensor t(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) t(r, c) = rng.normal(0.0, stddev);
  }
  return t;
}

Linear Linear::create(ParameterStore& store, const std::string& name, Index in, Index out, Rng& rng) {
  store.add(name + ".W", glorot(out, in, rng));
  store.add(name + ".b", Tensor::Zero(out, 1));
  return bind(store, name);
}

Linear Linear::bind(ParameterStore& store, const std::string& name) {
  Linear l;
  l.weight_ = &store.at(name + ".W");
  l.bias_ = &store.at(name + ".b");
  return l;
}

Var Linear::operator()(Graph& g, Var x) const {
  return g.add_bias(g.matmul(g.param(*weight_), x), g.param(*bias_));
}

Embedding Embedding::create(ParameterStore& store, const std::string& name, Index rows, Index dim, Rng& rng) {
  store.add(name, gaussian(rows, dim, 0.1, rng), true);
  return bind(store, name);
}

Embedding Embedding::bind(ParameterStore& store, const std::string& name) {
  Embedding e;
  e.table_ = &store.at(name);
  return e;
}

LstmCell LstmCell::create(ParameterStore& store, const std::string& name, Index in, Index hidden, Rng& rng) {
  store.add(name + ".W", glorot(4 * hidden, in, rng));
  store.add(name + ".U", glorot(4 * hidden, hidden, rng));
  store.add(name + ".b", Tensor::Zero(4 * hidden, 1));
  return bind(store, name);
}

LstmCell LstmCell::bind(ParameterStore& store, const std::string& name) {
  LstmCell cell;
  cell.w_ = &store.at(name + ".W");
  cell.u_ = &store.at(name + ".U");
  cell.b_ = &store.at(name + ".b");
  return cell;
}

LstmCell::State LstmCell::initial(Graph& g) const {
  return {g.constant(Tensor::Zero(hidden(), 1)), g.constant(Tensor::Zero(hidden(), 1))};
}

LstmCell::State LstmCell::step(Graph& g, Var x, State prev) const {
  const Index h = hidden();
  if (g.value(x).rows() != in() || g.value(x).cols() != 1) {
    throw Error(ErrorKind::invalid_argument, "lstm step: input has " + std::to_string(g.value(x).rows()) +
                                                 " rows, cell expects " + std::to_string(in()));
  }
  Var pre = g.add_bias(g.add(g.matmul(g.param(*w_), x), g.matmul(g.param(*u_), prev.h)), g.param(*b_));
  Var i = g.sigmoid(g.slice(pre, 0, h));
  Var f = g.sigmoid(g.slice(pre, h, h));
  Var o = g.sigmoid(g.slice(pre, 2 * h, h));
  Var cand = g.tanh(g.slice(pre, 3 * h, h));
  Var c = g.add(g.cmul(f, prev.c), g.cmul(i, cand));
  Var out = g.cmul(o, g.tanh(c));
  return {out, c};
}

BiLstm BiLstm::create(ParameterStore& store, const std::string& name, Index in, Index hidden, Rng& rng) {
  auto f = LstmCell::create(store, name + ".fwd", in, hidden, rng);
  auto b = LstmCell::create(store, name + ".bwd", in, hidden, rng);
  return BiLstm(f, b);
}

BiLstm BiLstm::bind(ParameterStore& store, const std::string& name) {
  return BiLstm(LstmCell::bind(store, name + ".fwd"), LstmCell::bind(store, name + ".bwd"));
}

std::vector<Var> BiLstm::operator()(Graph& g, std::span<const Var> xs) const {
  if (xs.empty()) throw Error(ErrorKind::invalid_argument, "bilstm over an empty sequence");
  const std::size_t n = xs.size();
  std::vector<Var> fwd(n), bwd(n);
  auto state = forward_.initial(g);
  for (std::size_t t = 0; t < n; ++t) {
    state = forward_.step(g, xs[t], state);
    fwd[t] = state.h;
  }
  state = backward_.initial(g);
  for (std::size_t t = n; t-- > 0;) {
    state = backward_.step(g, xs[t], state);
    bwd[t] = state.h;
  }
  std::vector<Var> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    Var parts[2] = {fwd[t], bwd[t]};
    out[t] = g.concat(parts);
  }
  return out;
}

Var BiLstm::final_states(Graph& g, std::span<const Var> xs) const {
  if (xs.empty()) throw Error(ErrorKind::invalid_argument, "bilstm over an empty sequence");
  auto state = forward_.initial(g);
  for (auto x : xs) state = forward_.step(g, x, state);
  Var last_fwd = state.h;
  state = backward_.initial(g);
  for (std::size_t t = xs.size(); t-- > 0;) state = backward_.step(g, xs[t], state);
  Var parts[2] = {last_fwd, state.h};
  return g.concat(parts);
}

// ---------------------------------------------------------------------------------------------
// Optimisers

void adagrad_step(ParameterStore& store, const AdagradOptions& options) {
  auto update_rows = [&](Parameter& p, Index r, Index count) {
    auto value = p.value.middleRows(r, count);
    Tensor grad = p.grad.middleRows(r, count) + options.l2 * value;
    auto accum = p.accum.middleRows(r, count);
    accum.array() += grad.array().square();
    value.array() -= options.learning_rate * grad.array() / (accum.array().sqrt() + options.epsilon);
  };
  for (auto& p : store) {
    if (p->sparse_rows) {
      for (Index r : p->touched) update_rows(*p, r, 1);
    } else {
      update_rows(*p, 0, p->value.rows());
    }
  }
}

void sgd_step(ParameterStore& store, double learning_rate, double l2) {
  for (auto& p : store) {
    if (p->sparse_rows) {
      for (Index r : p->touched) {
        p->value.row(r) -= learning_rate * (p->grad.row(r) + l2 * p->value.row(r));
      }
    } else {
      p->value -= learning_rate * (p->grad + l2 * p->value);
    }
  }
}

GradientCheck check_gradients(ParameterStore& store, const std::function<Var(Graph&)>& loss, double step,
                              std::size_t max_entries, double floor) {
  store.zero_grad();
  // Mark every row touched so sparse tables report full gradients.
  for (auto& p : store) {
    p->grad.setZero();
    p->touched.clear();
  }
  {
    Graph g;
    Var l = loss(g);
    g.backward(l);
  }
  std::map<std::string, Tensor> analytic;
  for (auto& p : store) analytic[p->name] = p->grad;

  auto eval = [&] {
    Graph g;
    return g.scalar(loss(g));
  };

  GradientCheck result;
  for (auto& p : store) {
    const Index total = p->value.size();
    const Index stride =
        max_entries == 0 || static_cast<Index>(max_entries) >= total ? 1 : total / static_cast<Index>(max_entries);
    for (Index k = 0; k < total; k += stride) {
      double& x = p->value.data()[k];
      const double saved = x;
      x = saved + step;
      double plus = eval();
      x = saved - step;
      double minus = eval();
      x = saved;
      double numeric = (plus - minus) / (2.0 * step);
      double a = analytic[p->name].data()[k];
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++result.checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        std::ostringstream where;
        where << p->name << "[" << k << "] analytic=" << a << " numeric=" << numeric;
        result.worst = where.str();
      }
    }
  }
  store.zero_grad();
  for (auto& p : store) p->grad.setZero();
  return result;
}

}  // namespace usrl::nn
