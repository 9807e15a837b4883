#include "csk/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include "csk/error.hpp"

namespace csk::nn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

SequenceBatch make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  SequenceBatch b;
  if (indices.empty()) return b;
  const LabeledSequence& first = data.at(indices.front());
  const Index t_len = first.x.rows();
  const Index dim = first.x.cols();
  const auto n = static_cast<Index>(indices.size());
  b.steps.assign(static_cast<std::size_t>(t_len), MatrixXd(dim, n));
  b.labels.reserve(indices.size());
  for (Index k = 0; k < n; ++k) {
    const LabeledSequence& s = data.at(indices[static_cast<std::size_t>(k)]);
    if (s.x.rows() != t_len || s.x.cols() != dim) throw Error(ErrorCode::ShapeMismatch, "sequences differ in shape");
    for (Index t = 0; t < t_len; ++t) b.steps[static_cast<std::size_t>(t)].col(k) = s.x.row(t).transpose();
    b.labels.push_back(s.label);
  }
  return b;
}

SequenceBatch make_batch(const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return make_batch(data, idx);
}

BiLstmModel BiLstmModel::zeros(int layers, int hidden, int input_dim, int classes, double dropout) {
  if (layers < 1 || hidden < 1 || input_dim < 1 || classes < 2) {
    throw Error(ErrorCode::InvalidArgument, "model needs layers, hidden, input >= 1 and at least two classes");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::InvalidArgument, "dropout must lie in [0, 1)");
  BiLstmModel m;
  m.layers = layers;
  m.hidden = hidden;
  m.input_dim = input_dim;
  m.classes = classes;
  m.dropout = dropout;
  m.lstm.resize(static_cast<std::size_t>(layers));
  for (int l = 0; l < layers; ++l) {
    const int din = l == 0 ? input_dim : 2 * hidden;
    for (auto& w : m.lstm[static_cast<std::size_t>(l)]) {
      w.wx = MatrixXd::Zero(4 * hidden, din);
      w.wh = MatrixXd::Zero(4 * hidden, hidden);
      w.b = VectorXd::Zero(4 * hidden);
    }
  }
  m.w1 = MatrixXd::Zero(hidden, 2 * hidden);
  m.b1 = VectorXd::Zero(hidden);
  m.w2 = MatrixXd::Zero(classes, hidden);
  m.b2 = VectorXd::Zero(classes);
  return m;
}

BiLstmModel BiLstmModel::initialized(int layers, int hidden, int input_dim, int classes, double dropout,
                                     std::uint64_t seed) {
  BiLstmModel m = zeros(layers, hidden, input_dim, classes, dropout);
  std::mt19937_64 rng(seed);
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> u(-k, k);
  auto fill = [&](MatrixXd& w) {
    for (Index j = 0; j < w.cols(); ++j)
      for (Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
  };
  for (auto& layer : m.lstm) {
    for (auto& w : layer) {
      fill(w.wx);
      fill(w.wh);
      w.b.segment(hidden, hidden).setOnes();
    }
  }
  fill(m.w1);
  fill(m.w2);
  return m;
}

std::vector<std::span<double>> BiLstmModel::tensors() {
  std::vector<std::span<double>> out;
  auto add = [&](auto& t) { out.emplace_back(t.data(), static_cast<std::size_t>(t.size())); };
  for (auto& layer : lstm) {
    for (auto& w : layer) {
      add(w.wx);
      add(w.wh);
      add(w.b);
    }
  }
  add(w1);
  add(b1);
  add(w2);
  add(b2);
  return out;
}

std::vector<std::span<const double>> BiLstmModel::tensors() const {
  auto mut = const_cast<BiLstmModel*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

std::size_t BiLstmModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

namespace {

MatrixXd bernoulli_mask(Index rows, Index cols, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return MatrixXd::Ones(rows, cols);
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = keep(rng) ? scale : 0.0;
  return m;
}

MatrixXd sigmoid(const MatrixXd& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

void run_direction(const LstmWeights& w, const std::vector<MatrixXd>& inputs, bool reverse, int hidden,
                   DirectionCache& cache) {
  const auto t_len = static_cast<Index>(inputs.size());
  const Index batch = inputs.front().cols();
  const Index h4 = 4 * hidden;
  cache.gates.assign(inputs.size(), MatrixXd());
  cache.c.assign(inputs.size(), MatrixXd());
  cache.tanh_c.assign(inputs.size(), MatrixXd());
  cache.h.assign(inputs.size(), MatrixXd());
  MatrixXd h = MatrixXd::Zero(hidden, batch);
  MatrixXd c = MatrixXd::Zero(hidden, batch);
  MatrixXd pre(h4, batch);
  for (Index step = 0; step < t_len; ++step) {
    const auto t = static_cast<std::size_t>(reverse ? t_len - 1 - step : step);
    pre.noalias() = w.wx * inputs[t];
    pre.noalias() += w.wh * h;
    pre.colwise() += w.b;
    MatrixXd gates(h4, batch);
    gates.topRows(hidden) = sigmoid(pre.topRows(hidden));
    gates.middleRows(hidden, hidden) = sigmoid(pre.middleRows(hidden, hidden));
    gates.middleRows(2 * hidden, hidden) = pre.middleRows(2 * hidden, hidden).array().tanh().matrix();
    gates.bottomRows(hidden) = sigmoid(pre.bottomRows(hidden));
    c = (gates.middleRows(hidden, hidden).array() * c.array() +
         gates.topRows(hidden).array() * gates.middleRows(2 * hidden, hidden).array())
            .matrix();
    MatrixXd tc = c.array().tanh().matrix();
    h = (gates.bottomRows(hidden).array() * tc.array()).matrix();
    cache.gates[t] = std::move(gates);
    cache.c[t] = c;
    cache.tanh_c[t] = std::move(tc);
    cache.h[t] = h;
  }
}

// Accumulates weight gradients into `g` and input gradients into `dx`.
void backprop_direction(const LstmWeights& w, LstmWeights& g, const std::vector<MatrixXd>& inputs, bool reverse,
                        int hidden, const DirectionCache& cache, const std::vector<MatrixXd>& dh_ext,
                        std::vector<MatrixXd>& dx) {
  const auto t_len = static_cast<Index>(inputs.size());
  const Index batch = inputs.front().cols();
  MatrixXd dh_next = MatrixXd::Zero(hidden, batch);
  MatrixXd dc_next = MatrixXd::Zero(hidden, batch);
  MatrixXd dpre(4 * hidden, batch);
  for (Index step = t_len - 1; step >= 0; --step) {
    const auto t = static_cast<std::size_t>(reverse ? t_len - 1 - step : step);
    const auto tp = static_cast<std::size_t>(reverse ? t_len - step : step - 1);
    const bool has_prev = step > 0;

    const MatrixXd& gates = cache.gates[t];
    const auto i = gates.topRows(hidden).array();
    const auto f = gates.middleRows(hidden, hidden).array();
    const auto gg = gates.middleRows(2 * hidden, hidden).array();
    const auto o = gates.bottomRows(hidden).array();
    const auto tc = cache.tanh_c[t].array();

    const Eigen::ArrayXXd dh = (dh_ext[t] + dh_next).array();
    const Eigen::ArrayXXd dc = dh * o * (1.0 - tc.square()) + dc_next.array();
    if (has_prev) {
      dpre.middleRows(hidden, hidden) = (dc * cache.c[tp].array() * f * (1.0 - f)).matrix();
    } else {
      dpre.middleRows(hidden, hidden).setZero();
    }
    dpre.topRows(hidden) = (dc * gg * i * (1.0 - i)).matrix();
    dpre.middleRows(2 * hidden, hidden) = (dc * i * (1.0 - gg.square())).matrix();
    dpre.bottomRows(hidden) = (dh * tc * o * (1.0 - o)).matrix();

    g.wx.noalias() += dpre * inputs[t].transpose();
    if (has_prev) g.wh.noalias() += dpre * cache.h[tp].transpose();
    g.b += dpre.rowwise().sum();
    dx[t].noalias() += w.wx.transpose() * dpre;
    dh_next.noalias() = w.wh.transpose() * dpre;
    dc_next = (dc * f).matrix();
  }
}

void check_input(const BiLstmModel& model, const SequenceBatch& batch) {
  if (batch.length() == 0 || batch.batch_size() == 0) throw Error(ErrorCode::ShapeMismatch, "empty batch");
  if (batch.input_dim() != model.input_dim) {
    throw Error(ErrorCode::ShapeMismatch, "input width " + std::to_string(batch.input_dim()) + " but model expects " +
                                              std::to_string(model.input_dim));
  }
}

}  // namespace

DropoutMasks sample_masks(const BiLstmModel& model, Index steps, Index batch, std::mt19937_64& rng) {
  DropoutMasks m;
  m.between.resize(static_cast<std::size_t>(model.layers - 1));
  for (auto& per_t : m.between) {
    per_t.reserve(static_cast<std::size_t>(steps));
    for (Index t = 0; t < steps; ++t) per_t.push_back(bernoulli_mask(2 * model.hidden, batch, model.dropout, rng));
  }
  m.head = bernoulli_mask(model.hidden, batch, model.dropout, rng);
  return m;
}

ForwardCache bilstm_forward(const BiLstmModel& model, const SequenceBatch& batch, bool training,
                            const DropoutMasks* masks) {
  check_input(model, batch);
  if (training && masks == nullptr) throw Error(ErrorCode::InvalidArgument, "training forward needs dropout masks");
  const int hid = model.hidden;
  const auto t_len = static_cast<std::size_t>(batch.length());
  const Index b = batch.batch_size();

  ForwardCache cache;
  cache.training = training;
  if (training) cache.masks = *masks;
  cache.layers.resize(static_cast<std::size_t>(model.layers));

  for (std::size_t l = 0; l < cache.layers.size(); ++l) {
    LayerCache& lc = cache.layers[l];
    if (l == 0) {
      lc.input = batch.steps;
    } else {
      const LayerCache& below = cache.layers[l - 1];
      lc.input.resize(t_len);
      for (std::size_t t = 0; t < t_len; ++t) {
        MatrixXd out(2 * hid, b);
        out.topRows(hid) = below.dir[0].h[t];
        out.bottomRows(hid) = below.dir[1].h[t];
        if (training) out.array() *= cache.masks.between.at(l - 1).at(t).array();
        lc.input[t] = std::move(out);
      }
    }
    run_direction(model.lstm[l][0], lc.input, false, hid, lc.dir[0]);
    run_direction(model.lstm[l][1], lc.input, true, hid, lc.dir[1]);
  }

  const LayerCache& top = cache.layers.back();
  cache.h_final.resize(2 * hid, b);
  cache.h_final.topRows(hid) = top.dir[0].h[t_len - 1];
  cache.h_final.bottomRows(hid) = top.dir[1].h[0];
  cache.a1.noalias() = model.w1 * cache.h_final;
  cache.a1.colwise() += model.b1;
  cache.dropped = cache.a1.cwiseMax(0.0);
  if (training) cache.dropped.array() *= cache.masks.head.array();
  cache.logits.noalias() = model.w2 * cache.dropped;
  cache.logits.colwise() += model.b2;
  return cache;
}

MatrixXd softmax(const MatrixXd& logits) {
  MatrixXd p = logits;
  for (Index j = 0; j < p.cols(); ++j) {
    p.col(j).array() -= p.col(j).maxCoeff();
    p.col(j) = p.col(j).array().exp().matrix();
    p.col(j) /= p.col(j).sum();
  }
  return p;
}

double cross_entropy(const MatrixXd& logits, const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) != logits.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "label count differs from batch size");
  }
  double total = 0.0;
  for (Index j = 0; j < logits.cols(); ++j) {
    const int y = labels[static_cast<std::size_t>(j)];
    if (y < 0 || y >= logits.rows()) throw Error(ErrorCode::OutOfBounds, "label out of range");
    const double mx = logits.col(j).maxCoeff();
    const double lse = mx + std::log((logits.col(j).array() - mx).exp().sum());
    total += lse - logits(y, j);
  }
  return total / static_cast<double>(logits.cols());
}

BiLstmModel backward(const BiLstmModel& model, const ForwardCache& cache, const SequenceBatch& batch) {
  const int hid = model.hidden;
  const auto t_len = static_cast<std::size_t>(batch.length());
  const Index b = batch.batch_size();
  BiLstmModel g = BiLstmModel::zeros(model.layers, hid, model.input_dim, model.classes, model.dropout);

  MatrixXd dz = softmax(cache.logits);
  for (Index j = 0; j < b; ++j) dz(batch.labels[static_cast<std::size_t>(j)], j) -= 1.0;
  dz /= static_cast<double>(b);

  g.w2.noalias() = dz * cache.dropped.transpose();
  g.b2 = dz.rowwise().sum();
  MatrixXd da1 = model.w2.transpose() * dz;
  if (cache.training) da1.array() *= cache.masks.head.array();
  da1.array() *= (cache.a1.array() > 0.0).cast<double>();
  g.w1.noalias() = da1 * cache.h_final.transpose();
  g.b1 = da1.rowwise().sum();
  const MatrixXd dh_final = model.w1.transpose() * da1;

  // Upstream gradient on each direction's hidden states of the current layer.
  std::array<std::vector<MatrixXd>, 2> dh_ext;
  for (auto& v : dh_ext) v.assign(t_len, MatrixXd::Zero(hid, b));
  dh_ext[0][t_len - 1] = dh_final.topRows(hid);
  dh_ext[1][0] = dh_final.bottomRows(hid);

  for (std::size_t l = cache.layers.size(); l-- > 0;) {
    const LayerCache& lc = cache.layers[l];
    const Index din = lc.input.front().rows();
    std::vector<MatrixXd> dx(t_len, MatrixXd::Zero(din, b));
    for (int d = 0; d < 2; ++d) {
      backprop_direction(model.lstm[l][static_cast<std::size_t>(d)], g.lstm[l][static_cast<std::size_t>(d)],
                         lc.input, d == 1, hid, lc.dir[static_cast<std::size_t>(d)],
                         dh_ext[static_cast<std::size_t>(d)], dx);
    }
    if (l == 0) break;
    for (std::size_t t = 0; t < t_len; ++t) {
      if (cache.training) dx[t].array() *= cache.masks.between.at(l - 1).at(t).array();
      dh_ext[0][t] = dx[t].topRows(hid);
      dh_ext[1][t] = dx[t].bottomRows(hid);
    }
  }
  return g;
}

void adam_step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads,
               AdamState& state, double lr, const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw Error(ErrorCode::ShapeMismatch, "parameter and gradient lists differ");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "optimizer state does not fit");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    const auto p = params[k];
    const auto gr = grads[k];
    if (p.size() != gr.size() || p.size() != m.size()) throw Error(ErrorCode::ShapeMismatch, "tensor size mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gr[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gr[i] * gr[i];
      p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.epsilon);
    }
  }
}

PlateauScheduler::PlateauScheduler(double lr, double factor, int patience, double threshold)
    : lr_(lr), factor_(factor), patience_(patience), threshold_(threshold),
      best_(std::numeric_limits<double>::infinity()) {
  if (!(factor > 0.0 && factor < 1.0) || patience < 1) throw Error(ErrorCode::Config, "bad plateau schedule");
}

double PlateauScheduler::step(double val_loss) {
  if (val_loss < best_ - threshold_) {
    best_ = val_loss;
    bad_epochs_ = 0;
  } else if (++bad_epochs_ >= patience_) {
    lr_ *= factor_;
    bad_epochs_ = 0;
  }
  return lr_;
}

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw Error(ErrorCode::Config, "lr0 must be positive");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw Error(ErrorCode::Config, "plateau_factor must be in (0,1)");
  if (plateau_patience < 1 || early_stop_patience < 1) throw Error(ErrorCode::Config, "patience values out of range");
  if (max_epochs < 1 || batch_size < 1) throw Error(ErrorCode::Config, "max_epochs and batch_size must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw Error(ErrorCode::Config, "val_fraction must be in (0,1)");
  if (layers < 1 || hidden < 1) throw Error(ErrorCode::Config, "layers and hidden must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::Config, "dropout must be in [0,1)");
}

namespace {

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation evaluate(const BiLstmModel& model, const Dataset& data, const std::vector<std::size_t>& idx) {
  constexpr std::size_t kChunk = 256;
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < idx.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, idx.size() - start);
    const SequenceBatch b = make_batch(data, std::span(idx).subspan(start, n));
    const ForwardCache fc = bilstm_forward(model, b, false);
    loss += cross_entropy(fc.logits, b.labels) * static_cast<double>(n);
    for (Index j = 0; j < fc.logits.cols(); ++j) {
      Index arg = 0;
      fc.logits.col(j).maxCoeff(&arg);
      if (arg == b.labels[static_cast<std::size_t>(j)]) ++correct;
    }
  }
  const auto total = static_cast<double>(idx.size());
  return {loss / total, static_cast<double>(correct) / total};
}

}  // namespace

TrainResult train(const Dataset& data, int classes, const TrainConfig& cfg, const ValLossHook& hook) {
  cfg.validate();
  if (data.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two training sequences");
  const auto input_dim = static_cast<int>(data.front().x.cols());
  for (const auto& s : data) {
    if (s.label < 0 || s.label >= classes) throw Error(ErrorCode::OutOfBounds, "label out of range");
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  auto n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(data.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, data.size() - 1);
  const std::vector<std::size_t> val_idx(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  std::vector<std::size_t> train_idx(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));

  BiLstmModel model = BiLstmModel::initialized(cfg.layers, cfg.hidden, input_dim, classes, cfg.dropout, rng());
  BiLstmModel best = model;
  AdamState adam;
  PlateauScheduler sched(cfg.lr0, cfg.plateau_factor, cfg.plateau_patience);
  TrainLog log;
  double best_val = std::numeric_limits<double>::infinity();
  double first_val = 0.0;
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double train_loss = 0.0;
    const double lr = sched.lr();
    for (std::size_t start = 0; start < train_idx.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t n = std::min(static_cast<std::size_t>(cfg.batch_size), train_idx.size() - start);
      const SequenceBatch b = make_batch(data, std::span(train_idx).subspan(start, n));
      const DropoutMasks masks = sample_masks(model, b.length(), b.batch_size(), rng);
      const ForwardCache fc = bilstm_forward(model, b, true, &masks);
      train_loss += cross_entropy(fc.logits, b.labels) * static_cast<double>(n);
      const BiLstmModel g = backward(model, fc, b);
      adam_step(model.tensors(), g.tensors(), adam, lr);
    }
    train_loss /= static_cast<double>(train_idx.size());

    const Evaluation ev = evaluate(model, data, val_idx);
    const double val = hook ? hook(epoch, ev.loss) : ev.loss;
    log.epochs.push_back({epoch, train_loss, val, ev.accuracy, lr});
    if (epoch == 1) first_val = val;
    if (val < best_val) {
      best_val = val;
      best = model;
      log.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    sched.step(val);
    if (cfg.target_val_loss > 0.0 && val < cfg.target_val_loss) break;
    if (since_best >= cfg.early_stop_patience) break;
  }
  log.no_improvement = !(best_val < first_val);
  return {std::move(best), std::move(log)};
}

Prediction predict(const BiLstmModel& model, const SequenceBatch& batch) {
  const ForwardCache fc = bilstm_forward(model, batch, false);
  Prediction p;
  p.probabilities = softmax(fc.logits);
  p.labels.reserve(static_cast<std::size_t>(fc.logits.cols()));
  for (Index j = 0; j < fc.logits.cols(); ++j) {
    Index arg = 0;
    fc.logits.col(j).maxCoeff(&arg);
    p.labels.push_back(static_cast<int>(arg));
  }
  return p;
}

Prediction predict(const BiLstmModel& model, const Dataset& data) { return predict(model, make_batch(data)); }

namespace {

constexpr char kMagic[8] = {'C', 'S', 'K', 'L', 'S', 'T', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorCode::Io, "truncated model file");
  return v;
}

// (rows, cols) of every tensor in tensors() order.
std::vector<std::pair<Index, Index>> tensor_shapes(const BiLstmModel& m) {
  std::vector<std::pair<Index, Index>> s;
  for (const auto& layer : m.lstm) {
    for (const auto& w : layer) {
      s.emplace_back(w.wx.rows(), w.wx.cols());
      s.emplace_back(w.wh.rows(), w.wh.cols());
      s.emplace_back(w.b.rows(), 1);
    }
  }
  s.emplace_back(m.w1.rows(), m.w1.cols());
  s.emplace_back(m.b1.rows(), 1);
  s.emplace_back(m.w2.rows(), m.w2.cols());
  s.emplace_back(m.b2.rows(), 1);
  return s;
}

}  // namespace

void save_model(std::ostream& out, const BiLstmModel& model) {
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::int32_t>(out, model.layers);
  put<std::int32_t>(out, model.hidden);
  put<std::int32_t>(out, model.input_dim);
  put<std::int32_t>(out, model.classes);
  put<double>(out, model.dropout);
  const auto shapes = tensor_shapes(model);
  const auto tensors = model.tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shapes[k].first));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shapes[k].second));
    out.write(reinterpret_cast<const char*>(tensors[k].data()),
              static_cast<std::streamsize>(tensors[k].size() * sizeof(double)));
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing model");
}

BiLstmModel load_model(std::istream& in) {
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw Error(ErrorCode::Io, "not a model file");
  if (get<std::uint32_t>(in) != kVersion) throw Error(ErrorCode::Io, "unsupported model version");
  const int layers = get<std::int32_t>(in);
  const int hidden = get<std::int32_t>(in);
  const int input_dim = get<std::int32_t>(in);
  const int classes = get<std::int32_t>(in);
  const double dropout = get<double>(in);
  BiLstmModel m = BiLstmModel::zeros(layers, hidden, input_dim, classes, dropout);
  const auto shapes = tensor_shapes(m);
  auto tensors = m.tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    const auto rows = get<std::uint32_t>(in);
    const auto cols = get<std::uint32_t>(in);
    if (rows != shapes[k].first || cols != shapes[k].second) throw Error(ErrorCode::Io, "tensor shape mismatch");
    in.read(reinterpret_cast<char*>(tensors[k].data()), static_cast<std::streamsize>(tensors[k].size() * sizeof(double)));
    if (!in) throw Error(ErrorCode::Io, "truncated model file");
  }
  return m;
}

void save_model(const std::filesystem::path& path, const BiLstmModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string());
  save_model(out, model);
}

BiLstmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return load_model(in);
}

}  // namespace csk::nn
