#pragma once

// Bidirectional LSTM sequence classifier with hand-written backpropagation.
//
// Architecture: a stack of bidirectional LSTM layers (gate order i, f, g, o),
// inverted dropout between layers, and a two-layer head
//   z = W2 . dropout(relu(W1 . [h_fwd(T-1); h_bwd(0)] + b1)) + b2.
// Everything runs in double precision and is deterministic for a given seed.

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

namespace csk::nn {

/// One labelled sequence, T x D (row t is the feature vector at step t).
struct LabeledSequence {
  Eigen::MatrixXd x;
  int label = 0;
};

using Dataset = std::vector<LabeledSequence>;

/// Time-major batch: steps[t] is D x B, column b belongs to sequence b.
struct SequenceBatch {
  std::vector<Eigen::MatrixXd> steps;
  std::vector<int> labels;

  Eigen::Index batch_size() const { return steps.empty() ? 0 : steps.front().cols(); }
  Eigen::Index length() const { return static_cast<Eigen::Index>(steps.size()); }
  Eigen::Index input_dim() const { return steps.empty() ? 0 : steps.front().rows(); }
};

/// Throws Error(ShapeMismatch) if the selected sequences differ in shape.
SequenceBatch make_batch(const Dataset& data, std::span<const std::size_t> indices);
SequenceBatch make_batch(const Dataset& data);

struct LstmWeights {
  Eigen::MatrixXd wx;  // 4H x D_in
  Eigen::MatrixXd wh;  // 4H x H
  Eigen::VectorXd b;   // 4H
};

struct BiLstmModel {
  int layers = 2;
  int hidden = 64;
  int input_dim = 0;
  int classes = 0;
  double dropout = 0.2;

  /// lstm[layer][0] runs left to right, lstm[layer][1] right to left.
  std::vector<std::array<LstmWeights, 2>> lstm;
  Eigen::MatrixXd w1;  // H x 2H
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // C x H
  Eigen::VectorXd b2;

  /// All parameters zero.
  static BiLstmModel zeros(int layers, int hidden, int input_dim, int classes, double dropout);
  /// Weights uniform in (-1/sqrt(H), 1/sqrt(H)), biases zero except forget gates at +1.
  static BiLstmModel initialized(int layers, int hidden, int input_dim, int classes, double dropout,
                                 std::uint64_t seed);

  /// Parameter tensors in serialisation order: for each layer, for each
  /// direction, wx, wh, b; then w1, b1, w2, b2.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::size_t parameter_count() const;
};

/// Inverted-dropout masks (entries 0 or 1/(1-p)).
struct DropoutMasks {
  std::vector<std::vector<Eigen::MatrixXd>> between;  // [layer boundary][t], 2H x B
  Eigen::MatrixXd head;                                // H x B
};

DropoutMasks sample_masks(const BiLstmModel& model, Eigen::Index steps, Eigen::Index batch, std::mt19937_64& rng);

struct DirectionCache {
  std::vector<Eigen::MatrixXd> gates;  // 4H x B, post-activation
  std::vector<Eigen::MatrixXd> c;
  std::vector<Eigen::MatrixXd> tanh_c;
  std::vector<Eigen::MatrixXd> h;
};

struct LayerCache {
  std::vector<Eigen::MatrixXd> input;  // what the layer consumed, after dropout
  std::array<DirectionCache, 2> dir;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Eigen::MatrixXd h_final;  // 2H x B
  Eigen::MatrixXd a1;       // H x B, pre-ReLU
  Eigen::MatrixXd dropped;  // H x B, after ReLU and dropout
  Eigen::MatrixXd logits;   // C x B
  bool training = false;
  DropoutMasks masks;
};

/// Forward pass. In training mode `masks` must be supplied (see sample_masks);
/// in inference mode dropout is the identity.
ForwardCache bilstm_forward(const BiLstmModel& model, const SequenceBatch& batch, bool training,
                            const DropoutMasks* masks = nullptr);

/// Column-wise softmax of C x B logits.
Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits);

/// Mean over the batch of -log softmax(z)[label]; logits are C x B.
double cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels);

/// Gradient of the mean cross-entropy with respect to every parameter.
BiLstmModel backward(const BiLstmModel& model, const ForwardCache& cache, const SequenceBatch& batch);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

/// One bias-corrected Adam update. State is sized on first use.
void adam_step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads,
               AdamState& state, double lr, const AdamConfig& cfg = {});

/// Multiplies the learning rate by `factor` after `patience` epochs without
/// a validation-loss improvement larger than `threshold`.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, int patience, double threshold = 1e-6);

  /// Feeds one epoch's validation loss and returns the learning rate to use next.
  double step(double val_loss);
  double lr() const { return lr_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double threshold_;
  double best_;
  int bad_epochs_ = 0;
};

struct TrainConfig {
  double lr0 = 1e-3;
  double plateau_factor = 0.5;
  int plateau_patience = 5;
  int max_epochs = 100;
  int batch_size = 32;
  int early_stop_patience = 15;
  std::uint64_t seed = 0;
  double val_fraction = 0.2;
  int layers = 2;
  int hidden = 64;
  double dropout = 0.2;
  /// Stop once validation loss falls below this value; 0 disables.
  double target_val_loss = 0.0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  /// Validation loss never improved on its first value.
  bool no_improvement = false;
};

struct TrainResult {
  BiLstmModel model;
  TrainLog log;
};

/// Lets tests substitute the validation loss seen by the scheduler.
using ValLossHook = std::function<double(int epoch, double measured)>;

/// Shuffled mini-batch Adam with a plateau schedule and early stopping.
/// The last val_fraction of a seeded shuffle is held out for validation; the
/// returned model is the one with the best validation loss.
TrainResult train(const Dataset& data, int classes, const TrainConfig& cfg, const ValLossHook& hook = {});

struct Prediction {
  std::vector<int> labels;
  Eigen::MatrixXd probabilities;  // C x B
};

Prediction predict(const BiLstmModel& model, const SequenceBatch& batch);
Prediction predict(const BiLstmModel& model, const Dataset& data);

/// Binary container: "CSKLSTM1", u32 version, i32 layers/hidden/input/classes,
/// f64 dropout, then every tensor as u32 rows, u32 cols and column-major f64
/// values, in BiLstmModel::tensors() order. Host byte order.
void save_model(std::ostream& out, const BiLstmModel& model);
BiLstmModel load_model(std::istream& in);
void save_model(const std::filesystem::path& path, const BiLstmModel& model);
BiLstmModel load_model(const std::filesystem::path& path);

}  // namespace csk::nn
