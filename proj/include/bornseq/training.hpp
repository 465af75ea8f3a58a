#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bornseq/mps.hpp"
#include "bornseq/povm.hpp"
#include "bornseq/rng.hpp"

namespace bornseq {

using Sequence = std::vector<int>;

struct TrainConfig {
  double lr_mps = 1e-2;
  double lr_emb = 1e-3;
  int batch_size = 32;
  int epochs = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool freeze_embedding = false;
  double log_clamp = 1e-300;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// Embedding plus backbone state; the complete set of trainable quantities.
struct Model {
  Embedding embedding;
  IsometricMps mps;

  Povm povm() const { return embedding.povm(); }
  int n() const { return mps.n(); }
  int v() const { return embedding.v(); }
  int p() const { return mps.p(); }
};

enum class EmbeddingMode { trainable, one_hot };

/// Random isometric MPS plus either random gamma or the one-hot POVM (which
/// requires p == v). Sub-seeds are split from `seed`.
Model init_model(int n, int v, int p, int d_max, EmbeddingMode mode, std::uint64_t seed);

/// Ambient gradients of the batch NLL, G = dL/dRe + i dL/dIm.
struct GradReport {
  std::vector<ComplexTensor> grad_mps;  // same shapes as the MPS tensors
  Mat grad_gamma;                       // zeros when frozen, 0x0 for one-hot
  double nll = 0.0;
  int clamped = 0;                      // sequences whose probability hit log_clamp
};

/// Mean of -log(max(p(x), log_clamp)).
double batch_nll(const IsometricMps& mps, const Povm& povm, std::span<const Sequence> batch,
                 double log_clamp = 1e-300);

/// Per-site gradients come from the left/right environments around a hole at
/// each site; the embedding gradient accumulates dL/dQ per token block and
/// is pulled back through qr_backward. Clamped sequences have constant loss
/// and contribute no gradient.
GradReport gradients(const Embedding& embedding, const IsometricMps& mps, std::span<const Sequence> batch,
                     double log_clamp = 1e-300, bool freeze_embedding = false);

/// G - W herm(W^H G); throws StateError when W^H W deviates from I by more than 1e-8.
Mat tangent_project(const Mat& w, const Mat& g);

/// Q factor of W - step * T. step == 0 returns W unchanged.
Mat retract(const Mat& w, const Mat& t, double step);

/// Max relative error between central differences of batch_nll (per real and
/// imaginary component of every trainable entry) and the analytic gradient.
/// Denominators are floored at 1e-8.
double finite_diff_check(const Model& model, std::span<const Sequence> batch, double eps,
                         bool freeze_embedding = false, double log_clamp = 1e-300);

struct HistoryRow {
  int epoch = 0;
  double train_nll = 0.0;
  double test_nll = std::numeric_limits<double>::quiet_NaN();
  double max_isometry_dev = 0.0;
  double wall_seconds = 0.0;
};

struct StepInfo {
  double nll = 0.0;                // batch NLL before the update
  double max_isometry_dev = 0.0;   // after the update
};

/// Adam on ambient coordinates with one learning rate per parameter group.
/// MPS updates are projected to the tangent space of each site's isometry and
/// retracted by QR; gamma is updated freely since the QR in build_povm
/// restores a valid POVM on the next forward pass.
class Trainer {
 public:
  Trainer(Model model, TrainConfig config);

  StepInfo step(std::span<const Sequence> batch);
  /// One pass over `data` in a shuffled order; the final short batch is kept.
  /// Returns the largest isometry deviation seen after any step.
  double epoch(std::span<const Sequence> data, Rng& rng);

  const Model& model() const { return model_; }
  const TrainConfig& config() const { return config_; }
  long steps() const { return steps_; }

 private:
  struct Moments {
    Mat first;
    Eigen::MatrixXd second;
  };
  Mat adam_direction(Moments& moments, const Mat& grad) const;

  Model model_;
  TrainConfig config_;
  std::vector<Moments> site_moments_;
  Moments gamma_moments_;
  long steps_ = 0;
};

struct TrainResult {
  Model model;
  std::vector<HistoryRow> history;
};

using EpochCallback = std::function<void(const HistoryRow&)>;

TrainResult train(Model init, std::span<const Sequence> train_set, std::span<const Sequence> test_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Trainable embedding initialized from config.seed.
TrainResult train(std::span<const Sequence> dataset, int n, int v, int p, int d_max, const TrainConfig& config);

/// Columns: epoch,train_nll,test_nll,max_isometry_dev,wall_seconds
void write_history_csv(const std::string& path, const std::vector<HistoryRow>& history);

}  // namespace bornseq
