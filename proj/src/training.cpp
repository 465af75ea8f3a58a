#include "bornseq/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "bornseq/errors.hpp"
#include "bornseq/linalg.hpp"
#include "bornseq/parallel.hpp"

namespace bornseq {

namespace {

constexpr std::size_t kChunk = 16;

void check_batch(const IsometricMps& mps, const Povm& povm, std::span<const Sequence> batch, const char* who) {
  if (povm.p != mps.p()) {
    std::ostringstream msg;
    msg << who << ": POVM acts on dimension " << povm.p << " but MPS has p = " << mps.p();
    throw ConfigError(msg.str());
  }
  if (batch.empty()) throw InputError(std::string(who) + ": empty batch");
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (static_cast<int>(batch[k].size()) != mps.n()) {
      std::ostringstream msg;
      msg << who << ": sequence " << k << " has length " << batch[k].size() << ", expected " << mps.n();
      throw InputError(msg.str());
    }
    for (int x : batch[k])
      if (x < 0 || x >= povm.v) {
        std::ostringstream msg;
        msg << who << ": sequence " << k << " contains token " << x << " outside [0, " << povm.v << ")";
        throw InputError(msg.str());
      }
  }
}

// Per-chunk gradient accumulator, laid out as per-site physical slices.
struct Accumulator {
  std::vector<std::vector<Mat>> sites;
  std::vector<Mat> kraus;
  double nll = 0.0;
  int clamped = 0;

  Accumulator(const IsometricMps& mps, int v, bool with_kraus) {
    sites.resize(mps.n());
    for (int i = 0; i < mps.n(); ++i)
      sites[i].assign(mps.p(), Mat::Zero(mps.bond_dims()[i], mps.bond_dims()[i + 1]));
    if (with_kraus) kraus.assign(v, Mat::Zero(mps.p(), mps.p()));
  }

  void add(const Accumulator& o) {
    for (std::size_t i = 0; i < sites.size(); ++i)
      for (std::size_t s = 0; s < sites[i].size(); ++s) sites[i][s] += o.sites[i][s];
    for (std::size_t x = 0; x < kraus.size(); ++x) kraus[x] += o.kraus[x];
    nll += o.nll;
    clamped += o.clamped;
  }
};

void accumulate_sequence(const IsometricMps& mps, const Povm& povm, const Sequence& x, double inv_batch,
                         double log_clamp, Accumulator& acc) {
  const int n = mps.n();
  std::vector<Mat> left(n + 1), right(n + 1);
  left[0] = Mat::Identity(1, 1);
  for (int i = 0; i < n; ++i) left[i + 1] = transfer::left(left[i], mps.slices(i), &povm.effects[x[i]]);
  const double prob = left[n](0, 0).real();
  if (!(prob > log_clamp)) {
    acc.nll -= std::log(log_clamp) * inv_batch;
    ++acc.clamped;
    return;
  }
  acc.nll -= std::log(prob) * inv_batch;

  right[n] = Mat::Identity(1, 1);
  for (int i = n - 1; i > 0; --i) right[i] = transfer::right(right[i + 1], mps.slices(i), &povm.effects[x[i]]);

  // d(-log p)/dp = -1/p; each environment gradient carries the factor 2 of
  // the dL/dRe + i dL/dIm convention.
  const double weight = -2.0 * inv_batch / prob;
  for (int i = 0; i < n; ++i) {
    const auto& slices = mps.slices(i);
    const Mat& effect = povm.effects[x[i]];
    const Mat right_t = right[i + 1].transpose();
    const auto p = static_cast<Eigen::Index>(slices.size());
    std::vector<Mat> env(p);
    for (Eigen::Index t = 0; t < p; ++t) env[t] = left[i] * slices[t] * right_t;
    for (Eigen::Index s = 0; s < p; ++s)
      for (Eigen::Index t = 0; t < p; ++t) {
        const cplx m = effect(s, t);
        if (m != cplx{0.0, 0.0}) acc.sites[i][s] += (weight * m) * env[t];
      }
    if (!acc.kraus.empty()) {
      Mat kernel(p, p);
      for (Eigen::Index t = 0; t < p; ++t)
        for (Eigen::Index s = 0; s < p; ++s) kernel(s, t) = slices[s].conjugate().cwiseProduct(env[t]).sum();
      acc.kraus[x[i]] += weight * (povm.kraus[x[i]] * kernel.transpose());
    }
  }
}

ComplexTensor slices_to_tensor(const std::vector<Mat>& slices) {
  const auto p = slices.size();
  const auto dl = static_cast<std::size_t>(slices.front().rows());
  const auto dr = static_cast<std::size_t>(slices.front().cols());
  ComplexTensor t({dl, p, dr});
  for (std::size_t a = 0; a < dl; ++a)
    for (std::size_t s = 0; s < p; ++s)
      for (std::size_t b = 0; b < dr; ++b) t[(a * p + s) * dr + b] = slices[s](a, b);
  return t;
}

double max_isometry_deviation(const IsometricMps& mps) {
  double dev = 0.0;
  for (int i = 0; i < mps.n(); ++i) dev = std::max(dev, isometry_deviation(mps.w_matrix(i)));
  return dev;
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("TrainConfig." + field + ": " + why);
  };
  if (!(lr_mps > 0.0)) fail("lr_mps", "must be > 0");
  if (!(lr_emb > 0.0)) fail("lr_emb", "must be > 0");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (epochs < 1) fail("epochs", "must be >= 1");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) fail("adam_beta1", "must lie in (0, 1)");
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) fail("adam_beta2", "must lie in (0, 1)");
  if (!(adam_eps > 0.0)) fail("adam_eps", "must be > 0");
  if (!(log_clamp > 0.0 && log_clamp < 1.0)) fail("log_clamp", "must lie in (0, 1)");
}

Model init_model(int n, int v, int p, int d_max, EmbeddingMode mode, std::uint64_t seed) {
  const Rng root(seed);
  if (mode == EmbeddingMode::one_hot && p != v) {
    std::ostringstream msg;
    msg << "init_model: one-hot embedding needs p == v, got p = " << p << ", v = " << v;
    throw ConfigError(msg.str());
  }
  Embedding embedding = mode == EmbeddingMode::one_hot
                            ? Embedding::one_hot(v)
                            : Embedding::trainable(EmbeddingParams::random(v, p, root.split(2).next_u64()));
  return {std::move(embedding), init_random_mps(n, p, d_max, root.split(1).next_u64())};
}

double batch_nll(const IsometricMps& mps, const Povm& povm, std::span<const Sequence> batch, double log_clamp) {
  check_batch(mps, povm, batch, "batch_nll");
  std::vector<double> terms(batch.size());
  parallel_chunks(batch.size(), kChunk * 4, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t k = begin; k < end; ++k)
      terms[k] = -std::log(std::max(sequence_probability(mps, povm, batch[k]), log_clamp));
  });
  double total = 0.0;
  for (double t : terms) total += t;
  return total / static_cast<double>(batch.size());
}

GradReport gradients(const Embedding& embedding, const IsometricMps& mps, std::span<const Sequence> batch,
                     double log_clamp, bool freeze_embedding) {
  const Povm povm = embedding.povm();
  check_batch(mps, povm, batch, "gradients");
  const bool with_kraus = embedding.is_trainable() && !freeze_embedding;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  std::vector<Accumulator> partial(chunk_count(batch.size(), kChunk),
                                   Accumulator(mps, povm.v, with_kraus));
  parallel_chunks(batch.size(), kChunk, [&](std::size_t begin, std::size_t end, std::size_t chunk) {
    for (std::size_t k = begin; k < end; ++k)
      accumulate_sequence(mps, povm, batch[k], inv_batch, log_clamp, partial[chunk]);
  });
  Accumulator& total = partial.front();
  for (std::size_t c = 1; c < partial.size(); ++c) total.add(partial[c]);

  GradReport report;
  report.nll = total.nll;
  report.clamped = total.clamped;
  for (const auto& site : total.sites) report.grad_mps.push_back(slices_to_tensor(site));
  if (embedding.is_trainable()) {
    const auto& params = embedding.params();
    if (with_kraus) {
      Mat grad_q(params.v * params.p, params.p);
      for (int x = 0; x < params.v; ++x) grad_q.middleRows(x * params.p, params.p) = total.kraus[x];
      report.grad_gamma = qr_backward(params.gamma, grad_q);
    } else {
      report.grad_gamma = Mat::Zero(params.gamma.rows(), params.gamma.cols());
    }
  }
  if (!std::isfinite(report.nll)) throw StateError("gradients: non-finite NLL");
  return report;
}

Mat tangent_project(const Mat& w, const Mat& g) {
  if (w.rows() != g.rows() || w.cols() != g.cols()) throw DimensionError("tangent_project: W and G shapes differ");
  const double dev = isometry_deviation(w);
  if (!(dev <= 1e-8)) {
    std::ostringstream msg;
    msg << "tangent_project: W is not isometric (max |W^H W - I| = " << dev << ")";
    throw StateError(msg.str());
  }
  const Mat wg = w.adjoint() * g;
  return g - w * (0.5 * (wg + wg.adjoint()));
}

Mat retract(const Mat& w, const Mat& t, double step) {
  if (w.rows() != t.rows() || w.cols() != t.cols()) throw DimensionError("retract: W and T shapes differ");
  if (step == 0.0) return w;
  return qr_reduced(w - step * t).q;
}

double finite_diff_check(const Model& model, std::span<const Sequence> batch, double eps, bool freeze_embedding,
                         double log_clamp) {
  const GradReport grads = gradients(model.embedding, model.mps, batch, log_clamp, freeze_embedding);
  const Povm povm = model.povm();
  double worst = 0.0;
  auto compare = [&](double analytic, double plus, double minus) {
    const double numeric = (plus - minus) / (2.0 * eps);
    worst = std::max(worst, std::abs(numeric - analytic) / std::max(std::abs(analytic), 1e-8));
  };

  for (int i = 0; i < model.n(); ++i) {
    const ComplexTensor& base = model.mps.tensor(i);
    for (std::size_t k = 0; k < base.size(); ++k) {
      for (const cplx dir : {cplx{1.0, 0.0}, cplx{0.0, 1.0}}) {
        IsometricMps probe = model.mps;
        ComplexTensor t = base;
        t[k] = base[k] + eps * dir;
        probe.set_tensor(i, t);
        const double plus = batch_nll(probe, povm, batch, log_clamp);
        t[k] = base[k] - eps * dir;
        probe.set_tensor(i, t);
        const double minus = batch_nll(probe, povm, batch, log_clamp);
        const cplx g = grads.grad_mps[i][k];
        compare(dir.real() != 0.0 ? g.real() : g.imag(), plus, minus);
      }
    }
  }

  if (model.embedding.is_trainable() && !freeze_embedding) {
    const EmbeddingParams& params = model.embedding.params();
    for (Eigen::Index r = 0; r < params.gamma.rows(); ++r)
      for (Eigen::Index c = 0; c < params.gamma.cols(); ++c)
        for (const cplx dir : {cplx{1.0, 0.0}, cplx{0.0, 1.0}}) {
          EmbeddingParams probe = params;
          probe.gamma(r, c) = params.gamma(r, c) + eps * dir;
          const double plus = batch_nll(model.mps, build_povm(probe), batch, log_clamp);
          probe.gamma(r, c) = params.gamma(r, c) - eps * dir;
          const double minus = batch_nll(model.mps, build_povm(probe), batch, log_clamp);
          const cplx g = grads.grad_gamma(r, c);
          compare(dir.real() != 0.0 ? g.real() : g.imag(), plus, minus);
        }
  }
  return worst;
}

Trainer::Trainer(Model model, TrainConfig config) : model_(std::move(model)), config_(config) {
  config_.validate();
  for (int i = 0; i < model_.n(); ++i) {
    const Mat w = model_.mps.w_matrix(i);
    site_moments_.push_back({Mat::Zero(w.rows(), w.cols()), Eigen::MatrixXd::Zero(w.rows(), w.cols())});
  }
  if (model_.embedding.is_trainable()) {
    const Mat& g = model_.embedding.params().gamma;
    gamma_moments_ = {Mat::Zero(g.rows(), g.cols()), Eigen::MatrixXd::Zero(g.rows(), g.cols())};
  }
}

Mat Trainer::adam_direction(Moments& moments, const Mat& grad) const {
  const double b1 = config_.adam_beta1;
  const double b2 = config_.adam_beta2;
  moments.first = b1 * moments.first + (1.0 - b1) * grad;
  moments.second = b2 * moments.second + (1.0 - b2) * grad.cwiseAbs2();
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  const Eigen::MatrixXd denom = ((moments.second / c2).cwiseSqrt().array() + config_.adam_eps).matrix();
  return (moments.first / c1).cwiseQuotient(denom.cast<cplx>());
}

StepInfo Trainer::step(std::span<const Sequence> batch) {
  const GradReport grads =
      gradients(model_.embedding, model_.mps, batch, config_.log_clamp, config_.freeze_embedding);
  ++steps_;

  for (int i = 0; i < model_.n(); ++i) {
    const Mat w = model_.mps.w_matrix(i);
    const Mat direction = adam_direction(site_moments_[i], IsometricMps::w_from_tensor(grads.grad_mps[i]));
    const Mat tangent = tangent_project(w, config_.lr_mps * direction);
    model_.mps.set_w_matrix(i, retract(w, tangent, 1.0));
  }
  if (model_.embedding.is_trainable() && !config_.freeze_embedding) {
    Mat& gamma = model_.embedding.params().gamma;
    gamma -= config_.lr_emb * adam_direction(gamma_moments_, grads.grad_gamma);
  }
  return {grads.nll, max_isometry_deviation(model_.mps)};
}

double Trainer::epoch(std::span<const Sequence> data, Rng& rng) {
  if (data.empty()) throw InputError("Trainer::epoch: empty dataset");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  double worst = 0.0;
  std::vector<Sequence> batch;
  for (std::size_t begin = 0; begin < order.size(); begin += config_.batch_size) {
    const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config_.batch_size));
    batch.clear();
    for (std::size_t k = begin; k < end; ++k) batch.push_back(data[order[k]]);
    const StepInfo info = step(batch);
    if (!std::isfinite(info.nll)) {
      std::ostringstream msg;
      msg << "training aborted: non-finite batch NLL at step " << steps_;
      throw StateError(msg.str());
    }
    worst = std::max(worst, info.max_isometry_dev);
  }
  return worst;
}

TrainResult train(Model init, std::span<const Sequence> train_set, std::span<const Sequence> test_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw InputError("train: empty training set");
  Trainer trainer(std::move(init), config);
  Rng shuffle_rng = Rng(config.seed).split(3);
  TrainResult result{trainer.model(), {}};
  const auto start = std::chrono::steady_clock::now();
  for (int e = 1; e <= config.epochs; ++e) {
    HistoryRow row;
    row.epoch = e;
    row.max_isometry_dev = trainer.epoch(train_set, shuffle_rng);
    const Povm povm = trainer.model().povm();
    row.train_nll = batch_nll(trainer.model().mps, povm, train_set, config.log_clamp);
    if (!test_set.empty()) row.test_nll = batch_nll(trainer.model().mps, povm, test_set, config.log_clamp);
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!std::isfinite(row.train_nll)) throw StateError("training aborted: non-finite train NLL");
    result.history.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  result.model = trainer.model();
  return result;
}

TrainResult train(std::span<const Sequence> dataset, int n, int v, int p, int d_max, const TrainConfig& config) {
  return train(init_model(n, v, p, d_max, EmbeddingMode::trainable, config.seed), dataset, {}, config);
}

void write_history_csv(const std::string& path, const std::vector<HistoryRow>& history) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write history CSV: " + path);
  out.imbue(std::locale::classic());
  out << "epoch,train_nll,test_nll,max_isometry_dev,wall_seconds\n";
  out << std::setprecision(17);
  for (const auto& row : history) {
    out << row.epoch << ',' << row.train_nll << ',';
    if (std::isfinite(row.test_nll)) out << row.test_nll;
    out << ',' << row.max_isometry_dev << ',' << std::setprecision(6) << row.wall_seconds << std::setprecision(17)
        << '\n';
  }
  if (!out) throw InputError("failed writing history CSV: " + path);
}

}  // namespace bornseq
