#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bornseq/mps.hpp"
#include "bornseq/povm.hpp"
#include "bornseq/rng.hpp"
#include "bornseq/training.hpp"

namespace bornseq {

enum class StatSource { model, empirical };

/// probs(i, x) = p(x_i = x)
struct SiteMarginalTable {
  Eigen::MatrixXd probs;
  StatSource source = StatSource::model;

  int n() const { return static_cast<int>(probs.rows()); }
  int v() const { return static_cast<int>(probs.cols()); }
};

SiteMarginalTable model_site_marginals(const IsometricMps& mps, const Povm& povm);

/// (count + pseudocount) / (N + v * pseudocount)
SiteMarginalTable empirical_site_marginals(std::span<const Sequence> data, int v, double pseudocount = 0.0);

/// Entry (a, b) = p(x_i = a, x_j = b). Requires i != j.
Eigen::MatrixXd model_pair_marginals(const IsometricMps& mps, const Povm& povm, int i, int j);

/// (count + pseudocount) / (N + v^2 * pseudocount)
Eigen::MatrixXd empirical_pair_marginals(std::span<const Sequence> data, int v, int i, int j,
                                         double pseudocount = 0.0);

/// Probabilities below this leave a correlation entry undefined.
inline constexpr double kCorrelationFloor = 1e-12;

struct CorrelationMatrix {
  Eigen::MatrixXd value;  // ln(p(a,b) / (p_i(a) p_j(b))) where defined, NaN elsewhere
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> defined;
};

/// Two-site log-ratio ("Pearson") correlation, natural log.
CorrelationMatrix correlation(const Eigen::MatrixXd& pair, const Eigen::VectorXd& pi, const Eigen::VectorXd& pj,
                              double floor = kCorrelationFloor);

struct PairEntry {
  int i = 0;
  int j = 0;
  int xi = 0;
  int xj = 0;
  double pair_prob = 0.0;
  double c = 0.0;
  bool defined = false;
};

/// Entries keyed by (i, j, x_i, x_j) with i < j, in i-major, j-minor, x_i, x_j order.
struct PairCorrelationTable {
  std::vector<PairEntry> entries;
  StatSource source = StatSource::model;
};

std::vector<std::pair<int, int>> all_pairs(int n);
/// Uniform subset of `count` pairs (all when count >= n(n-1)/2), returned sorted.
std::vector<std::pair<int, int>> subsample_pairs(int n, std::size_t count, Rng& rng);

PairCorrelationTable model_pair_correlations(const IsometricMps& mps, const Povm& povm,
                                             const std::vector<std::pair<int, int>>& pairs,
                                             double floor = kCorrelationFloor);
PairCorrelationTable empirical_pair_correlations(std::span<const Sequence> data, int v,
                                                 const std::vector<std::pair<int, int>>& pairs,
                                                 double pseudocount = 0.0, double floor = kCorrelationFloor);

struct StatBundle {
  SiteMarginalTable sites;
  PairCorrelationTable pairs;
};

struct ScatterRow {
  bool is_pair = false;
  int i = 0;
  int j = -1;
  int xi = 0;
  int xj = -1;
  double data_value = 0.0;
  double model_value = 0.0;
};

/// Site rows for every (i, x); pair rows only where both sides are defined.
std::vector<ScatterRow> scatter_rows(const StatBundle& model_stats, const StatBundle& data_stats);

/// CSV: feature_type,i,j,xi,xj,data_value,model_value (after one '#' metadata line).
void scatter_export(const StatBundle& model_stats, const StatBundle& data_stats, const std::string& path);

struct Agreement {
  double site_rms = 0.0;
  double pair_rms = 0.0;
  std::size_t site_count = 0;
  std::size_t pair_count = 0;
};

/// Root-mean-square distance from the y = x diagonal, per feature type.
/// pair_rms is NaN when there are no pair rows.
Agreement agreement(const std::vector<ScatterRow>& rows);

double test_nll(const IsometricMps& mps, const Povm& povm, std::span<const Sequence> test_set,
                double log_clamp = 1e-300);

}  // namespace bornseq
