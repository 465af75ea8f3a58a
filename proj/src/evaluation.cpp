#include "bornseq/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "bornseq/errors.hpp"
#include "bornseq/parallel.hpp"

namespace bornseq {

namespace {

void check_model(const IsometricMps& mps, const Povm& povm, const char* who) {
  if (povm.p != mps.p()) {
    std::ostringstream msg;
    msg << who << ": POVM acts on dimension " << povm.p << " but MPS has p = " << mps.p();
    throw ConfigError(msg.str());
  }
}

void check_data(std::span<const Sequence> data, int v, const char* who) {
  if (data.empty()) throw InputError(std::string(who) + ": empty dataset");
  const auto n = data.front().size();
  for (const auto& seq : data) {
    if (seq.size() != n) throw InputError(std::string(who) + ": sequences differ in length");
    for (int x : seq)
      if (x < 0 || x >= v) throw InputError(std::string(who) + ": token out of range");
  }
}

// p(x_i = a, x_j = b) for every j in `partners` (all > i), sharing the prefix sweep.
std::map<int, Eigen::MatrixXd> pair_marginals_from(const IsometricMps& mps, const Povm& povm, int i,
                                                   const std::vector<int>& partners) {
  std::map<int, Eigen::MatrixXd> out;
  if (partners.empty()) return out;
  const int last = *std::max_element(partners.begin(), partners.end());
  Mat prefix = Mat::Identity(1, 1);
  for (int k = 0; k < i; ++k) prefix = transfer::left(prefix, mps.slices(k), nullptr);
  for (int j : partners) out[j] = Eigen::MatrixXd::Zero(povm.v, povm.v);

  for (int a = 0; a < povm.v; ++a) {
    Mat env = transfer::left(prefix, mps.slices(i), &povm.effects[a]);
    for (int k = i + 1; k <= last; ++k) {
      if (auto it = out.find(k); it != out.end()) {
        const int d = mps.bond_dims()[k + 1];
        const Mat kernel = transfer::site_kernel(env, Mat::Identity(d, d), mps.slices(k));
        for (int b = 0; b < povm.v; ++b)
          it->second(a, b) = std::max(0.0, transfer::pair(povm.effects[b], kernel).real());
      }
      if (k < last) env = transfer::left(env, mps.slices(k), nullptr);
    }
  }
  return out;
}

PairCorrelationTable build_pair_table(const std::vector<std::pair<int, int>>& pairs,
                                      const std::vector<Eigen::MatrixXd>& joint, const SiteMarginalTable& sites,
                                      double floor, StatSource source) {
  PairCorrelationTable table;
  table.source = source;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    const CorrelationMatrix corr =
        correlation(joint[k], sites.probs.row(i).transpose(), sites.probs.row(j).transpose(), floor);
    for (int a = 0; a < sites.v(); ++a)
      for (int b = 0; b < sites.v(); ++b)
        table.entries.push_back({i, j, a, b, joint[k](a, b), corr.value(a, b), corr.defined(a, b)});
  }
  return table;
}

void check_pairs(const std::vector<std::pair<int, int>>& pairs, int n) {
  for (const auto& [i, j] : pairs)
    if (i < 0 || j >= n || i >= j) throw InputError("pair list entries must satisfy 0 <= i < j < n");
}

}  // namespace

SiteMarginalTable model_site_marginals(const IsometricMps& mps, const Povm& povm) {
  check_model(mps, povm, "model_site_marginals");
  SiteMarginalTable table{Eigen::MatrixXd::Zero(mps.n(), povm.v), StatSource::model};
  Mat env = Mat::Identity(1, 1);
  for (int i = 0; i < mps.n(); ++i) {
    const int d = mps.bond_dims()[i + 1];
    const Mat kernel = transfer::site_kernel(env, Mat::Identity(d, d), mps.slices(i));
    for (int x = 0; x < povm.v; ++x)
      table.probs(i, x) = std::max(0.0, transfer::pair(povm.effects[x], kernel).real());
    if (i + 1 < mps.n()) env = transfer::left(env, mps.slices(i), nullptr);
  }
  return table;
}

SiteMarginalTable empirical_site_marginals(std::span<const Sequence> data, int v, double pseudocount) {
  check_data(data, v, "empirical_site_marginals");
  if (pseudocount < 0.0) throw InputError("empirical_site_marginals: pseudocount must be >= 0");
  const int n = static_cast<int>(data.front().size());
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n, v);
  for (const auto& seq : data)
    for (int i = 0; i < n; ++i) counts(i, seq[i]) += 1.0;
  const double denom = static_cast<double>(data.size()) + v * pseudocount;
  return {((counts.array() + pseudocount) / denom).matrix(), StatSource::empirical};
}

Eigen::MatrixXd model_pair_marginals(const IsometricMps& mps, const Povm& povm, int i, int j) {
  check_model(mps, povm, "model_pair_marginals");
  if (i == j) throw InputError("model_pair_marginals: sites must differ");
  if (i < 0 || j < 0 || i >= mps.n() || j >= mps.n()) throw InputError("model_pair_marginals: site out of range");
  if (i > j) return model_pair_marginals(mps, povm, j, i).transpose();
  return pair_marginals_from(mps, povm, i, {j}).at(j);
}

Eigen::MatrixXd empirical_pair_marginals(std::span<const Sequence> data, int v, int i, int j, double pseudocount) {
  check_data(data, v, "empirical_pair_marginals");
  const int n = static_cast<int>(data.front().size());
  if (i == j || i < 0 || j < 0 || i >= n || j >= n) throw InputError("empirical_pair_marginals: invalid site pair");
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(v, v);
  for (const auto& seq : data) counts(seq[i], seq[j]) += 1.0;
  const double denom = static_cast<double>(data.size()) + static_cast<double>(v) * v * pseudocount;
  return ((counts.array() + pseudocount) / denom).matrix();
}

CorrelationMatrix correlation(const Eigen::MatrixXd& pair, const Eigen::VectorXd& pi, const Eigen::VectorXd& pj,
                              double floor) {
  if (pair.rows() != pi.size() || pair.cols() != pj.size())
    throw DimensionError("correlation: pair matrix and marginal vectors disagree in size");
  CorrelationMatrix out{Eigen::MatrixXd::Constant(pair.rows(), pair.cols(), std::numeric_limits<double>::quiet_NaN()),
                        Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(pair.rows(), pair.cols(), false)};
  for (Eigen::Index a = 0; a < pair.rows(); ++a)
    for (Eigen::Index b = 0; b < pair.cols(); ++b) {
      if (!(pair(a, b) >= floor && pi(a) >= floor && pj(b) >= floor)) continue;
      out.value(a, b) = std::log(pair(a, b) / (pi(a) * pj(b)));
      out.defined(a, b) = true;
    }
  return out;
}

std::vector<std::pair<int, int>> all_pairs(int n) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  return pairs;
}

std::vector<std::pair<int, int>> subsample_pairs(int n, std::size_t count, Rng& rng) {
  auto pairs = all_pairs(n);
  if (count >= pairs.size()) return pairs;
  rng.shuffle(pairs);
  pairs.resize(count);
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

PairCorrelationTable model_pair_correlations(const IsometricMps& mps, const Povm& povm,
                                             const std::vector<std::pair<int, int>>& pairs, double floor) {
  check_model(mps, povm, "model_pair_correlations");
  check_pairs(pairs, mps.n());
  const SiteMarginalTable sites = model_site_marginals(mps, povm);

  std::map<int, std::vector<int>> by_first;
  for (const auto& [i, j] : pairs) by_first[i].push_back(j);
  std::vector<int> firsts;
  for (const auto& [i, js] : by_first) firsts.push_back(i);
  std::vector<std::map<int, Eigen::MatrixXd>> rows(firsts.size());
  parallel_chunks(firsts.size(), 1, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t k = begin; k < end; ++k)
      rows[k] = pair_marginals_from(mps, povm, firsts[k], by_first.at(firsts[k]));
  });
  std::map<int, std::size_t> slot;
  for (std::size_t k = 0; k < firsts.size(); ++k) slot[firsts[k]] = k;

  std::vector<Eigen::MatrixXd> joint;
  joint.reserve(pairs.size());
  for (const auto& [i, j] : pairs) joint.push_back(rows[slot.at(i)].at(j));
  return build_pair_table(pairs, joint, sites, floor, StatSource::model);
}

PairCorrelationTable empirical_pair_correlations(std::span<const Sequence> data, int v,
                                                 const std::vector<std::pair<int, int>>& pairs, double pseudocount,
                                                 double floor) {
  const SiteMarginalTable sites = empirical_site_marginals(data, v, pseudocount);
  check_pairs(pairs, sites.n());
  std::vector<Eigen::MatrixXd> joint;
  joint.reserve(pairs.size());
  for (const auto& [i, j] : pairs) joint.push_back(empirical_pair_marginals(data, v, i, j, pseudocount));
  return build_pair_table(pairs, joint, sites, floor, StatSource::empirical);
}

std::vector<ScatterRow> scatter_rows(const StatBundle& model_stats, const StatBundle& data_stats) {
  const auto& ms = model_stats.sites.probs;
  const auto& ds = data_stats.sites.probs;
  if (ms.rows() != ds.rows() || ms.cols() != ds.cols())
    throw InputError("scatter_rows: model and data site tables have different shapes");
  if (model_stats.pairs.entries.size() != data_stats.pairs.entries.size())
    throw InputError("scatter_rows: model and data pair tables have different sizes");

  std::vector<ScatterRow> rows;
  for (Eigen::Index i = 0; i < ms.rows(); ++i)
    for (Eigen::Index x = 0; x < ms.cols(); ++x)
      rows.push_back({false, static_cast<int>(i), -1, static_cast<int>(x), -1, ds(i, x), ms(i, x)});
  for (std::size_t k = 0; k < model_stats.pairs.entries.size(); ++k) {
    const auto& m = model_stats.pairs.entries[k];
    const auto& d = data_stats.pairs.entries[k];
    if (m.i != d.i || m.j != d.j || m.xi != d.xi || m.xj != d.xj)
      throw InputError("scatter_rows: model and data pair keys do not match");
    if (m.defined && d.defined) rows.push_back({true, m.i, m.j, m.xi, m.xj, d.c, m.c});
  }
  return rows;
}

void scatter_export(const StatBundle& model_stats, const StatBundle& data_stats, const std::string& path) {
  const auto rows = scatter_rows(model_stats, data_stats);
  std::ofstream out(path);
  if (!out) throw InputError("cannot write scatter CSV: " + path);
  out.imbue(std::locale::classic());
  out << "# pair feature: c(xi,xj) = log(p(xi,xj)/(p(xi)p(xj))); log_base=e\n";
  out << "feature_type,i,j,xi,xj,data_value,model_value\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    if (r.is_pair) {
      out << "pair," << r.i << ',' << r.j << ',' << r.xi << ',' << r.xj;
    } else {
      out << "site," << r.i << ",," << r.xi << ',';
    }
    out << ',' << r.data_value << ',' << r.model_value << '\n';
  }
  if (!out) throw InputError("failed writing scatter CSV: " + path);
}

Agreement agreement(const std::vector<ScatterRow>& rows) {
  Agreement a;
  double site_sq = 0.0, pair_sq = 0.0;
  for (const auto& r : rows) {
    const double d = r.model_value - r.data_value;
    if (r.is_pair) {
      pair_sq += d * d;
      ++a.pair_count;
    } else {
      site_sq += d * d;
      ++a.site_count;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  a.site_rms = a.site_count ? std::sqrt(site_sq / a.site_count) : nan;
  a.pair_rms = a.pair_count ? std::sqrt(pair_sq / a.pair_count) : nan;
  return a;
}

double test_nll(const IsometricMps& mps, const Povm& povm, std::span<const Sequence> test_set, double log_clamp) {
  return batch_nll(mps, povm, test_set, log_clamp);
}

}  // namespace bornseq
