#include "bornseq/inference.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "bornseq/errors.hpp"

namespace bornseq {

namespace {

void check_model(const IsometricMps& mps, const Povm& povm, const char* who) {
  if (povm.p != mps.p()) {
    std::ostringstream msg;
    msg << who << ": POVM acts on dimension " << povm.p << " but MPS has p = " << mps.p();
    throw ConfigError(msg.str());
  }
}

void check_assignment(const IsometricMps& mps, const Povm& povm, const PartialAssignment& assign,
                      const char* who) {
  if (assign.n != mps.n()) {
    std::ostringstream msg;
    msg << who << ": assignment length " << assign.n << " does not match n = " << mps.n();
    throw InputError(msg.str());
  }
  for (const auto& [site, token] : assign.assigned) {
    if (site < 0 || site >= mps.n() || token < 0 || token >= povm.v) {
      std::ostringstream msg;
      msg << who << ": assignment site " << site << " -> token " << token << " out of range";
      throw InputError(msg.str());
    }
  }
}

const Mat* effect_at(const Povm& povm, const std::vector<int>& tokens, int site) {
  const int x = tokens[site];
  return x == kHole ? nullptr : &povm.effects[x];
}

// Computes single-site conditionals for a sequence of growing assignments.
// The left environment over sites [0, left_upto_) is reused while new
// assignments land at or to the right of left_upto_, which is the causal
// sampling pattern; any other order recomputes what it needs.
class ConditionalEngine {
 public:
  ConditionalEngine(const IsometricMps& mps, const Povm& povm)
      : mps_(mps), povm_(povm), tokens_(mps.n(), kHole), left_env_(Mat::Identity(1, 1)) {}

  void assign(int site, int token) {
    tokens_[site] = token;
    if (site < left_upto_) {
      left_upto_ = 0;
      left_env_ = Mat::Identity(1, 1);
    }
    last_assigned_ = std::max(last_assigned_, site);
  }

  const std::vector<int>& tokens() const { return tokens_; }

  // Unnormalized weights p(x_site = x, x_assigned), plus their total.
  std::vector<double> conditional(int site, double* total_out = nullptr) {
    for (; left_upto_ < site; ++left_upto_)
      left_env_ = transfer::left(left_env_, mps_.slices(left_upto_), effect_at(povm_, tokens_, left_upto_));
    if (left_upto_ > site) {
      left_upto_ = 0;
      left_env_ = Mat::Identity(1, 1);
      for (; left_upto_ < site; ++left_upto_)
        left_env_ = transfer::left(left_env_, mps_.slices(left_upto_), effect_at(povm_, tokens_, left_upto_));
    }

    const int last = std::max(last_assigned_, site);
    Mat right_env = Mat::Identity(mps_.bond_dims()[last + 1], mps_.bond_dims()[last + 1]);
    for (int i = last; i > site; --i)
      right_env = transfer::right(right_env, mps_.slices(i), effect_at(povm_, tokens_, i));

    const Mat kernel = transfer::site_kernel(left_env_, right_env, mps_.slices(site));
    const double total = kernel.trace().real();
    if (total_out) *total_out = total;
    if (!(total > kNullEventFloor)) {
      std::ostringstream msg;
      msg << "conditional at site " << site << ": conditioning event has probability " << total;
      throw NullEventError(msg.str());
    }
    std::vector<double> probs(povm_.v);
    for (int x = 0; x < povm_.v; ++x)
      probs[x] = std::max(0.0, transfer::pair(povm_.effects[x], kernel).real() / total);
    return probs;
  }

 private:
  const IsometricMps& mps_;
  const Povm& povm_;
  std::vector<int> tokens_;
  Mat left_env_;
  int left_upto_ = 0;
  int last_assigned_ = -1;
};

void check_permutation(std::span<const int> order, int n) {
  if (static_cast<int>(order.size()) != n) throw InputError("sample: order must list every site once");
  std::vector<bool> seen(n, false);
  for (int site : order) {
    if (site < 0 || site >= n || seen[site]) throw InputError("sample: order is not a permutation of the sites");
    seen[site] = true;
  }
}

}  // namespace

PartialAssignment PartialAssignment::with(int site, int token) const {
  PartialAssignment out = *this;
  out.assigned[site] = token;
  return out;
}

double joint_marginal(const IsometricMps& mps, const Povm& povm, const PartialAssignment& assign) {
  check_model(mps, povm, "joint_marginal");
  check_assignment(mps, povm, assign, "joint_marginal");
  if (assign.assigned.empty()) return 1.0;
  const int last = assign.assigned.rbegin()->first;
  Mat env = Mat::Identity(1, 1);
  for (int i = 0; i <= last; ++i) {
    const auto it = assign.assigned.find(i);
    env = transfer::left(env, mps.slices(i), it == assign.assigned.end() ? nullptr : &povm.effects[it->second]);
  }
  return env.trace().real();
}

std::vector<double> conditional_distribution(const IsometricMps& mps, const Povm& povm,
                                             const PartialAssignment& assign, int site) {
  check_model(mps, povm, "conditional_distribution");
  check_assignment(mps, povm, assign, "conditional_distribution");
  if (site < 0 || site >= mps.n()) throw InputError("conditional_distribution: site out of range");
  if (assign.contains(site)) throw InputError("conditional_distribution: site is already assigned");
  ConditionalEngine engine(mps, povm);
  for (const auto& [s, x] : assign.assigned) engine.assign(s, x);
  return engine.conditional(site);
}

CollapsedState::CollapsedState(const IsometricMps& mps, const Povm& povm, const PartialAssignment& assign) {
  check_model(mps, povm, "collapsed_state");
  check_assignment(mps, povm, assign, "collapsed_state");
  z_ = joint_marginal(mps, povm, assign);
  if (!(z_ > kNullEventFloor)) {
    std::ostringstream msg;
    msg << "collapsed_state: measurement outcome has probability " << z_;
    throw NullEventError(msg.str());
  }
  slices_.reserve(mps.n());
  for (int i = 0; i < mps.n(); ++i) {
    const auto& src = mps.slices(i);
    const auto it = assign.assigned.find(i);
    if (it == assign.assigned.end()) {
      slices_.push_back(src);
      continue;
    }
    const Mat& q = povm.kraus[it->second];
    std::vector<Mat> absorbed(src.size(), Mat::Zero(src.front().rows(), src.front().cols()));
    for (std::size_t s = 0; s < src.size(); ++s)
      for (std::size_t t = 0; t < src.size(); ++t) absorbed[s] += q(s, t) * src[t];
    slices_.push_back(std::move(absorbed));
  }
}

double CollapsedState::norm_squared() const {
  Mat env = Mat::Identity(1, 1);
  for (const auto& sl : slices_) env = transfer::left(env, sl, nullptr);
  return env(0, 0).real() / z_;
}

double CollapsedState::expectation(const Povm& povm, const PartialAssignment& measured) const {
  if (measured.n != n()) throw InputError("CollapsedState::expectation: assignment length mismatch");
  Mat env = Mat::Identity(1, 1);
  for (int i = 0; i < n(); ++i) {
    const auto it = measured.assigned.find(i);
    const Mat* effect = nullptr;
    if (it != measured.assigned.end()) {
      if (it->second < 0 || it->second >= povm.v) throw InputError("CollapsedState::expectation: token out of range");
      effect = &povm.effects[it->second];
    }
    env = transfer::left(env, slices_[i], effect);
  }
  return env(0, 0).real() / z_;
}

CollapsedState collapsed_state(const IsometricMps& mps, const Povm& povm, const PartialAssignment& assign) {
  return CollapsedState(mps, povm, assign);
}

int draw_from(std::span<const double> probs, double u) {
  double cumulative = 0.0;
  int last_positive = -1;
  for (std::size_t x = 0; x < probs.size(); ++x) {
    if (!(probs[x] > 0.0)) continue;
    last_positive = static_cast<int>(x);
    cumulative = std::clamp(cumulative + probs[x], 0.0, 1.0);
    if (u <= cumulative) return static_cast<int>(x);
  }
  if (last_positive < 0) throw NullEventError("draw_from: distribution has no mass");
  return last_positive;
}

std::vector<int> sample(const IsometricMps& mps, const Povm& povm, std::span<const int> order, Rng& rng) {
  check_model(mps, povm, "sample");
  check_permutation(order, mps.n());
  ConditionalEngine engine(mps, povm);
  for (int site : order) {
    const auto probs = engine.conditional(site);
    engine.assign(site, draw_from(probs, rng.uniform()));
  }
  return engine.tokens();
}

std::vector<int> masked_fill(const IsometricMps& mps, const Povm& povm, std::span<const int> tmpl,
                             Rng& rng, FillMode mode) {
  check_model(mps, povm, "masked_fill");
  if (static_cast<int>(tmpl.size()) != mps.n()) {
    std::ostringstream msg;
    msg << "masked_fill: template length " << tmpl.size() << " does not match n = " << mps.n();
    throw InputError(msg.str());
  }
  PartialAssignment fixed(mps.n());
  std::vector<int> holes;
  for (int i = 0; i < mps.n(); ++i) {
    if (tmpl[i] == kHole) {
      holes.push_back(i);
    } else if (tmpl[i] < 0 || tmpl[i] >= povm.v) {
      std::ostringstream msg;
      msg << "masked_fill: token " << tmpl[i] << " at position " << i << " out of range";
      throw InputError(msg.str());
    } else {
      fixed.assigned[i] = tmpl[i];
    }
  }
  if (holes.empty()) return {tmpl.begin(), tmpl.end()};

  ConditionalEngine engine(mps, povm);
  for (const auto& [s, x] : fixed.assigned) engine.assign(s, x);
  for (int site : holes) {
    const auto probs = engine.conditional(site);
    int token = 0;
    if (mode == FillMode::greedy) {
      token = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    } else {
      token = draw_from(probs, rng.uniform());
    }
    engine.assign(site, token);
  }
  return engine.tokens();
}

double chain_rule_probability(const IsometricMps& mps, const Povm& povm, std::span<const int> tokens,
                              std::span<const int> order) {
  check_model(mps, povm, "chain_rule_probability");
  check_permutation(order, mps.n());
  if (static_cast<int>(tokens.size()) != mps.n())
    throw InputError("chain_rule_probability: sequence length mismatch");
  ConditionalEngine engine(mps, povm);
  double prob = 1.0;
  for (int site : order) {
    const int x = tokens[site];
    if (x < 0 || x >= povm.v) throw InputError("chain_rule_probability: token out of range");
    prob *= engine.conditional(site)[x];
    engine.assign(site, x);
  }
  return prob;
}

}  // namespace bornseq
