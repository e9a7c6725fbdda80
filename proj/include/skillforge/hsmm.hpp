#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <vector>

#include "skillforge/tpgmm.hpp"

namespace skf {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// Gaussian dwell-time model for one state, discretized on [1, tau_max].
struct DurationModel {
  double mean = 1;
  double std = 1;

  int tau_max() const { return std::max(1, static_cast<int>(std::ceil(mean + 3.0 * std))); }

  // Log-pmf over tau = 1..tau_max, renormalized.
  VecX log_pmf() const {
    const int n = tau_max();
    VecX lp(n);
    for (int tau = 1; tau <= n; ++tau) {
      const double z = (tau - mean) / std;
      lp[tau - 1] = -0.5 * z * z;
    }
    const double mx = lp.maxCoeff();
    const double lse = mx + std::log((lp.array() - mx).exp().sum());
    return lp.array() - lse;
  }
};

// Task-parametrized hidden semi-Markov model. Transition diagonal is zero by
// construction: dwell time lives in the duration models.
template <class M>
struct TpHsmmT {
  TpGmmT<M> gmm;
  MatX transitions;                // [K][K]
  std::vector<DurationModel> durations;
  VecX initial;
  std::vector<int> final_states;
  VecX final_weight;               // empirical probability that a visit to k ends the demo

  int num_states() const { return gmm.num_components(); }

  bool is_final(int k) const {
    for (int f : final_states) {
      if (f == k) return true;
    }
    return false;
  }

  void validate() const {
    gmm.validate();
    const int k = num_states();
    require(transitions.rows() == k && transitions.cols() == k, "transition matrix shape");
    require(initial.size() == k, "initial distribution length");
    require(std::abs(initial.sum() - 1.0) < 1e-9, "initial distribution must sum to 1");
    require(static_cast<int>(durations.size()) == k, "duration model count");
    require(!final_states.empty(), "model needs at least one final state");
    for (int i = 0; i < k; ++i) {
      require(std::abs(transitions(i, i)) < 1e-12, "self-transitions are not allowed");
      const double row = transitions.row(i).sum();
      if (std::abs(row) < 1e-12) {
        require(is_final(i), "non-final state " + std::to_string(i) + " has a zero transition row");
      } else {
        require(std::abs(row - 1.0) < 1e-9, "transition row " + std::to_string(i) + " must sum to 1");
      }
      require(durations[i].std > 0 && durations[i].mean >= 1.0, "invalid duration model");
    }
  }
};

using TpHsmm = TpHsmmT<PoseManifold>;

// Most-likely discrete plan plus the per-step Gaussian reference it implies.
template <class M>
struct StateSequenceT {
  std::vector<int> states;
  std::vector<Gaussian<M>> references;
};

using StateSequence = StateSequenceT<PoseManifold>;

// Learn transition graph, duration models, initial distribution and final
// states from the per-sample component assignments of a fitted mixture.
template <class M>
TpHsmmT<M> fit_hsmm(const TpGmmT<M>& gmm, const TpData<M>& data, const MatX& responsibilities) {
  const int k = gmm.num_components();
  const int n = data.num_samples();
  require(responsibilities.rows() == n && responsibilities.cols() == k,
          "responsibility matrix shape mismatch");

  // Hard assignment per sample, then runs per demo.
  const int demos = data.num_demos();
  std::vector<std::vector<int>> runs_state(demos), runs_len(demos);
  for (int m = 0; m < demos; ++m) {
    int prev = -1;
    for (int i = 0; i < n; ++i) {
      if (data.demo_id[i] != m) continue;
      int best = 0;
      responsibilities.row(i).maxCoeff(&best);
      if (best == prev) {
        runs_len[m].back()++;
      } else {
        runs_state[m].push_back(best);
        runs_len[m].push_back(1);
        prev = best;
      }
    }
  }

  MatX counts = MatX::Zero(k, k);
  std::vector<std::vector<double>> dwell(k);
  VecX init_counts = VecX::Zero(k);
  VecX visits = VecX::Zero(k), terminal = VecX::Zero(k);
  std::set<int> finals;
  for (int m = 0; m < demos; ++m) {
    const auto& rs = runs_state[m];
    if (rs.empty()) continue;
    init_counts[rs.front()] += 1;
    finals.insert(rs.back());
    for (size_t r = 0; r < rs.size(); ++r) {
      dwell[rs[r]].push_back(static_cast<double>(runs_len[m][r]));
      visits[rs[r]] += 1;
      if (r + 1 < rs.size()) {
        counts(rs[r], rs[r + 1]) += 1;
      } else {
        terminal[rs[r]] += 1;
      }
    }
  }

  TpHsmmT<M> model;
  model.gmm = gmm;
  model.transitions = MatX::Zero(k, k);
  model.initial = init_counts / init_counts.sum();
  model.durations.resize(k);
  model.final_weight = VecX::Zero(k);
  for (int i = 0; i < k; ++i) {
    if (dwell[i].empty()) {
      throw NumericalError("HSMM fit: component " + std::to_string(i) +
                           " is never visited (zero transition row)");
    }
    double mean = 0;
    for (double d : dwell[i]) mean += d;
    mean /= dwell[i].size();
    double var = 0;
    for (double d : dwell[i]) var += (d - mean) * (d - mean);
    var /= dwell[i].size();
    model.durations[i] = DurationModel{std::max(mean, 1.0), std::max(std::sqrt(var), 0.5)};
    const double row = counts.row(i).sum();
    if (row > 0) model.transitions.row(i) = counts.row(i) / row;
    model.final_weight[i] = terminal[i] / visits[i];
  }
  model.final_states.assign(finals.begin(), finals.end());
  model.validate();
  return model;
}

inline double logsumexp(const std::vector<double>& terms) {
  if (terms.empty()) return kLogZero;
  double mx = terms[0];
  for (double v : terms) mx = std::max(mx, v);
  if (mx == kLogZero) return kLogZero;
  double s = 0;
  for (double v : terms) s += std::exp(v - mx);
  return mx + std::log(s);
}

// log of the Gaussian survival function P(X >= z) for a standard normal,
// stable far into the tail.
inline double log_normal_sf(double z) {
  if (z < 30.0) {
    const double v = 0.5 * std::erfc(z / M_SQRT2);
    if (v > 0) return std::log(v);
  }
  return -0.5 * z * z - std::log(z * std::sqrt(2.0 * M_PI));
}

// Exact log-space semi-Markov forward recursion; rows unnormalized.
//
// Internally `ended(t, k)` accumulates every segment path whose last segment
// is state k finishing exactly at t: the initial segment term
// pi_k p_k(t) o(1..t) plus transitions from segments ending at t - tau. The
// returned occupancy value additionally lets the last segment run on past t,
// weighted by the duration survival probability, so that absorbing states
// keep probability mass for arbitrary horizons.
struct ForwardModel {
  VecX log_init;
  MatX log_trans;
  std::vector<VecX> log_dur;       // truncated, renormalized pmf over 1..tau_max
  std::vector<DurationModel> dur;  // for the survival tail
};

inline MatX forward_log(const ForwardModel& fm,
                        const std::function<double(int, int)>& log_emission, int horizon) {
  const int k = static_cast<int>(fm.log_init.size());
  MatX ended = MatX::Constant(horizon, k, kLogZero);
  // cum_em(t, j) = sum of log emissions of state j over steps 0..t-1.
  MatX cum_em = MatX::Zero(horizon + 1, k);
  for (int t = 0; t < horizon; ++t) {
    for (int j = 0; j < k; ++j) cum_em(t + 1, j) = cum_em(t, j) + log_emission(t, j);
  }
  // arrive(a, j): mass entering state j at step a.
  MatX arrive = MatX::Constant(horizon, k, kLogZero);
  arrive.row(0) = fm.log_init;
  std::vector<double> terms;
  for (int t = 0; t < horizon; ++t) {
    for (int j = 0; j < k; ++j) {
      terms.clear();
      const int tmax = static_cast<int>(fm.log_dur[j].size());
      for (int tau = 1; tau <= std::min(t + 1, tmax); ++tau) {
        const int a = t - tau + 1;  // segment covers a..t
        if (arrive(a, j) == kLogZero) continue;
        terms.push_back(arrive(a, j) + fm.log_dur[j][tau - 1] + cum_em(t + 1, j) - cum_em(a, j));
      }
      ended(t, j) = logsumexp(terms);
    }
    if (t + 1 < horizon) {
      for (int j = 0; j < k; ++j) {
        terms.clear();
        for (int h = 0; h < k; ++h) {
          if (h == j || fm.log_trans(h, j) == kLogZero || ended(t, h) == kLogZero) continue;
          terms.push_back(ended(t, h) + fm.log_trans(h, j));
        }
        arrive(t + 1, j) = logsumexp(terms);
      }
    }
  }
  MatX occupancy = MatX::Constant(horizon, k, kLogZero);
  for (int t = 0; t < horizon; ++t) {
    for (int j = 0; j < k; ++j) {
      terms.clear();
      for (int a = 0; a <= t; ++a) {
        if (arrive(a, j) == kLogZero) continue;
        const double elapsed = static_cast<double>(t - a + 1);
        const double sf =
            log_normal_sf((elapsed - 0.5 - fm.dur[j].mean) / fm.dur[j].std);
        terms.push_back(arrive(a, j) + sf + cum_em(t + 1, j) - cum_em(a, j));
      }
      occupancy(t, j) = logsumexp(terms);
    }
  }
  return occupancy;
}

inline MatX log_of(const MatX& m) {
  MatX out(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) out(i, j) = m(i, j) > 0 ? std::log(m(i, j)) : kLogZero;
  }
  return out;
}

inline VecX log_of(const VecX& v) {
  VecX out(v.size());
  for (int i = 0; i < v.size(); ++i) out[i] = v[i] > 0 ? std::log(v[i]) : kLogZero;
  return out;
}

// Row-normalized forward variable. Emissions use the global Gaussians for the
// observed prefix; beyond it only transition and duration information enter.
template <class M>
MatX forward_variable(const TpHsmmT<M>& model,
                      const std::vector<typename FrameTraits<M>::Frame>& frames,
                      const std::vector<typename M::Point>& observed_prefix, int horizon) {
  require(horizon >= 1, "horizon must be positive");
  require(static_cast<int>(observed_prefix.size()) <= horizon,
          "horizon shorter than observed prefix");
  const int k = model.num_states();
  std::vector<GaussianEval<M>> evals;
  if (!observed_prefix.empty()) {
    for (int c = 0; c < k; ++c) evals.emplace_back(model.gmm.global_component(c, frames));
  }
  ForwardModel fm;
  fm.log_init = log_of(model.initial);
  fm.log_trans = log_of(model.transitions);
  for (const auto& d : model.durations) fm.log_dur.push_back(d.log_pmf());
  fm.dur = model.durations;
  // Evaluations cached because forward_log asks per (t, state).
  MatX em = MatX::Zero(horizon, k);
  for (size_t t = 0; t < observed_prefix.size(); ++t) {
    for (int c = 0; c < k; ++c) em(static_cast<int>(t), c) = evals[c].log_pdf(observed_prefix[t]);
  }
  MatX alpha_log = forward_log(fm, [&](int t, int c) { return em(t, c); }, horizon);
  MatX alpha(horizon, k);
  for (int t = 0; t < horizon; ++t) {
    const double mx = alpha_log.row(t).maxCoeff();
    if (mx == kLogZero) {
      throw NumericalError("forward variable underflow: no admissible path at step " +
                           std::to_string(t));
    }
    VecX row = (alpha_log.row(t).array() - mx).exp();
    alpha.row(t) = row / row.sum();
  }
  return alpha;
}

// Per-step argmax of the forward variable, ties broken toward the lowest
// index, with the implied Gaussian reference per step.
template <class M>
StateSequenceT<M> most_likely_sequence(const TpHsmmT<M>& model,
                                       const std::vector<typename FrameTraits<M>::Frame>& frames,
                                       const typename M::Point& start, int horizon) {
  const MatX alpha = forward_variable<M>(model, frames, {start}, horizon);
  StateSequenceT<M> seq;
  seq.states.resize(horizon);
  std::vector<Gaussian<M>> globals;
  for (int c = 0; c < model.num_states(); ++c) {
    globals.push_back(model.gmm.global_component(c, frames));
  }
  for (int t = 0; t < horizon; ++t) {
    int best = 0;
    for (int c = 1; c < model.num_states(); ++c) {
      if (alpha(t, c) > alpha(t, best)) best = c;
    }
    seq.states[t] = best;
    seq.references.push_back(globals[best]);
  }
  return seq;
}

}  // namespace skf
