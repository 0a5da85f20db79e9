#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "cpn/types.hpp"

namespace cpn::rnn {

class NonConvergence : public Error {
 public:
  using Error::Error;
};

class DegenerateFanout : public Error {
 public:
  using Error::Error;
};

struct SolveOptions {
  double tolerance = 1e-8;
  std::size_t max_iterations = 10000;
  double ceiling = 1.0 - 1e-12;
};

/// Random neural network for one (node, QoS class, destination): one neuron
/// per eligible outgoing link.
///
/// `rate(i)` is the firing rate of neuron i. It starts as the row sum of both
/// weight matrices and is held fixed afterwards; every reinforcement update
/// renormalises its row back to it.
class RnnState {
 public:
  /// Uninformative start: w+ = w- = 0.5 off the diagonal, external rate 1,
  /// threshold 0.
  static RnnState symmetric(std::size_t n);

  /// Explicit weights (row-major n x n). Firing rates default to the row sums;
  /// pass `rates` to impose them directly (e.g. a floor for zero-weight rows).
  static RnnState from_weights(std::size_t n, std::vector<double> w_plus,
                               std::vector<double> w_minus, std::vector<double> lambda_ext,
                               std::vector<double> rates = {});

  std::size_t size() const { return n_; }

  double w_plus(std::size_t i, std::size_t j) const { return w_plus_[i * n_ + j]; }
  double w_minus(std::size_t i, std::size_t j) const { return w_minus_[i * n_ + j]; }
  double& w_plus(std::size_t i, std::size_t j) { return w_plus_[i * n_ + j]; }
  double& w_minus(std::size_t i, std::size_t j) { return w_minus_[i * n_ + j]; }

  double lambda_ext(std::size_t i) const { return lambda_ext_[i]; }
  double rate(std::size_t i) const { return rate_[i]; }
  /// Current row sum of both weight matrices.
  double row_sum(std::size_t i) const;

  std::span<const double> q() const { return q_; }
  std::span<double> q_mut() { return q_; }
  bool solved() const { return solved_; }

  double threshold() const { return threshold_; }
  std::uint64_t decisions() const { return decisions_; }

 private:
  RnnState() = default;

  std::size_t n_ = 0;
  std::vector<double> w_plus_;
  std::vector<double> w_minus_;
  std::vector<double> lambda_ext_;
  std::vector<double> rate_;
  std::vector<double> q_;
  bool solved_ = false;
  double threshold_ = 0.0;
  std::uint64_t decisions_ = 0;

  friend std::span<const double> solve_steady_state(RnnState&, const SolveOptions&);
  friend void rl_update(RnnState&, std::size_t, double, double);
};

/// Iterates q_i = clamp((lambda_i + sum_j q_j w+[j][i]) / (r_i + sum_j q_j w-[j][i]))
/// from q = 0 until the largest per-component change is below the tolerance.
/// Stores and returns q. Throws NonConvergence.
std::span<const double> solve_steady_state(RnnState& state, const SolveOptions& options = {});

/// Largest |q_i - f_i(q)| for the stored q.
double fixed_point_residual(const RnnState& state, const SolveOptions& options = {});

/// Most excited neuron, ties to the lowest index. With probability
/// `explore_prob` a uniformly random other neuron is returned instead.
/// A non-empty `eligible` mask restricts both choices to marked neurons.
std::size_t select_output(const RnnState& state, std::mt19937_64& rng, double explore_prob,
                          std::span<const std::uint8_t> eligible = {});

/// Argmax of q over the eligible mask (all neurons when empty).
std::size_t most_excited(const RnnState& state, std::span<const std::uint8_t> eligible = {});

/// Reward/punish update against the smoothed threshold, row renormalisation to
/// the fixed firing rates, threshold smoothing, then re-solve.
/// Throws DegenerateFanout for n < 2 and std::invalid_argument for a bad
/// neuron index or non-positive reward.
void rl_update(RnnState& state, std::size_t chosen, double reward,
               double threshold_factor = 0.8);

/// Debug CSV: `node,goal,destination,decisions,threshold,q...,w_plus...,w_minus...`.
void write_debug_header(std::ostream& out, std::size_t n);
void write_debug_row(std::ostream& out, std::string_view node, QosGoal goal,
                     std::string_view destination, const RnnState& state);

}  // namespace cpn::rnn
