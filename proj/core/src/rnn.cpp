#include "cpn/rnn.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace cpn::rnn {

RnnState RnnState::symmetric(std::size_t n) {
  std::vector<double> wp(n * n, 0.5), wm(n * n, 0.5);
  for (std::size_t i = 0; i < n; ++i) wp[i * n + i] = wm[i * n + i] = 0.0;
  return from_weights(n, std::move(wp), std::move(wm), std::vector<double>(n, 1.0));
}

RnnState RnnState::from_weights(std::size_t n, std::vector<double> w_plus,
                                std::vector<double> w_minus, std::vector<double> lambda_ext,
                                std::vector<double> rates) {
  if (w_plus.size() != n * n || w_minus.size() != n * n || lambda_ext.size() != n)
    throw std::invalid_argument("RnnState: dimension mismatch");
  RnnState s;
  s.n_ = n;
  s.w_plus_ = std::move(w_plus);
  s.w_minus_ = std::move(w_minus);
  s.lambda_ext_ = std::move(lambda_ext);
  for (std::size_t i = 0; i < n; ++i) {
    s.w_plus_[i * n + i] = 0.0;
    s.w_minus_[i * n + i] = 0.0;
    if (s.lambda_ext_[i] <= 0.0) throw std::invalid_argument("RnnState: external rate must be > 0");
  }
  for (std::size_t k = 0; k < n * n; ++k)
    if (s.w_plus_[k] < 0.0 || s.w_minus_[k] < 0.0)
      throw std::invalid_argument("RnnState: negative weight");
  if (rates.empty()) {
    rates.resize(n);
    for (std::size_t i = 0; i < n; ++i) rates[i] = s.row_sum(i);
  }
  if (rates.size() != n) throw std::invalid_argument("RnnState: rates dimension mismatch");
  for (double r : rates)
    if (!(r > 0.0)) throw std::invalid_argument("RnnState: firing rate must be > 0");
  s.rate_ = std::move(rates);
  s.q_.assign(n, 0.0);
  return s;
}

double RnnState::row_sum(std::size_t i) const {
  double sum = 0.0;
  for (std::size_t j = 0; j < n_; ++j) sum += w_plus_[i * n_ + j] + w_minus_[i * n_ + j];
  return sum;
}

namespace {

// One Jacobi sweep of the fixed-point map: out = f(q).
void apply_map(const RnnState& s, std::span<const double> q, std::span<double> out,
               double ceiling) {
  const std::size_t n = s.size();
  for (std::size_t i = 0; i < n; ++i) {
    double excite = s.lambda_ext(i);
    double inhibit = s.rate(i);
    for (std::size_t j = 0; j < n; ++j) {
      excite += q[j] * s.w_plus(j, i);
      inhibit += q[j] * s.w_minus(j, i);
    }
    out[i] = std::clamp(excite / inhibit, 0.0, ceiling);
  }
}

}  // namespace

std::span<const double> solve_steady_state(RnnState& state, const SolveOptions& options) {
  const std::size_t n = state.n_;
  std::vector<double> q(n, 0.0), next(n, 0.0);
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    apply_map(state, q, next, options.ceiling);
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(next[i] - q[i]));
    q.swap(next);
    if (change < options.tolerance) {
      state.q_ = std::move(q);
      state.solved_ = true;
      return state.q_;
    }
  }
  std::ostringstream os;
  os << "RNN steady state did not converge within " << options.max_iterations
     << " iterations (n=" << n << ")";
  throw NonConvergence(os.str());
}

double fixed_point_residual(const RnnState& state, const SolveOptions& options) {
  std::vector<double> f(state.size());
  apply_map(state, state.q(), f, options.ceiling);
  double worst = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) worst = std::max(worst, std::abs(f[i] - state.q()[i]));
  return worst;
}

std::size_t most_excited(const RnnState& state, std::span<const std::uint8_t> eligible) {
  const auto q = state.q();
  std::size_t best = q.size();
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!eligible.empty() && !eligible[i]) continue;
    if (best == q.size() || q[i] > q[best]) best = i;
  }
  if (best == q.size()) throw std::invalid_argument("most_excited: no eligible neuron");
  return best;
}

std::size_t select_output(const RnnState& state, std::mt19937_64& rng, double explore_prob,
                          std::span<const std::uint8_t> eligible) {
  const std::size_t best = most_excited(state, eligible);
  if (explore_prob <= 0.0) return best;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (explore_prob < 1.0 && coin(rng) >= explore_prob) return best;

  std::vector<std::size_t> others;
  others.reserve(state.size());
  for (std::size_t i = 0; i < state.size(); ++i)
    if (i != best && (eligible.empty() || eligible[i])) others.push_back(i);
  if (others.empty()) return best;
  std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
  return others[pick(rng)];
}

void rl_update(RnnState& state, std::size_t chosen, double reward, double threshold_factor) {
  const std::size_t n = state.n_;
  if (n < 2) throw DegenerateFanout("rl_update needs at least two neurons");
  if (chosen >= n) throw std::invalid_argument("rl_update: neuron index out of range");
  if (!(reward > 0.0) || !std::isfinite(reward))
    throw std::invalid_argument("rl_update: reward must be finite and > 0");

  const double t_prev = state.threshold_;
  const double spread = n > 2 ? reward / static_cast<double>(n - 2) : 0.0;

  if (reward >= t_prev) {
    for (std::size_t i = 0; i < n; ++i) {
      if (i == chosen) continue;
      state.w_plus(i, chosen) += reward;
      if (n > 2)
        for (std::size_t j = 0; j < n; ++j)
          if (j != i && j != chosen) state.w_minus(i, j) += spread;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (i == chosen) continue;
      if (n > 2)
        for (std::size_t j = 0; j < n; ++j)
          if (j != i && j != chosen) state.w_plus(i, j) += spread;
      state.w_minus(i, chosen) += reward;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const double updated = state.row_sum(i);
    if (updated <= 0.0) continue;
    const double scale = state.rate_[i] / updated;
    for (std::size_t j = 0; j < n; ++j) {
      state.w_plus(i, j) *= scale;
      state.w_minus(i, j) *= scale;
    }
  }

  state.threshold_ = threshold_factor * t_prev + (1.0 - threshold_factor) * reward;
  ++state.decisions_;
  solve_steady_state(state);
}

void write_debug_header(std::ostream& out, std::size_t n) {
  out << "node,goal,destination,decisions,threshold";
  for (std::size_t i = 0; i < n; ++i) out << ",q" << i;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out << ",wp" << i << "_" << j;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out << ",wm" << i << "_" << j;
  out << "\n";
}

void write_debug_row(std::ostream& out, std::string_view node, QosGoal goal,
                     std::string_view destination, const RnnState& state) {
  out << node << "," << to_string(goal) << "," << destination << "," << state.decisions() << ","
      << state.threshold();
  for (double v : state.q()) out << "," << v;
  const std::size_t n = state.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out << "," << state.w_plus(i, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out << "," << state.w_minus(i, j);
  out << "\n";
}

}  // namespace cpn::rnn
