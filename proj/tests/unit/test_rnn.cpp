#include <cmath>
#include <random>
#include <sstream>

#include "cpn/rnn.hpp"
#include "doctest.h"

using namespace cpn;
using namespace cpn::rnn;

namespace {

// Positive root of the quadratic obtained by eliminating q1 from the two
// fixed-point equations q0 = (a0 + q1 p10)/(r0 + q1 m10) and
// q1 = (a1 + q0 p01)/(r1 + q0 m01).
std::pair<double, double> two_neuron_oracle(double p01, double p10, double m01, double m10,
                                            double a0, double a1, double r0, double r1) {
  const double A = r0 * m01 + p01 * m10;
  const double B = r0 * r1 - a0 * m01 - p01 * p10 + a1 * m10;
  const double C = -a0 * r1 - a1 * p10;
  const double q0 = A == 0.0 ? -C / B : (-B + std::sqrt(B * B - 4 * A * C)) / (2 * A);
  const double q1 = (a1 + q0 * p01) / (r1 + q0 * m01);
  return {q0, q1};
}

}  // namespace

TEST_CASE("symmetric start") {
  auto s = RnnState::symmetric(3);
  CHECK(s.w_plus(0, 0) == 0.0);
  CHECK(s.w_minus(1, 1) == 0.0);
  CHECK(s.w_plus(0, 1) == 0.5);
  CHECK(s.lambda_ext(2) == 1.0);
  CHECK(s.rate(0) == doctest::Approx(2.0));
  CHECK(s.threshold() == 0.0);
  const auto q = solve_steady_state(s);
  CHECK(q[0] == doctest::Approx(q[1]).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(q[2]).epsilon(1e-12));
}

TEST_CASE("uncoupled neurons reduce to lambda over rate") {
  auto s = RnnState::from_weights(2, {0, 0, 0, 0}, {0, 0, 0, 0}, {0.3, 5.0}, {1.0, 2.0});
  const auto q = solve_steady_state(s);
  CHECK(q[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(1.0 - 1e-12).epsilon(1e-15));
}

TEST_CASE("two-neuron fixed point matches the closed form") {
  // w+[0][1] = 1, w-[1][0] = 1, the remaining off-diagonal weights 0.5.
  auto s = RnnState::from_weights(2, {0, 1.0, 0.5, 0}, {0, 0.5, 1.0, 0}, {1, 1});
  const auto q = solve_steady_state(s);
  const auto [o0, o1] = two_neuron_oracle(1.0, 0.5, 0.5, 1.0, 1, 1, s.rate(0), s.rate(1));
  CHECK(std::abs(q[0] - o0) < 1e-8);
  CHECK(std::abs(q[1] - o1) < 1e-8);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> w(0.0, 2.0), lam(0.05, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double p01 = w(rng), p10 = w(rng), m01 = w(rng), m10 = w(rng);
    const double a0 = lam(rng), a1 = lam(rng);
    // Rates large enough that both potentials stay below 1.
    const double r0 = p01 + m01 + a0 + p10 + 0.1, r1 = p10 + m10 + a1 + p01 + 0.1;
    auto st = RnnState::from_weights(2, {0, p01, p10, 0}, {0, m01, m10, 0}, {a0, a1}, {r0, r1});
    const auto qq = solve_steady_state(st);
    const auto [e0, e1] = two_neuron_oracle(p01, p10, m01, m10, a0, a1, r0, r1);
    CHECK(std::abs(qq[0] - e0) < 1e-8);
    CHECK(std::abs(qq[1] - e1) < 1e-8);
  }
}

TEST_CASE("solve is idempotent and leaves a small residual") {
  auto s = RnnState::from_weights(3, {0, 0.2, 0.7, 0.1, 0, 0.3, 0.6, 0.4, 0},
                                  {0, 0.5, 0.1, 0.9, 0, 0.2, 0.3, 0.3, 0}, {0.4, 0.2, 0.3});
  const auto once = solve_steady_state(s);
  const std::vector<double> first(once.begin(), once.end());
  const auto second = solve_steady_state(s);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(first[i] - second[i]) < 1e-10);
  CHECK(fixed_point_residual(s) < 1e-8);
}

TEST_CASE("iteration cap raises NonConvergence") {
  auto s = RnnState::symmetric(4);
  CHECK_THROWS_AS(solve_steady_state(s, SolveOptions{1e-8, 2, 1.0 - 1e-12}), NonConvergence);
}

TEST_CASE("bad inputs are rejected") {
  CHECK_THROWS_AS(RnnState::from_weights(2, {0, 1}, {0, 0, 0, 0}, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(RnnState::from_weights(2, {0, -1, 0, 0}, {0, 0, 0, 0}, {1, 1}, {1, 1}),
                  std::invalid_argument);
  auto one = RnnState::from_weights(1, {0}, {0}, {1}, {1});
  CHECK_THROWS_AS(rl_update(one, 0, 1.0), DegenerateFanout);
  auto two = RnnState::symmetric(2);
  solve_steady_state(two);
  CHECK_THROWS_AS(rl_update(two, 2, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(rl_update(two, 0, 0.0), std::invalid_argument);
}

TEST_CASE("select_output picks the most excited neuron") {
  auto s = RnnState::symmetric(3);
  std::mt19937_64 rng(1);
  auto q = s.q_mut();
  q[0] = 0.2, q[1] = 0.9, q[2] = 0.4;
  CHECK(select_output(s, rng, 0.0) == 1);
  q[0] = 0.5, q[1] = 0.5, q[2] = 0.1;
  CHECK(select_output(s, rng, 0.0) == 0);
  const std::uint8_t mask[] = {0, 1, 1};
  q[0] = 0.9, q[1] = 0.1, q[2] = 0.3;
  CHECK(select_output(s, rng, 0.0, mask) == 2);
}

TEST_CASE("full exploration is uniform over the other neurons") {
  auto s = RnnState::symmetric(3);
  auto q = s.q_mut();
  q[0] = 0.9, q[1] = 0.3, q[2] = 0.3;
  std::mt19937_64 rng(2024);
  int counts[3] = {0, 0, 0};
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[select_output(s, rng, 1.0)];
  CHECK(counts[0] == 0);
  // Chi-square with one degree of freedom; 10.83 is the 0.1% critical value.
  const double e = draws / 2.0;
  const double chi2 = (counts[1] - e) * (counts[1] - e) / e + (counts[2] - e) * (counts[2] - e) / e;
  CHECK(chi2 < 10.83);
}

TEST_CASE("reward update, hand-computed for three neurons") {
  auto s = RnnState::symmetric(3);
  solve_steady_state(s);
  rl_update(s, 0, 2.0);
  // Rows 1 and 2 gain 2 on w+[i][0] and 2 on w-[i][other], then scale by 2/6.
  CHECK(s.w_plus(1, 0) == doctest::Approx(5.0 / 6.0));
  CHECK(s.w_plus(1, 2) == doctest::Approx(1.0 / 6.0));
  CHECK(s.w_minus(1, 0) == doctest::Approx(1.0 / 6.0));
  CHECK(s.w_minus(1, 2) == doctest::Approx(5.0 / 6.0));
  CHECK(s.w_plus(0, 1) == doctest::Approx(0.5));
  CHECK(s.threshold() == doctest::Approx(0.4));
  CHECK(s.decisions() == 1);
  CHECK(most_excited(s) == 0);
}

TEST_CASE("punishment, hand-computed for three neurons") {
  auto s = RnnState::symmetric(3);
  solve_steady_state(s);
  rl_update(s, 0, 10.0);  // threshold becomes 2
  rl_update(s, 1, 1.0);   // below threshold: punish neuron 1
  CHECK(s.threshold() == doctest::Approx(0.8 * 2.0 + 0.2 * 1.0));
  // Row 0 before: all 0.5; gains 1 on w+[0][2] and 1 on w-[0][1]; sum 4 -> scale 1/2.
  CHECK(s.w_plus(0, 2) == doctest::Approx(0.75));
  CHECK(s.w_minus(0, 1) == doctest::Approx(0.75));
  CHECK(s.w_plus(0, 1) == doctest::Approx(0.25));
  CHECK(s.w_minus(0, 2) == doctest::Approx(0.25));
}

TEST_CASE("reward equal to the threshold takes the reward branch") {
  auto s = RnnState::symmetric(2);
  solve_steady_state(s);
  rl_update(s, 0, 5.0);                   // T = 1
  const double before = s.w_plus(1, 0);
  rl_update(s, 0, s.threshold());         // reward == T
  CHECK(s.w_plus(1, 0) > before);
}

TEST_CASE("two-neuron reward makes the rewarded neuron the most excited") {
  auto s = RnnState::symmetric(2);
  solve_steady_state(s);
  rl_update(s, 0, 10.0);
  CHECK(most_excited(s) == 0);
  // Row 1 gains 10 on w+[1][0] then scales to rate 1: w+ = 10.5/11, w- = 0.5/11.
  CHECK(s.w_plus(1, 0) == doctest::Approx(10.5 / 11.0));
  CHECK(s.w_minus(1, 0) == doctest::Approx(0.5 / 11.0));
  const auto [o0, o1] =
      two_neuron_oracle(s.w_plus(0, 1), s.w_plus(1, 0), s.w_minus(0, 1), s.w_minus(1, 0), 1, 1,
                        s.rate(0), s.rate(1));
  (void)o1;
  // The unclamped root lies above 1, so neuron 0 sits at the ceiling and
  // neuron 1 follows from its own equation at that value.
  const double ceiling = 1.0 - 1e-12;
  REQUIRE(o0 > 1.0);
  CHECK(s.q()[0] == ceiling);
  const double q1 = std::min(ceiling, (1.0 + ceiling * s.w_plus(0, 1)) / (s.rate(1) + ceiling * s.w_minus(0, 1)));
  CHECK(std::abs(s.q()[1] - q1) < 1e-8);
}

TEST_CASE("a punished neuron drops below the ceiling in a two-neuron network") {
  auto s = RnnState::symmetric(2);
  solve_steady_state(s);
  // Symmetric two-neuron start saturates: q = (1 + q/2) / (1 + q/2).
  CHECK(s.q()[0] == 1.0 - 1e-12);
  CHECK(s.q()[1] == 1.0 - 1e-12);
  rl_update(s, 0, 10.0);
  rl_update(s, 1, 1.0);  // below the threshold of 2
  CHECK(s.q()[1] < 1.0 - 1e-6);
  const auto [o0, o1] =
      two_neuron_oracle(s.w_plus(0, 1), s.w_plus(1, 0), s.w_minus(0, 1), s.w_minus(1, 0), 1, 1,
                        s.rate(0), s.rate(1));
  if (o0 < 1.0 && o1 < 1.0) {
    CHECK(std::abs(s.q()[0] - o0) < 1e-8);
    CHECK(std::abs(s.q()[1] - o1) < 1e-8);
  }
  CHECK(most_excited(s) == 0);
}

TEST_CASE("rates, signs and threshold hold across random updates") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> reward(0.5, 1000.0);
  for (std::size_t n = 2; n <= 6; ++n) {
    auto s = RnnState::symmetric(n);
    solve_steady_state(s);
    std::vector<double> rates(n);
    for (std::size_t i = 0; i < n; ++i) rates[i] = s.rate(i);
    double t = 0.0;
    for (int k = 0; k < 200; ++k) {
      const double r = reward(rng);
      rl_update(s, static_cast<std::size_t>(rng() % n), r);
      t = 0.8 * t + 0.2 * r;
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::abs(s.row_sum(i) - rates[i]) < 1e-9);
        CHECK(s.q()[i] >= 0.0);
        CHECK(s.q()[i] < 1.0);
        for (std::size_t j = 0; j < n; ++j) {
          CHECK(s.w_plus(i, j) >= 0.0);
          CHECK(s.w_minus(i, j) >= 0.0);
        }
      }
      CHECK(s.threshold() == doctest::Approx(t).epsilon(1e-12));
    }
  }
}

TEST_CASE("repeatedly rewarding one neuron makes it the choice") {
  // From three neurons up, rewarding k also inhibits the others through the
  // spread term; two neurons only separate under punishment (see above).
  for (std::size_t n = 3; n <= 6; ++n)
    for (std::size_t k = 0; k < n; ++k) {
      auto s = RnnState::symmetric(n);
      solve_steady_state(s);
      for (int i = 0; i < 100; ++i) rl_update(s, k, 10.0);
      std::mt19937_64 rng(3);
      CHECK(select_output(s, rng, 0.0) == k);
    }
}

TEST_CASE("debug dump columns") {
  auto s = RnnState::symmetric(2);
  solve_steady_state(s);
  std::ostringstream os;
  write_debug_header(os, 2);
  write_debug_row(os, "CPN002", QosGoal::Jitter, "CPN026", s);
  const auto text = os.str();
  CHECK(text.rfind("node,goal,destination,decisions,threshold,q0,q1,wp0_0,wp0_1,wp1_0,wp1_1,"
                   "wm0_0,wm0_1,wm1_0,wm1_1\n",
                   0) == 0);
  CHECK(text.find("CPN002,jitter,CPN026,0,") != std::string::npos);
}
