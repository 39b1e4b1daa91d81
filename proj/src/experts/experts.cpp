#include "orl/experts/experts.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <iostream>
#include <random>

#include "orl/env/glucose.hpp"
#include "orl/errors.hpp"

namespace orl::experts {

using env::Cell;
using env::Dir;
using env::GridAction;
using env::GridState;

std::optional<GridAction> shortest_path_action(const GridState& s) {
  // BFS over (row, col, dir); lava is never entered, walls block forward moves.
  const auto index = [&](int r, int c, Dir d) {
    return static_cast<std::size_t>((r * s.cols + c) * 4 + static_cast<int>(d));
  };
  std::vector<int> first(static_cast<std::size_t>(s.rows * s.cols * 4), -1);
  struct Node {
    int r, c;
    Dir d;
  };
  std::deque<Node> frontier;
  const std::size_t start = index(s.row, s.col, s.dir);
  first[start] = static_cast<int>(GridAction::NoOp);
  frontier.push_back({s.row, s.col, s.dir});
  constexpr std::array<GridAction, 3> moves{GridAction::Forward, GridAction::RotateLeft,
                                            GridAction::RotateRight};
  while (!frontier.empty()) {
    const Node n = frontier.front();
    frontier.pop_front();
    const int origin = first[index(n.r, n.c, n.d)];
    for (const GridAction a : moves) {
      Node next = n;
      if (a == GridAction::Forward) {
        const auto [dr, dc] = env::step_offset(n.d);
        const Cell cell = s.at(n.r + dr, n.c + dc);
        if (cell == Cell::Wall || cell == Cell::Lava) continue;
        next.r += dr;
        next.c += dc;
        const auto chosen = index(n.r, n.c, n.d) == start ? a : static_cast<GridAction>(origin);
        if (cell == Cell::Goal) return chosen;
      } else {
        next.d = a == GridAction::RotateLeft ? env::rotate_left(n.d) : env::rotate_right(n.d);
      }
      const auto k = index(next.r, next.c, next.d);
      if (first[k] != -1) continue;
      first[k] = index(n.r, n.c, n.d) == start ? static_cast<int>(a) : origin;
      frontier.push_back(next);
    }
  }
  return std::nullopt;
}

GridBfsExpert::GridBfsExpert(double epsilon, std::uint64_t seed) : epsilon_(epsilon), rng_(seed) {
  if (epsilon < 0.0 || epsilon > 1.0) throw ConfigError("GridBfsExpert: epsilon outside [0, 1]");
}

std::array<double, env::kGridActionCount> GridBfsExpert::distribution(const GridState& state) {
  std::array<double, env::kGridActionCount> p{};
  p.fill(epsilon_ / env::kGridActionCount);
  const auto planned = shortest_path_action(state);
  stuck_ = !planned.has_value();
  p[static_cast<std::size_t>(planned.value_or(GridAction::NoOp))] += 1.0 - epsilon_;
  return p;
}

double GridBfsExpert::act(const env::Environment& e, const env::Observation&, int) {
  const auto* grid = dynamic_cast<const env::GridWorld*>(&e);
  if (!grid) throw ConfigError("GridBfsExpert needs a GridWorld");
  const auto planned = shortest_path_action(grid->state());
  stuck_ = !planned.has_value();
  if (uniform01(rng_) < epsilon_) return static_cast<double>(uniform_index(rng_, env::kGridActionCount));
  return static_cast<double>(planned.value_or(GridAction::NoOp));
}

GlucosePdExpert::GlucosePdExpert(double epsilon, PdGains gains, std::uint64_t seed)
    : epsilon_(epsilon), gains_(gains), rng_(seed) {
  if (epsilon < 0.0 || epsilon > 1.0) throw ConfigError("GlucosePdExpert: epsilon outside [0, 1]");
}

double GlucosePdExpert::mean_action(double glucose, double previous_glucose, double minutes) const {
  const double slope = minutes > 0.0 ? (glucose - previous_glucose) / minutes : 0.0;
  const double u = gains_.kp * (glucose - gains_.target) + gains_.kd * slope + gains_.u_basal;
  return std::clamp(u, 0.0, env::kInsulinMax);
}

double GlucosePdExpert::act(const env::Environment&, const env::Observation& obs, int steps_since_last) {
  const double glucose = obs.at(0) * env::kGlucoseScale;
  const double previous = previous_glucose_.value_or(glucose);
  const double minutes = static_cast<double>(steps_since_last * env::kBaseStepMinutes);
  previous_glucose_ = glucose;
  double u = mean_action(glucose, previous, minutes);
  if (epsilon_ > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_std());
    u = std::clamp(u + noise(rng_), 0.0, env::kInsulinMax);
  }
  return u;
}

CalibrationResult calibrate_expert(const std::function<double(double)>& score_at, double random_score,
                                   double band_lo, double band_hi, int iterations) {
  if (band_lo > band_hi) throw ConfigError("calibrate_expert: empty band");
  CalibrationResult out;
  out.random_score = random_score;
  out.best_score = score_at(0.0);
  const double span = out.best_score - random_score;
  if (!(std::abs(span) > 0.0))
    throw ConfigError("calibrate_expert: noise-free expert scores the same as random");
  auto evaluate = [&](double eps) {
    const double s = eps == 0.0 ? out.best_score : score_at(eps);
    out.evaluated.push_back({eps, s, (s - random_score) / span});
    return out.evaluated.back().fraction;
  };
  const double target = 0.5 * (band_lo + band_hi);
  evaluate(0.0);
  evaluate(1.0);
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (evaluate(mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  const auto best = std::min_element(out.evaluated.begin(), out.evaluated.end(),
                                     [&](const CalibrationPoint& a, const CalibrationPoint& b) {
                                       return std::abs(a.fraction - target) < std::abs(b.fraction - target);
                                     });
  out.epsilon = best->epsilon;
  out.fraction = best->fraction;
  out.in_band = best->fraction >= band_lo && best->fraction <= band_hi;
  if (!out.in_band)
    std::cerr << "warning: expert calibration band [" << band_lo << ", " << band_hi
              << "] not reached; using epsilon " << out.epsilon << " (fraction " << out.fraction << ")\n";
  return out;
}

void write_calibration_csv(std::ostream& os, const CalibrationResult& r) {
  os << "epsilon,score,fraction,chosen\n" << std::setprecision(10);
  for (const auto& p : r.evaluated)
    os << p.epsilon << ',' << p.score << ',' << p.fraction << ',' << (p.epsilon == r.epsilon ? 1 : 0) << '\n';
}

}  // namespace orl::experts
