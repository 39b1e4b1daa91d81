#include "orl/env/glucose.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "orl/errors.hpp"

namespace orl::env {

namespace {

struct Range {
  double lo;
  double hi;
  double draw(Rng& rng) const { return lo + (hi - lo) * uniform01(rng); }
};

struct CohortRanges {
  Range Vg;
  Range Vi;
  Range p3;
  Range Ib;
};

// Children: smallest volumes and highest insulin sensitivity; adults the reverse.
constexpr std::array<CohortRanges, 3> kCohortRanges{{
    {{140.0, 180.0}, {11.0, 14.0}, {0.9e-5, 1.3e-5}, {10.0, 15.0}},  // adult
    {{100.0, 130.0}, {8.0, 10.5}, {1.1e-5, 1.6e-5}, {9.0, 14.0}},    // adolescent
    {{60.0, 85.0}, {5.0, 7.0}, {1.4e-5, 2.0e-5}, {8.0, 12.0}},       // child
}};
constexpr Range kGb{100.0, 160.0};
constexpr Range kP1{0.006, 0.012};
constexpr Range kP2{0.02, 0.03};
constexpr Range kN{0.09, 0.14};
constexpr Range kKq{0.03, 0.06};
constexpr Range kF{0.8, 0.95};

constexpr std::array<std::pair<int, int>, 3> kMealWindows{{{360, 540}, {690, 840}, {1050, 1230}}};

double meal_scale(Cohort c) {
  switch (c) {
    case Cohort::Adult: return 1.0;
    case Cohort::Adolescent: return 0.8;
    case Cohort::Child: return 0.6;
  }
  return 1.0;
}

struct Derivative {
  double G, X, I, Q1, Q2;
};

Derivative derivative(const PatientParams& p, double G, double X, double I, double Q1, double Q2,
                      double u) {
  return {-p.p1 * (G - p.Gb) - X * G + p.f * p.kq * Q2 / p.Vg,
          -p.p2 * X + p.p3 * (I - p.Ib),
          -p.n * I + 1000.0 * u / p.Vi,
          -p.kq * Q1,
          p.kq * (Q1 - Q2)};
}

void rk4_minute(PatientState& s, const PatientParams& p, double u) {
  constexpr double h = 1.0;
  const auto k1 = derivative(p, s.G, s.X, s.I, s.Q1, s.Q2, u);
  const auto k2 = derivative(p, s.G + 0.5 * h * k1.G, s.X + 0.5 * h * k1.X, s.I + 0.5 * h * k1.I,
                             s.Q1 + 0.5 * h * k1.Q1, s.Q2 + 0.5 * h * k1.Q2, u);
  const auto k3 = derivative(p, s.G + 0.5 * h * k2.G, s.X + 0.5 * h * k2.X, s.I + 0.5 * h * k2.I,
                             s.Q1 + 0.5 * h * k2.Q1, s.Q2 + 0.5 * h * k2.Q2, u);
  const auto k4 = derivative(p, s.G + h * k3.G, s.X + h * k3.X, s.I + h * k3.I, s.Q1 + h * k3.Q1,
                             s.Q2 + h * k3.Q2, u);
  s.G += h / 6.0 * (k1.G + 2.0 * k2.G + 2.0 * k3.G + k4.G);
  s.X += h / 6.0 * (k1.X + 2.0 * k2.X + 2.0 * k3.X + k4.X);
  s.I += h / 6.0 * (k1.I + 2.0 * k2.I + 2.0 * k3.I + k4.I);
  s.Q1 += h / 6.0 * (k1.Q1 + 2.0 * k2.Q1 + 2.0 * k3.Q1 + k4.Q1);
  s.Q2 += h / 6.0 * (k1.Q2 + 2.0 * k2.Q2 + 2.0 * k3.Q2 + k4.Q2);
}

}  // namespace

std::string to_string(Cohort c) {
  switch (c) {
    case Cohort::Adult: return "adult";
    case Cohort::Adolescent: return "adolescent";
    case Cohort::Child: return "child";
  }
  return "?";
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

double magni_risk(double x) {
  if (!(x > 1.0)) throw DomainError("magni_risk: glucose must exceed 1 mg/dL");
  const double inner = 1.509 * (std::pow(std::log(x), 1.084) - 5.381);
  return 10.0 * inner * inner;
}

double glucose_reward(double x) {
  const double shifted = 5.1 - magni_risk(x);
  return std::max(shifted, 10.0 * shifted);
}

double basal_infusion(const PatientParams& p) { return p.n * p.Ib * p.Vi / 1000.0; }

PatientState equilibrium_state(const PatientParams& p) {
  PatientState s;
  s.G = p.Gb;
  s.X = 0.0;
  s.I = p.Ib;
  s.u = basal_infusion(p);
  return s;
}

std::vector<Meal> draw_meals(Cohort cohort, Rng& rng, int days) {
  std::vector<Meal> meals;
  for (int d = 0; d < days; ++d) {
    for (const auto& [lo, hi] : kMealWindows) {
      const int minute = d * 1440 + lo +
                         static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
      const double grams = (30.0 + 60.0 * uniform01(rng)) * meal_scale(cohort);
      meals.push_back({minute, grams});
    }
  }
  return meals;
}

PatientStepResult patient_step(PatientState& s, const PatientParams& p, double u) {
  if (s.done) throw UsageError("patient_step called after the episode ended");
  u = std::clamp(u, 0.0, kInsulinMax);
  s.u = u;
  PatientStepResult out;
  for (int m = 0; m < kBaseStepMinutes; ++m) {
    while (s.next_meal < s.meals.size() && s.meals[s.next_meal].minute <= s.clock) {
      const double grams = s.meals[s.next_meal].grams;
      s.Q1 += 1000.0 * grams;
      out.carbs += grams;
      ++s.next_meal;
    }
    rk4_minute(s, p, u);
    ++s.clock;
  }
  if (!std::isfinite(s.G) || !std::isfinite(s.X) || !std::isfinite(s.I) || !std::isfinite(s.Q1) ||
      !std::isfinite(s.Q2))
    throw SimulationError("patient_step: non-finite state for patient " + std::to_string(p.id) +
                          " at minute " + std::to_string(s.clock));
  if (s.G < kGlucoseLow || s.G > kGlucoseHigh) {
    out.reward = kTerminationPenalty;
    out.out_of_bounds = true;
    out.done = true;
  } else {
    out.reward = glucose_reward(s.G);
    out.done = s.clock >= kEpisodeMinutes;
  }
  s.done = out.done;
  return out;
}

std::vector<PatientParams> make_cohorts(std::uint64_t master_seed) {
  Rng rng = make_rng(master_seed, stream::kRoster);
  std::vector<PatientParams> roster;
  for (int c = 0; c < 3; ++c) {
    const auto& ranges = kCohortRanges[static_cast<std::size_t>(c)];
    std::array<Split, 10> splits{Split::Train, Split::Train, Split::Train, Split::Train,
                                 Split::Train, Split::Train, Split::Validation, Split::Validation,
                                 Split::Test, Split::Test};
    for (std::size_t i = splits.size() - 1; i > 0; --i)
      std::swap(splits[i], splits[uniform_index(rng, i + 1)]);
    for (int i = 0; i < 10; ++i) {
      PatientParams p;
      p.id = c * 10 + i;
      p.cohort = static_cast<Cohort>(c);
      p.split = splits[static_cast<std::size_t>(i)];
      p.Gb = kGb.draw(rng);
      p.Ib = ranges.Ib.draw(rng);
      p.p1 = kP1.draw(rng);
      p.p2 = kP2.draw(rng);
      p.p3 = ranges.p3.draw(rng);
      p.n = kN.draw(rng);
      p.Vg = ranges.Vg.draw(rng);
      p.Vi = ranges.Vi.draw(rng);
      p.kq = kKq.draw(rng);
      p.f = kF.draw(rng);
      roster.push_back(p);
    }
  }
  return roster;
}

std::vector<PatientParams> select_split(const std::vector<PatientParams>& roster, Split split) {
  std::vector<PatientParams> out;
  std::copy_if(roster.begin(), roster.end(), std::back_inserter(out),
               [split](const PatientParams& p) { return p.split == split; });
  return out;
}

void write_roster_csv(std::ostream& os, const std::vector<PatientParams>& roster) {
  os << "id,cohort,split,Gb,Ib,p1,p2,p3,n,Vg,Vi,kq,f\n";
  os << std::setprecision(17);
  for (const auto& p : roster) {
    os << p.id << ',' << to_string(p.cohort) << ',' << to_string(p.split) << ',' << p.Gb << ','
       << p.Ib << ',' << p.p1 << ',' << p.p2 << ',' << p.p3 << ',' << p.n << ',' << p.Vg << ','
       << p.Vi << ',' << p.kq << ',' << p.f << '\n';
  }
}

void save_roster_csv(const std::filesystem::path& path, const std::vector<PatientParams>& roster) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path.string());
  write_roster_csv(os, roster);
}

GlucoseEnv::GlucoseEnv(std::vector<PatientParams> patients, Mode mode)
    : Environment(mode), patients_(std::move(patients)), rng_(0) {
  if (patients_.empty()) throw ConfigError("GlucoseEnv: empty patient roster");
  reset_patient(0, 0);
}

Observation GlucoseEnv::reset(std::uint64_t seed) {
  Rng pick(derive_seed(seed, stream::kMeals, 0xfeed));
  return reset_patient(uniform_index(pick, patients_.size()), seed);
}

Observation GlucoseEnv::reset_patient(std::size_t index, std::uint64_t seed) {
  if (index >= patients_.size()) throw ConfigError("GlucoseEnv: patient index out of range");
  current_ = index;
  rng_ = make_rng(seed, stream::kMeals, static_cast<std::uint64_t>(patients_[index].id));
  const auto& p = patients_[index];
  state_ = equilibrium_state(p);
  state_.G = p.Gb * (0.9 + 0.4 * uniform01(rng_));
  state_.meals = draw_meals(p.cohort, rng_);
  return observe(0.0);
}

Observation GlucoseEnv::observe(double carbs) const {
  const double phase = 2.0 * M_PI * static_cast<double>(state_.clock % 1440) / 1440.0;
  return {state_.G / kGlucoseScale, state_.u / kInsulinScale, std::sin(phase), std::cos(phase),
          carbs / kCarbScale};
}

BaseStep GlucoseEnv::step(double action) {
  const auto r = patient_step(state_, patients_[current_], action);
  return BaseStep{observe(r.carbs), r.reward, r.done};
}

int GlucoseEnv::draw_irregular_interval() {
  return 1 + static_cast<int>(uniform_index(rng_, kIrregularMaxHold));
}

}  // namespace orl::env
