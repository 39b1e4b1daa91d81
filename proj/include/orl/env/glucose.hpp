#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "orl/env/environment.hpp"
#include "orl/random.hpp"

namespace orl::env {

enum class Cohort : std::uint8_t { Adult = 0, Adolescent = 1, Child = 2 };
enum class Split : std::uint8_t { Train = 0, Validation = 1, Test = 2 };

std::string to_string(Cohort c);
std::string to_string(Split s);

inline constexpr int kBaseStepMinutes = 10;
inline constexpr int kEpisodeMinutes = 2880;
inline constexpr int kMaxGlucoseSteps = kEpisodeMinutes / kBaseStepMinutes;
inline constexpr double kInsulinMax = 0.5;  // U/min
inline constexpr double kTerminationPenalty = -10000.0;
inline constexpr double kGlucoseLow = 10.0;
inline constexpr double kGlucoseHigh = 600.0;
inline constexpr int kIrregularMaxHold = 12;

// Fixed observation scaling.
inline constexpr double kGlucoseScale = 400.0;
inline constexpr double kInsulinScale = 0.5;
inline constexpr double kCarbScale = 100.0;
inline constexpr std::size_t kGlucoseObsDim = 5;
inline constexpr std::size_t kCarbFeature = 4;

struct PatientParams {
  int id = 0;
  Cohort cohort = Cohort::Adult;
  Split split = Split::Train;
  double Gb = 0;   // basal glucose, mg/dL
  double Ib = 0;   // basal plasma insulin, mU/L
  double p1 = 0;   // glucose effectiveness, 1/min
  double p2 = 0;   // remote insulin decay, 1/min
  double p3 = 0;   // insulin action gain, L/(mU·min²)
  double n = 0;    // insulin clearance, 1/min
  double Vg = 0;   // glucose distribution volume, dL
  double Vi = 0;   // insulin distribution volume, L
  double kq = 0;   // gut emptying rate, 1/min
  double f = 0;    // carbohydrate bioavailability

  bool operator==(const PatientParams&) const = default;
};

struct Meal {
  int minute = 0;
  double grams = 0.0;
  bool operator==(const Meal&) const = default;
};

struct PatientState {
  double G = 0;
  double X = 0;
  double I = 0;
  double Q1 = 0;
  double Q2 = 0;
  int clock = 0;  // minutes since episode start
  double u = 0;   // current infusion, U/min
  std::vector<Meal> meals;
  std::size_t next_meal = 0;
  bool done = false;
};

struct PatientStepResult {
  double reward = 0.0;
  bool done = false;
  bool out_of_bounds = false;
  double carbs = 0.0;  // grams ingested during the step
};

/// g(x) = 10·(1.509·(ln(x)^1.084 − 5.381))². Throws DomainError for x ≤ 1.
double magni_risk(double glucose);
/// R(x) = max(5.1 − g(x), 10·(5.1 − g(x))).
double glucose_reward(double glucose);

/// Infusion that holds plasma insulin at Ib: n·Ib·Vi/1000 U/min.
double basal_infusion(const PatientParams& p);

/// Equilibrium state at basal glucose/insulin with no meals.
PatientState equilibrium_state(const PatientParams& p);

/// Three meals per day in the breakfast, lunch and dinner windows; sizes
/// Uniform[30, 90] g scaled by cohort.
std::vector<Meal> draw_meals(Cohort cohort, Rng& rng, int days = 2);

/// Integrates the minimal model over one 10-minute base step (RK4, 1-minute
/// substeps) with infusion u held constant.
PatientStepResult patient_step(PatientState& state, const PatientParams& params, double u);

/// 30 patients, 10 per cohort, split 18/6/6 with 6/2/2 of each cohort.
std::vector<PatientParams> make_cohorts(std::uint64_t master_seed);
std::vector<PatientParams> select_split(const std::vector<PatientParams>& roster, Split split);

void write_roster_csv(std::ostream& os, const std::vector<PatientParams>& roster);
void save_roster_csv(const std::filesystem::path& path, const std::vector<PatientParams>& roster);

/// Insulin-control environment over a roster of patients.
class GlucoseEnv final : public Environment {
 public:
  GlucoseEnv(std::vector<PatientParams> patients, Mode mode = Mode::Regular);

  EnvKind kind() const override { return EnvKind::Glucose; }
  std::size_t obs_dim() const override { return kGlucoseObsDim; }
  bool discrete() const override { return false; }
  std::size_t action_count() const override { return 1; }
  double action_low() const override { return 0.0; }
  double action_high() const override { return kInsulinMax; }
  std::optional<std::size_t> summed_feature() const override { return kCarbFeature; }

  /// Starts an episode for a patient drawn from the roster by `seed`.
  Observation reset(std::uint64_t seed) override;
  /// Starts an episode for roster entry `index`.
  Observation reset_patient(std::size_t index, std::uint64_t seed);
  BaseStep step(double action) override;
  bool done() const override { return state_.done; }

  const PatientState& state() const { return state_; }
  PatientState& mutable_state() { return state_; }
  const PatientParams& patient() const { return patients_.at(current_); }
  const std::vector<PatientParams>& patients() const { return patients_; }
  Observation observe(double carbs) const;

 private:
  int draw_irregular_interval() override;

  std::vector<PatientParams> patients_;
  std::size_t current_ = 0;
  PatientState state_;
  Rng rng_;
};

}  // namespace orl::env
