#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "orl/env/environment.hpp"
#include "orl/random.hpp"

namespace orl::env {

enum class Cell : std::uint8_t { Empty = 0, Wall = 1, Lava = 2, Goal = 3 };
enum class Dir : std::uint8_t { North = 0, East = 1, South = 2, West = 3 };
enum class GridAction : std::uint8_t { Forward = 0, RotateLeft = 1, RotateRight = 2, NoOp = 3 };

inline constexpr int kGridActionCount = 4;
inline constexpr int kGridMaxSteps = 100;
inline constexpr int kGridView = 5;
inline constexpr int kCellKinds = 4;

struct GridState {
  int rows = 0;
  int cols = 0;
  std::vector<Cell> cells;
  int row = 0;
  int col = 0;
  Dir dir = Dir::East;
  int elapsed = 0;
  bool done = false;

  Cell at(int r, int c) const;  // outside the grid reads as Wall
  void set(int r, int c, Cell v) { cells[static_cast<std::size_t>(r * cols + c)] = v; }
  bool operator==(const GridState&) const = default;
};

struct GridStepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  bool reached_goal = false;
  bool hit_lava = false;
  bool timed_out = false;
};

std::pair<int, int> step_offset(Dir d);
Dir rotate_left(Dir d);
Dir rotate_right(Dir d);

/// Egocentric 5×5 view (agent at the bottom centre, facing up), one-hot over
/// cell kinds, followed by a one-hot orientation. Pure function of the state.
Observation observe(const GridState& s);
std::size_t grid_obs_dim();

/// True when the goal is reachable from the agent's cell through non-wall,
/// non-lava cells (4-neighbour flood fill).
bool goal_reachable(const GridState& s);

/// Lava-gap gridworld: a lava column spanning the interior with one gap,
/// start in the top-left interior cell facing east, goal bottom-right.
class GridWorld final : public Environment {
 public:
  explicit GridWorld(Mode mode = Mode::Regular, int size = 7);

  EnvKind kind() const override { return EnvKind::Grid; }
  std::size_t obs_dim() const override { return grid_obs_dim(); }
  bool discrete() const override { return true; }
  std::size_t action_count() const override { return kGridActionCount; }
  double action_low() const override { return 0.0; }
  double action_high() const override { return kGridActionCount - 1; }

  Observation reset(std::uint64_t seed) override;
  BaseStep step(double action) override;
  bool done() const override { return state_.done; }

  /// Installs a hand-made layout. Rows of characters: '#' wall, '.' empty,
  /// 'L' lava, 'G' goal, and one of '^', '>', 'v', '<' for the agent.
  Observation reset_layout(const std::vector<std::string>& layout, std::uint64_t seed = 0);

  GridStepResult grid_step(GridAction action);
  const GridState& state() const { return state_; }
  int size() const { return size_; }

 private:
  int draw_irregular_interval() override;

  int size_;
  GridState state_;
  Rng rng_;
};

}  // namespace orl::env
