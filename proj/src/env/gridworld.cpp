#include "orl/env/gridworld.hpp"

#include <deque>

#include "orl/errors.hpp"

namespace orl::env {

Cell GridState::at(int r, int c) const {
  if (r < 0 || c < 0 || r >= rows || c >= cols) return Cell::Wall;
  return cells[static_cast<std::size_t>(r * cols + c)];
}

std::pair<int, int> step_offset(Dir d) {
  switch (d) {
    case Dir::North: return {-1, 0};
    case Dir::East: return {0, 1};
    case Dir::South: return {1, 0};
    case Dir::West: return {0, -1};
  }
  return {0, 0};
}

Dir rotate_left(Dir d) { return static_cast<Dir>((static_cast<int>(d) + 3) % 4); }
Dir rotate_right(Dir d) { return static_cast<Dir>((static_cast<int>(d) + 1) % 4); }

std::size_t grid_obs_dim() { return kGridView * kGridView * kCellKinds + 4; }

Observation observe(const GridState& s) {
  Observation obs(grid_obs_dim(), 0.0);
  const auto [fr, fc] = step_offset(s.dir);
  const auto [rr, rc] = step_offset(rotate_right(s.dir));
  const int half = kGridView / 2;
  for (int vr = 0; vr < kGridView; ++vr) {
    const int ahead = kGridView - 1 - vr;
    for (int vc = 0; vc < kGridView; ++vc) {
      const int side = vc - half;
      const int r = s.row + ahead * fr + side * rr;
      const int c = s.col + ahead * fc + side * rc;
      const auto kind = static_cast<std::size_t>(s.at(r, c));
      obs[static_cast<std::size_t>((vr * kGridView + vc) * kCellKinds) + kind] = 1.0;
    }
  }
  obs[kGridView * kGridView * kCellKinds + static_cast<std::size_t>(s.dir)] = 1.0;
  return obs;
}

bool goal_reachable(const GridState& s) {
  std::vector<char> seen(s.cells.size(), 0);
  std::deque<std::pair<int, int>> frontier{{s.row, s.col}};
  seen[static_cast<std::size_t>(s.row * s.cols + s.col)] = 1;
  while (!frontier.empty()) {
    const auto [r, c] = frontier.front();
    frontier.pop_front();
    if (s.at(r, c) == Cell::Goal) return true;
    for (int d = 0; d < 4; ++d) {
      const auto [dr, dc] = step_offset(static_cast<Dir>(d));
      const int nr = r + dr;
      const int nc = c + dc;
      const Cell cell = s.at(nr, nc);
      if (cell == Cell::Wall || cell == Cell::Lava) continue;
      auto& mark = seen[static_cast<std::size_t>(nr * s.cols + nc)];
      if (mark) continue;
      mark = 1;
      frontier.emplace_back(nr, nc);
    }
  }
  return false;
}

GridWorld::GridWorld(Mode mode, int size) : Environment(mode), size_(size), rng_(0) {
  if (size < 5) throw ConfigError("GridWorld: size must be at least 5");
  reset(0);
}

Observation GridWorld::reset(std::uint64_t seed) {
  rng_ = Rng(derive_seed(seed, 0x67726964));
  GridState s;
  s.rows = s.cols = size_;
  s.cells.assign(static_cast<std::size_t>(size_ * size_), Cell::Empty);
  for (int i = 0; i < size_; ++i) {
    s.set(0, i, Cell::Wall);
    s.set(size_ - 1, i, Cell::Wall);
    s.set(i, 0, Cell::Wall);
    s.set(i, size_ - 1, Cell::Wall);
  }
  // Lava column strictly between the start column (1) and the goal column (size-2).
  const int lava_col = 2 + static_cast<int>(uniform_index(rng_, static_cast<std::uint64_t>(size_ - 4)));
  const int gap_row = 1 + static_cast<int>(uniform_index(rng_, static_cast<std::uint64_t>(size_ - 2)));
  for (int r = 1; r < size_ - 1; ++r)
    if (r != gap_row) s.set(r, lava_col, Cell::Lava);
  s.set(size_ - 2, size_ - 2, Cell::Goal);
  s.row = 1;
  s.col = 1;
  s.dir = Dir::East;
  state_ = std::move(s);
  return observe(state_);
}

Observation GridWorld::reset_layout(const std::vector<std::string>& layout, std::uint64_t seed) {
  rng_ = Rng(derive_seed(seed, 0x67726964));
  if (layout.empty()) throw ConfigError("reset_layout: empty layout");
  GridState s;
  s.rows = static_cast<int>(layout.size());
  s.cols = static_cast<int>(layout.front().size());
  s.cells.assign(static_cast<std::size_t>(s.rows * s.cols), Cell::Empty);
  bool agent = false;
  for (int r = 0; r < s.rows; ++r) {
    if (static_cast<int>(layout[static_cast<std::size_t>(r)].size()) != s.cols)
      throw ConfigError("reset_layout: ragged layout");
    for (int c = 0; c < s.cols; ++c) {
      const char ch = layout[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      switch (ch) {
        case '#': s.set(r, c, Cell::Wall); break;
        case 'L': s.set(r, c, Cell::Lava); break;
        case 'G': s.set(r, c, Cell::Goal); break;
        case '.': break;
        case '^': case '>': case 'v': case '<':
          agent = true;
          s.row = r;
          s.col = c;
          s.dir = ch == '^' ? Dir::North : ch == '>' ? Dir::East : ch == 'v' ? Dir::South : Dir::West;
          break;
        default: throw ConfigError(std::string("reset_layout: unknown cell '") + ch + "'");
      }
    }
  }
  if (!agent) throw ConfigError("reset_layout: no agent marker");
  state_ = std::move(s);
  return observe(state_);
}

GridStepResult GridWorld::grid_step(GridAction action) {
  if (state_.done) throw UsageError("grid_step called after the episode ended");
  GridStepResult out;
  auto& s = state_;
  switch (action) {
    case GridAction::Forward: {
      const auto [dr, dc] = step_offset(s.dir);
      const Cell target = s.at(s.row + dr, s.col + dc);
      if (target != Cell::Wall) {
        s.row += dr;
        s.col += dc;
      }
      if (target == Cell::Goal) {
        out.reward = 1.0;
        out.reached_goal = true;
        s.done = true;
      } else if (target == Cell::Lava) {
        out.hit_lava = true;
        s.done = true;
      }
      break;
    }
    case GridAction::RotateLeft: s.dir = rotate_left(s.dir); break;
    case GridAction::RotateRight: s.dir = rotate_right(s.dir); break;
    case GridAction::NoOp: break;
  }
  ++s.elapsed;
  if (!s.done && s.elapsed >= kGridMaxSteps) {
    out.timed_out = true;
    s.done = true;
  }
  out.done = s.done;
  out.obs = observe(s);
  return out;
}

BaseStep GridWorld::step(double action) {
  const int a = static_cast<int>(action);
  if (a < 0 || a >= kGridActionCount || a != action)
    throw ConfigError("GridWorld::step: invalid action " + std::to_string(action));
  auto r = grid_step(static_cast<GridAction>(a));
  return BaseStep{std::move(r.obs), r.reward, r.done};
}

int GridWorld::draw_irregular_interval() { return (rng_() >> 63) ? 3 : 1; }

}  // namespace orl::env
