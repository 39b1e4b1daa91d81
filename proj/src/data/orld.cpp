#include "orl/data/orld.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>

#include "orl/binary_io.hpp"
#include "orl/errors.hpp"
#include "orl/kv.hpp"

namespace orl::data {

namespace {

void write_f32s(std::ostream& os, const std::vector<double>& v) {
  for (double x : v) io::write_le<float>(os, static_cast<float>(x));
}

std::vector<double> read_f32s(std::istream& is, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = static_cast<double>(io::read_le<float>(is));
  return v;
}

std::filesystem::path meta_path(const std::filesystem::path& p) {
  auto m = p;
  m += ".meta";
  return m;
}

}  // namespace

void write_orld(std::ostream& os, const TransitionSet& set) {
  constexpr auto u16max = std::numeric_limits<std::uint16_t>::max();
  if (set.obs_dim > u16max || set.action_dim > u16max) throw ConfigError("write_orld: dimension too large");
  io::write_magic(os, "ORLD");
  io::write_le<std::uint16_t>(os, kOrldVersion);
  io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(set.env));
  io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(set.variant));
  io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(set.obs_dim));
  io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(set.action_dim));
  io::write_le<std::uint8_t>(os, set.discrete ? 0 : 1);
  io::write_le<std::uint64_t>(os, set.records.size());
  io::write_le<double>(os, set.reward_mean);
  io::write_le<double>(os, set.reward_std);
  for (const auto& r : set.records) {
    if (r.obs.size() != set.obs_dim || r.next_obs.size() != set.obs_dim || r.action.size() != set.action_dim)
      throw ConfigError("write_orld: record dimension mismatch");
    if (r.dt < 0 || r.dt > u16max) throw ConfigError("write_orld: dt out of range");
    io::write_le<std::uint32_t>(os, r.episode);
    write_f32s(os, r.obs);
    write_f32s(os, r.action);
    io::write_le<float>(os, static_cast<float>(r.reward));
    write_f32s(os, r.next_obs);
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(r.dt));
    io::write_le<std::uint8_t>(os, r.done ? 1 : 0);
    io::write_le<std::uint8_t>(os, 0);
  }
  if (!os) throw FormatError("write_orld: stream write failed");
}

TransitionSet read_orld(std::istream& is) {
  io::expect_magic(is, "ORLD");
  const auto version = io::read_le<std::uint16_t>(is);
  if (version != kOrldVersion) throw FormatError("read_orld: unsupported version " + std::to_string(version));
  TransitionSet set;
  const auto env_tag = io::read_le<std::uint8_t>(is);
  const auto variant = io::read_le<std::uint8_t>(is);
  if (env_tag > 1) throw FormatError("read_orld: unknown env tag");
  if (variant > 2) throw FormatError("read_orld: unknown variant");
  set.env = static_cast<env::EnvKind>(env_tag);
  set.variant = static_cast<Variant>(variant);
  set.obs_dim = io::read_le<std::uint16_t>(is);
  set.action_dim = io::read_le<std::uint16_t>(is);
  const auto kind = io::read_le<std::uint8_t>(is);
  if (kind > 1) throw FormatError("read_orld: unknown action kind");
  set.discrete = kind == 0;
  const auto count = io::read_le<std::uint64_t>(is);
  set.reward_mean = io::read_le<double>(is);
  set.reward_std = io::read_le<double>(is);
  set.records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 24)));
  for (std::uint64_t i = 0; i < count; ++i) {
    Transition r;
    r.episode = io::read_le<std::uint32_t>(is);
    r.obs = read_f32s(is, set.obs_dim);
    r.action = read_f32s(is, set.action_dim);
    r.reward = static_cast<double>(io::read_le<float>(is));
    r.next_obs = read_f32s(is, set.obs_dim);
    r.dt = io::read_le<std::uint16_t>(is);
    const auto done = io::read_le<std::uint8_t>(is);
    if (done > 1) throw FormatError("read_orld: bad done flag");
    r.done = done == 1;
    io::read_le<std::uint8_t>(is);
    set.records.push_back(std::move(r));
  }
  if (set.variant == Variant::Binned && !set.records.empty()) set.bin_width = set.records.front().dt;
  return set;
}

void save_dataset(const std::filesystem::path& path, const TransitionSet& set) {
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    write_orld(os, set);
  }
  KeyValues meta;
  meta.set("env", env::to_string(set.env));
  meta.set("variant", to_string(set.variant));
  meta.set("bin_width", set.bin_width);
  meta.set("records", static_cast<std::uint64_t>(set.records.size()));
  meta.set("source", set.provenance.source);
  meta.set("seed", set.provenance.seed);
  meta.set("gamma", set.provenance.gamma);
  meta.set("reward_mean", set.reward_mean);
  meta.set("reward_std", set.reward_std);
  meta.save_atomic(meta_path(path));
}

TransitionSet load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  auto set = read_orld(is);
  if (std::filesystem::exists(meta_path(path))) {
    const auto meta = KeyValues::load(meta_path(path));
    set.bin_width = static_cast<int>(meta.get_int("bin_width"));
    set.provenance.source = meta.get_or("source", "");
    set.provenance.seed = meta.get_uint("seed");
    set.provenance.gamma = meta.get_double("gamma");
  }
  return set;
}

void write_csv(std::ostream& os, const TransitionSet& set) {
  os << "episode";
  for (std::size_t i = 0; i < set.obs_dim; ++i) os << ",obs" << i;
  for (std::size_t i = 0; i < set.action_dim; ++i) os << ",action" << i;
  os << ",reward";
  for (std::size_t i = 0; i < set.obs_dim; ++i) os << ",next_obs" << i;
  os << ",dt,done\n" << std::setprecision(6);
  for (const auto& r : set.records) {
    os << r.episode;
    for (double x : r.obs) os << ',' << x;
    for (double x : r.action) os << ',' << x;
    os << ',' << r.reward;
    for (double x : r.next_obs) os << ',' << x;
    os << ',' << r.dt << ',' << (r.done ? 1 : 0) << '\n';
  }
}

}  // namespace orl::data
