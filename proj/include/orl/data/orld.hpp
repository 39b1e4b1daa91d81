#pragma once

#include <filesystem>
#include <iosfwd>

#include "orl/data/dataset.hpp"

namespace orl::data {

// "ORLD" dataset file, little-endian throughout:
//   magic[4] | version u16 (=1) | env tag u8 | variant u8 | obs dim u16 |
//   action dim u16 | action kind u8 (0 discrete, 1 continuous) | record count u64 |
//   reward mean f64 | reward std f64
//   records: episode id u32 | obs f32[obs dim] | action f32[action dim] |
//            reward f32 | next obs f32[obs dim] | dt u16 | done u8 | pad u8
// Values are narrowed to f32 on write; bin width is recovered from dt for
// binned sets. Provenance lives in a "<file>.meta" key-value sidecar.
inline constexpr std::uint16_t kOrldVersion = 1;

void write_orld(std::ostream& os, const TransitionSet& set);
TransitionSet read_orld(std::istream& is);

/// Writes the ORLD file and its provenance sidecar.
void save_dataset(const std::filesystem::path& path, const TransitionSet& set);
/// Reads an ORLD file and, when present, its sidecar.
TransitionSet load_dataset(const std::filesystem::path& path);

/// Lossy human-readable export.
void write_csv(std::ostream& os, const TransitionSet& set);

}  // namespace orl::data
