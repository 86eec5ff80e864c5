#pragma once

#include "spde/engine.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

namespace spde {

inline constexpr char kSnapshotMagic[8] = {'S', 'P', 'D', 'E', 'S', 'N', 'A', 'P'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

/// Shortest decimal that parses back to the same double ("nan", "inf", "-inf"
/// for non-finite values).
std::string format_double(double x);

/// Binary snapshot of a path record; layout in FORMATS.md. Stored blocks are
/// the recorded states, or the initial and final state when none were kept.
/// Increments are not stored.
void write_snapshot(std::ostream& out, const PathRecord& path);
void write_snapshot(const std::filesystem::path& file, const PathRecord& path);

/// Reads a snapshot back. Throws std::runtime_error on a bad magic, version or
/// truncated stream.
PathRecord read_snapshot(std::istream& in);
PathRecord read_snapshot(const std::filesystem::path& file);

/// Norm series `t,normU,normH,normV,uh,hv,hit`, one row per grid index.
void write_norm_csv(std::ostream& out, const PathRecord& path);
void write_norm_csv(const std::filesystem::path& file, const PathRecord& path);

}  // namespace spde
