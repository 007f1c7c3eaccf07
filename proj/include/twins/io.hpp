#pragma once

// Text formats. Every file starts with a provenance line
//   # scenario_hash=<16 hex> seed=<u64>
// followed by a column header. Floats use 9 significant digits, except
// fingerprint probabilities which use 17 so a reload is exact.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "twins/env.hpp"
#include "twins/fingerprint.hpp"

namespace twins::io {

struct Provenance {
  std::string scenario_hash;
  std::uint64_t seed = 0;

  std::string line() const;
};

std::string fmt(double v);

/// Comma-joined rows under the provenance line and `header`.
void write_table(const std::filesystem::path& path, const Provenance& prov, const std::string& header,
                 const std::vector<std::vector<std::string>>& rows);

void write_events(const std::filesystem::path& path, const Provenance& prov,
                  const std::vector<env::StateJumpEvent>& events);
void write_truth(const std::filesystem::path& path, const Provenance& prov,
                 const std::vector<env::TruthSample>& truth);
void write_trace(const std::filesystem::path& path, const Provenance& prov,
                 const std::vector<env::QueryRecord>& trace);
void write_fingerprint(const std::filesystem::path& path, const Provenance& prov,
                       const tracker::Fingerprint& fp);

/// Readers throw ConfigError with the offending line.
std::vector<env::TruthSample> read_truth(const std::filesystem::path& path, Provenance* prov = nullptr);
std::vector<env::QueryRecord> read_trace(const std::filesystem::path& path, Provenance* prov = nullptr);
std::vector<env::StateJumpEvent> read_events(const std::filesystem::path& path,
                                             Provenance* prov = nullptr);
tracker::Fingerprint read_fingerprint(const std::filesystem::path& path, Provenance* prov = nullptr);

}  // namespace twins::io
