#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qkdrelay/protocol.hpp"

namespace qkdrelay {

// One encoded envelope per line.
void write_trace(const std::filesystem::path& path, const std::vector<Envelope>& trace);
std::vector<std::string> encode_trace(const std::vector<Envelope>& trace);
std::vector<std::string> read_trace_lines(const std::filesystem::path& path);

// Replaces run-specific values with first-occurrence ordinals: per-sender seq
// numbers, key ids ("key-1"), association ids ("assoc-1") and key octets
// ("octets-1"). Structure, ordering and equality relations survive, so traces
// from different seeds compare equal. Throws ParseError on bad lines.
std::vector<std::string> canonicalize_trace(const std::vector<std::string>& lines);

struct TraceDiff {
  bool equal = true;
  std::size_t index = 0;  // first divergent record
  std::optional<std::string> expected;
  std::optional<std::string> actual;

  std::string describe() const;
};

// Canonicalizes both sides, then compares record by record.
TraceDiff trace_compare(const std::vector<std::string>& expected,
                        const std::vector<std::string>& actual);
TraceDiff trace_compare_files(const std::filesystem::path& expected,
                              const std::filesystem::path& actual);

}  // namespace qkdrelay
