#include "qkdrelay/trace.hpp"

#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "qkdrelay/errors.hpp"

namespace qkdrelay {

using nlohmann::json;

std::vector<std::string> encode_trace(const std::vector<Envelope>& trace) {
  std::vector<std::string> out;
  out.reserve(trace.size());
  for (const auto& env : trace) out.push_back(encode(env));
  return out;
}

void write_trace(const std::filesystem::path& path, const std::vector<Envelope>& trace) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error("cannot write trace file " + path.string());
  for (const auto& env : trace) file << encode(env) << '\n';
}

std::vector<std::string> read_trace_lines(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw ParseError("cannot open trace file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(file, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

namespace {

class Renumber {
 public:
  explicit Renumber(std::string prefix) : prefix_(std::move(prefix)) {}
  std::string operator()(const std::string& value) {
    if (value.empty()) return value;
    auto [it, inserted] = seen_.emplace(value, seen_.size() + 1);
    return prefix_ + std::to_string(it->second);
  }

 private:
  std::string prefix_;
  std::map<std::string, std::size_t> seen_;
};

}  // namespace

std::vector<std::string> canonicalize_trace(const std::vector<std::string>& lines) {
  std::map<std::string, std::uint64_t> seq_counter;
  std::map<std::pair<std::string, std::uint64_t>, std::uint64_t> seq_map;
  Renumber keys("key-");
  Renumber assocs("assoc-");
  Renumber octets("octets-");

  std::vector<std::string> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    json doc;
    try {
      doc = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      throw ParseError("trace line " + std::to_string(i + 1) + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("from") || !doc.contains("seq") ||
        !doc["from"].is_string() || !doc["seq"].is_number_unsigned()) {
      throw ParseError("trace line " + std::to_string(i + 1) + ": not an envelope");
    }
    const auto from = doc["from"].get<std::string>();
    const auto seq = doc["seq"].get<std::uint64_t>();
    auto [it, inserted] = seq_map.emplace(std::pair{from, seq}, 0);
    if (inserted) it->second = ++seq_counter[from];
    doc["seq"] = it->second;

    if (doc.contains("body") && doc["body"].is_object()) {
      for (auto& [field, value] : doc["body"].items()) {
        if (!value.is_string()) continue;
        const auto text = value.get<std::string>();
        if (field == "key_id" || field == "id_relay_key" || field == "id_key_encryption") {
          value = keys(text);
        } else if (field == "id_association") {
          value = assocs(text);
        } else if (field == "material" || field == "value_relay_key" ||
                   field == "encrypted_relay_key") {
          value = octets(text);
        }
      }
    }
    out.push_back(doc.dump());
  }
  return out;
}

std::string TraceDiff::describe() const {
  if (equal) return "traces are identical";
  std::string s = "traces diverge at record " + std::to_string(index);
  s += "\n  expected: " + expected.value_or("<end of trace>");
  s += "\n  actual:   " + actual.value_or("<end of trace>");
  return s;
}

TraceDiff trace_compare(const std::vector<std::string>& expected,
                        const std::vector<std::string>& actual) {
  const auto a = canonicalize_trace(expected);
  const auto b = canonicalize_trace(actual);
  TraceDiff diff;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] != b[i]) {
      diff.equal = false;
      diff.index = i;
      diff.expected = a[i];
      diff.actual = b[i];
      return diff;
    }
  }
  if (a.size() != b.size()) {
    diff.equal = false;
    diff.index = n;
    if (n < a.size()) diff.expected = a[n];
    if (n < b.size()) diff.actual = b[n];
  }
  return diff;
}

TraceDiff trace_compare_files(const std::filesystem::path& expected,
                              const std::filesystem::path& actual) {
  return trace_compare(read_trace_lines(expected), read_trace_lines(actual));
}

}  // namespace qkdrelay
