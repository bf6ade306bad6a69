// Check records and their deterministic CSV / JSON serialization.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gkfp {

enum class CheckStatus { pass, fail, skipped };

const char* to_string(CheckStatus s);

struct CheckRecord {
  std::string suite;
  std::string check_id;
  std::map<std::string, double> params;
  double value = 0;
  double bound = 0;
  double margin = 0;
  double drift = 0;
  CheckStatus status = CheckStatus::pass;
  std::string note;  // reason for skipped checks

  std::string param_json() const;
};

/// Fixed-format double serialization (shortest round-trip form), used so the
/// emitted CSV is byte-identical across runs and platforms of the same build.
std::string format_double(double v);

std::string records_to_csv(const std::vector<CheckRecord>& records);
std::string records_to_json(const std::vector<CheckRecord>& records,
                            const std::map<std::string, std::string>& environment);

/// FNV-1a of the canonicalized config text, reported in the JSON environment.
std::string config_hash(const std::string& text);

}  // namespace gkfp
