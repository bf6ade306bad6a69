#include "gkfp/report.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <sstream>

namespace gkfp {

const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::skipped: return "skipped";
  }
  return "unknown";
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string CheckRecord::param_json() const {
  std::string out = "{";
  bool first = true;
  for (const auto& [k, v] : params) {
    if (!first) out += ",";
    first = false;
    out += "\"" + k + "\":" + format_double(v);
  }
  out += "}";
  return out;
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

}  // namespace

std::string records_to_csv(const std::vector<CheckRecord>& records) {
  std::string out = "suite,check_id,param_json,value,bound,margin,drift,status\n";
  for (const CheckRecord& r : records) {
    out += r.suite + "," + r.check_id + "," + csv_escape(r.param_json()) + "," +
           format_double(r.value) + "," + format_double(r.bound) + "," +
           format_double(r.margin) + "," + format_double(r.drift) + "," + to_string(r.status) +
           "\n";
  }
  return out;
}

std::string records_to_json(const std::vector<CheckRecord>& records,
                            const std::map<std::string, std::string>& environment) {
  nlohmann::ordered_json doc;
  doc["environment"] = environment;
  doc["records"] = nlohmann::ordered_json::array();
  for (const CheckRecord& r : records) {
    nlohmann::ordered_json rec;
    rec["suite"] = r.suite;
    rec["check_id"] = r.check_id;
    rec["params"] = r.params;
    rec["value"] = r.value;
    rec["bound"] = r.bound;
    rec["margin"] = r.margin;
    rec["drift"] = r.drift;
    rec["status"] = to_string(r.status);
    if (!r.note.empty()) rec["note"] = r.note;
    doc["records"].push_back(rec);
  }
  return doc.dump(2) + "\n";
}

std::string config_hash(const std::string& text) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace gkfp
