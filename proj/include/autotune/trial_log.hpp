#pragma once

// Append-only trial log: one JSON object per line. The first line is a
// header naming the schema version and the configuration space; every
// following line is one execution.
//
//   {"schema":"autotune-trial-log","version":1,"space":"spark",
//    "params":["spark.executor.cores",...],"algorithm":"autotune",
//    "seed":42,"tc_ms":1.6e6}
//   {"i":0,"phase":"init","platform":"TB","iter":0,"config":[4,1024,...],
//    "ds":0.0625,"nm":5,"time_ms":13011.2,"charged_ms":13011.2,
//    "clock_ms":13011.2,"seed":123,"rep":0,"reused":false}

#include <cstdint>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "autotune/error.hpp"
#include "autotune/param_space.hpp"

namespace autotune {

enum class Phase { Init, Explore, Exploit, Validate };
enum class PlatformKind { Testbed, Production };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::Init: return "init";
    case Phase::Explore: return "explore";
    case Phase::Exploit: return "exploit";
    case Phase::Validate: return "validate";
  }
  return "?";
}

inline Phase parse_phase(const std::string& s) {
  if (s == "init") return Phase::Init;
  if (s == "explore") return Phase::Explore;
  if (s == "exploit") return Phase::Exploit;
  if (s == "validate") return Phase::Validate;
  throw FormatError("unknown phase '" + s + "'");
}

inline const char* to_string(PlatformKind p) {
  return p == PlatformKind::Testbed ? "TB" : "PS";
}

inline PlatformKind parse_platform(const std::string& s) {
  if (s == "TB") return PlatformKind::Testbed;
  if (s == "PS") return PlatformKind::Production;
  throw FormatError("unknown platform '" + s + "'");
}

struct TrialRecord {
  std::size_t index = 0;
  Phase phase = Phase::Init;
  PlatformKind platform = PlatformKind::Testbed;
  std::size_t iteration = 0;
  Configuration config;
  double ds = 1.0;
  int nm = 1;
  double time_ms = 0.0;
  double charged_ms = 0.0;  // zero when a logged result was reused
  double clock_ms = 0.0;    // cumulative charged time after this record
  std::uint64_t seed = 0;
  std::size_t rep = 0;
  bool reused = false;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct TrialLogHeader {
  int version = 1;
  std::string space;
  std::vector<std::string> params;
  std::string algorithm = "autotune";
  std::uint64_t seed = 0;
  double tc_ms = 0.0;

  friend bool operator==(const TrialLogHeader&, const TrialLogHeader&) = default;
};

struct TrialLog {
  TrialLogHeader header;
  std::vector<TrialRecord> records;

  std::size_t size() const { return records.size(); }

  double total_charged() const {
    double s = 0.0;
    for (const auto& r : records) s += r.charged_ms;
    return s;
  }

  /// Appends a record, assigning its index and timestamp.
  TrialRecord& append(TrialRecord r) {
    r.index = records.size();
    r.clock_ms = (records.empty() ? 0.0 : records.back().clock_ms) + r.charged_ms;
    records.push_back(std::move(r));
    return records.back();
  }

  friend bool operator==(const TrialLog&, const TrialLog&) = default;
};

inline constexpr const char* kTrialLogSchema = "autotune-trial-log";
inline constexpr int kTrialLogVersion = 1;

inline nlohmann::json header_to_json(const TrialLogHeader& h) {
  nlohmann::json j;
  j["schema"] = kTrialLogSchema;
  j["version"] = h.version;
  j["space"] = h.space;
  j["params"] = h.params;
  j["algorithm"] = h.algorithm;
  j["seed"] = h.seed;
  j["tc_ms"] = h.tc_ms;
  return j;
}

inline nlohmann::json record_to_json(const TrialRecord& r) {
  nlohmann::json j;
  j["i"] = r.index;
  j["phase"] = to_string(r.phase);
  j["platform"] = to_string(r.platform);
  j["iter"] = r.iteration;
  j["config"] = config_to_json(r.config);
  j["ds"] = r.ds;
  j["nm"] = r.nm;
  j["time_ms"] = r.time_ms;
  j["charged_ms"] = r.charged_ms;
  j["clock_ms"] = r.clock_ms;
  j["seed"] = r.seed;
  j["rep"] = r.rep;
  j["reused"] = r.reused;
  return j;
}

inline TrialRecord record_from_json(const ConfigurationSpace& space,
                                    const nlohmann::json& j) {
  TrialRecord r;
  r.index = j.at("i").get<std::size_t>();
  r.phase = parse_phase(j.at("phase").get<std::string>());
  r.platform = parse_platform(j.at("platform").get<std::string>());
  r.iteration = j.at("iter").get<std::size_t>();
  r.config = config_from_json(space, j.at("config"));
  r.ds = j.at("ds").get<double>();
  r.nm = j.at("nm").get<int>();
  r.time_ms = j.at("time_ms").get<double>();
  r.charged_ms = j.at("charged_ms").get<double>();
  r.clock_ms = j.at("clock_ms").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.rep = j.at("rep").get<std::size_t>();
  r.reused = j.at("reused").get<bool>();
  if (!(r.time_ms > 0.0)) throw FormatError("time_ms must be positive");
  if (!(r.ds > 0.0 && r.ds <= 1.0)) throw FormatError("ds must be in (0, 1]");
  if (r.nm < 1) throw FormatError("nm must be >= 1");
  if (r.charged_ms < 0.0) throw FormatError("charged_ms must be non-negative");
  if (!validate(space, r.config).ok()) throw FormatError("config outside the space bounds");
  return r;
}

inline std::string to_jsonl(const TrialLog& log) {
  std::string out = header_to_json(log.header).dump() + "\n";
  for (const auto& r : log.records) out += record_to_json(r).dump() + "\n";
  return out;
}

inline void write_log(const std::string& path, const TrialLog& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write trial log '" + path + "'");
  out << to_jsonl(log);
}

/// Streams records to disk as they are produced; appends are serialized.
class TrialLogWriter {
 public:
  TrialLogWriter(const std::string& path, const TrialLogHeader& header)
      : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw FormatError("cannot write trial log '" + path + "'");
    out_ << header_to_json(header).dump() << '\n';
    out_.flush();
  }

  void append(const TrialRecord& r) {
    std::lock_guard lock(mu_);
    out_ << record_to_json(r).dump() << '\n';
    out_.flush();
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

struct LoadedLog {
  TrialLog log;
  std::vector<std::string> warnings;
};

/// Parses a trial log. A malformed line raises FormatError naming the line
/// number, except an unterminated final line, which is dropped with a
/// warning so that interrupted runs can be resumed.
inline LoadedLog parse_log(const std::string& text, const ConfigurationSpace& space) {
  LoadedLog out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool have_header = false;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    const std::string line = text.substr(pos, terminated ? nl - pos : std::string::npos);
    pos = terminated ? nl + 1 : text.size();
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        if (j.value("schema", "") != kTrialLogSchema)
          throw FormatError("missing trial-log header");
        if (j.at("version").get<int>() != kTrialLogVersion)
          throw FormatError("unsupported trial-log version " +
                            std::to_string(j.at("version").get<int>()));
        auto& h = out.log.header;
        h.version = kTrialLogVersion;
        h.space = j.at("space").get<std::string>();
        h.params = j.at("params").get<std::vector<std::string>>();
        h.algorithm = j.at("algorithm").get<std::string>();
        h.seed = j.at("seed").get<std::uint64_t>();
        h.tc_ms = j.at("tc_ms").get<double>();
        if (h.params != space.names())
          throw FormatError("log was written for a different configuration space");
        have_header = true;
        continue;
      }
      auto r = record_from_json(space, j);
      if (r.index != out.log.records.size())
        throw FormatError("record index " + std::to_string(r.index) + " out of sequence");
      if (!out.log.records.empty() && r.clock_ms < out.log.records.back().clock_ms)
        throw FormatError("timestamps must be non-decreasing");
      out.log.records.push_back(std::move(r));
    } catch (const std::exception& e) {
      if (!terminated) {
        out.warnings.push_back("line " + std::to_string(line_no) +
                               ": truncated final record ignored");
        break;
      }
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw FormatError("line 1: empty trial log");
  return out;
}

inline LoadedLog load_log(const std::string& path, const ConfigurationSpace& space) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open trial log '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_log(ss.str(), space);
}

}  // namespace autotune
