#pragma once

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "aabo/error.hpp"
#include "aabo/hash.hpp"
#include "aabo/serialization.hpp"

namespace aabo {

inline constexpr const char* kLogSchema = "aabo-log/1";

// Line checksum: FNV-1a over the record minus its "checksum" and "ts" fields.
// Timestamps stay outside so identical runs produce identical checksums.
inline std::string record_checksum(const json& record) {
  json body = record;
  body.erase("checksum");
  body.erase("ts");
  return to_hex(fnv1a64(body.dump()));
}

inline std::string utc_timestamp() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

struct LogContents {
  json header;                 // null for an empty file
  std::vector<json> records;   // checksums verified, header excluded
  std::size_t valid_bytes = 0; // offset just past the last complete line
  bool torn_tail = false;      // trailing bytes without a newline (interrupted write)
};

// Reads and verifies a trial log. A final line without a newline is treated
// as an interrupted write and ignored; any other bad line throws CorruptLog.
inline LogContents read_trial_log(const std::filesystem::path& path) {
  LogContents out;
  if (!std::filesystem::exists(path)) return out;
  const std::string text = read_text_file(path);
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      out.torn_tail = true;
      break;
    }
    ++line_no;
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error&) {
      throw CorruptLog(line_no, "not valid JSON");
    }
    if (!rec.is_object() || !rec.contains("checksum") || !rec["checksum"].is_string()) {
      throw CorruptLog(line_no, "missing checksum");
    }
    if (rec["checksum"].get<std::string>() != record_checksum(rec)) {
      throw CorruptLog(line_no, "checksum mismatch");
    }
    if (line_no == 1) {
      if (!rec.contains("schema") || rec["schema"] != kLogSchema) {
        throw CorruptLog(line_no, std::string("header does not declare schema ") + kLogSchema);
      }
      out.header = std::move(rec);
    } else {
      if (!rec.contains("type") || !rec["type"].is_string()) throw CorruptLog(line_no, "record without type");
      out.records.push_back(std::move(rec));
    }
    out.valid_bytes = pos;
  }
  return out;
}

// Hash of a log with timestamps removed; equal for runs that differ only in wall-clock time.
inline std::string log_determinism_hash(const std::filesystem::path& path) {
  const LogContents c = read_trial_log(path);
  std::string acc;
  auto add = [&](json rec) {
    rec.erase("ts");
    acc += rec.dump();
    acc += '\n';
  };
  if (!c.header.is_null()) add(c.header);
  for (const auto& r : c.records) add(r);
  return to_hex(fnv1a64(acc));
}

// Single-writer append-only JSONL sink.
class TrialLogWriter {
 public:
  // Creates (truncating) a log and writes its header.
  static TrialLogWriter create(const std::filesystem::path& path, json header) {
    TrialLogWriter w(path, "wb");
    header["schema"] = kLogSchema;
    w.write_raw(std::move(header), false);
    w.sync();
    return w;
  }

  // Reopens an existing log for appending after `valid_bytes` (dropping a torn tail).
  static TrialLogWriter append_to(const std::filesystem::path& path, std::size_t valid_bytes) {
    std::filesystem::resize_file(path, valid_bytes);
    return TrialLogWriter(path, "ab");
  }

  void write(json record) { write_raw(std::move(record), true); }

  void flush() {
    if (std::fflush(file_.get()) != 0) throw Error("trial log flush failed");
  }

  // Flush and fsync; called at generation boundaries.
  void sync() {
    flush();
    ::fsync(::fileno(file_.get()));
  }

 private:
  struct Closer {
    void operator()(std::FILE* f) const {
      if (f) std::fclose(f);
    }
  };

  TrialLogWriter(const std::filesystem::path& path, const char* mode) : file_(std::fopen(path.c_str(), mode)) {
    if (!file_) throw InvalidInput("cannot open trial log " + path.string());
  }

  void write_raw(json record, bool stamp) {
    record.erase("checksum");
    if (stamp) record["ts"] = utc_timestamp();
    record["checksum"] = record_checksum(record);
    const std::string line = record.dump() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), file_.get()) != line.size()) {
      throw Error("trial log write failed");
    }
  }

  std::unique_ptr<std::FILE, Closer> file_;
};

}  // namespace aabo
