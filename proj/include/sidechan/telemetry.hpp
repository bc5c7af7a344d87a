#pragma once

// Parsers and feature extraction for the attacker's real-world inputs:
// field-separated counter output (perf -x style) and /proc/stat snapshot
// traces, plus burst segmentation that turns coarse CPU activity into the
// Tier-1 timing feature.

#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sidechan/common.hpp"
#include "sidechan/hwmodel.hpp"

namespace sidechan::telemetry {

using hwmodel::Observation;

struct PerfRecord {
  std::optional<std::uint64_t> value;  // nullopt == "<not counted>"
  std::string unit;                    // may be empty
  std::string event;
  std::optional<std::uint64_t> run_time_ns;
  std::optional<double> pct_running;

  friend bool operator==(const PerfRecord&, const PerfRecord&) = default;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line,
                                                  char delimiter) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::optional<std::uint64_t> parse_u64(std::string_view text) {
  std::uint64_t v = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || text.empty()) return std::nullopt;
  return v;
}

inline std::optional<double> parse_f64(std::string_view text) {
  if (text.empty()) return std::nullopt;
  char* end = nullptr;
  const std::string tmp(text);
  const double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size()) return std::nullopt;
  return v;
}

}  // namespace detail

// One record per non-comment line: value,unit,event[,run_time_ns[,pct]].
// Lines starting with '#' and blank lines are skipped; trailing extra fields
// are tolerated. "<not counted>" is a documented sentinel; "<not supported>"
// makes the whole input unusable for that event.
inline std::vector<PerfRecord> parse_perf_csv(std::string_view text,
                                              char delimiter = ',') {
  if (delimiter == '\0' || delimiter == '\n' ||
      !std::isprint(static_cast<unsigned char>(delimiter))) {
    throw ConfigError("perf parser: delimiter must be a printable character");
  }
  std::vector<PerfRecord> records;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    std::string_view line = text.substr(
        start, nl == std::string_view::npos ? text.size() - start : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    const auto fields = detail::split_fields(line, delimiter);
    if (fields.size() < 3) {
      throw ParseError("perf line " + std::to_string(line_no) +
                       ": expected at least 3 fields");
    }
    PerfRecord rec;
    rec.unit = std::string(fields[1]);
    rec.event = std::string(fields[2]);
    if (rec.event.empty()) {
      throw ParseError("perf line " + std::to_string(line_no) +
                       ": empty event name");
    }
    if (fields[0] == "<not counted>") {
      rec.value = std::nullopt;
    } else if (fields[0] == "<not supported>") {
      throw DataError("perf: event '" + rec.event +
                      "' is not supported on this machine (line " +
                      std::to_string(line_no) + ")");
    } else {
      rec.value = detail::parse_u64(fields[0]);
      if (!rec.value) {
        throw ParseError("perf line " + std::to_string(line_no) +
                         ": bad counter value '" + std::string(fields[0]) +
                         "'");
      }
    }
    if (fields.size() > 3 && !fields[3].empty()) {
      rec.run_time_ns = detail::parse_u64(fields[3]);
      if (!rec.run_time_ns) {
        throw ParseError("perf line " + std::to_string(line_no) +
                         ": bad run time");
      }
    }
    if (fields.size() > 4 && !fields[4].empty()) {
      rec.pct_running = detail::parse_f64(fields[4]);
      if (!rec.pct_running) {
        throw ParseError("perf line " + std::to_string(line_no) +
                         ": bad running percentage");
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::string write_perf_csv(const std::vector<PerfRecord>& records,
                                  char delimiter = ',') {
  std::ostringstream os;
  for (const PerfRecord& r : records) {
    if (r.value) {
      os << *r.value;
    } else {
      os << "<not counted>";
    }
    os << delimiter << r.unit << delimiter << r.event;
    if (r.run_time_ns || r.pct_running) {
      os << delimiter;
      if (r.run_time_ns) os << *r.run_time_ns;
      if (r.pct_running) os << delimiter << format_double(*r.pct_running);
    }
    os << "\n";
  }
  return os.str();
}

// The first eight jiffy columns of a per-cpu /proc/stat line.
struct CpuJiffies {
  std::uint64_t user = 0, nice = 0, system = 0, idle = 0;
  std::uint64_t iowait = 0, irq = 0, softirq = 0, steal = 0;

  std::uint64_t total() const {
    return user + nice + system + idle + iowait + irq + softirq + steal;
  }
  // iowait counts as idle-like (the core is not executing the encoder);
  // steal counts as busy.
  std::uint64_t idle_like() const { return idle + iowait; }

  friend bool operator==(const CpuJiffies&, const CpuJiffies&) = default;
};

struct ProcStatSample {
  double timestamp_s = 0.0;
  std::map<std::string, CpuJiffies> per_cpu;
};

// One /proc/stat snapshot. Per-cpu lines ("cpu0", "cpu7", ...) are captured;
// the aggregate "cpu" line and every other row (intr, ctxt, ...) are ignored.
inline ProcStatSample parse_procstat(std::string_view text,
                                     double timestamp_s) {
  ProcStatSample sample;
  sample.timestamp_s = timestamp_s;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    std::string_view line = text.substr(
        start, nl == std::string_view::npos ? text.size() - start : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (line.size() < 4 || line.substr(0, 3) != "cpu" ||
        !std::isdigit(static_cast<unsigned char>(line[3]))) {
      continue;
    }
    std::istringstream ls{std::string(line)};
    std::string label;
    CpuJiffies j;
    ls >> label >> j.user >> j.nice >> j.system >> j.idle >> j.iowait >>
        j.irq >> j.softirq >> j.steal;
    if (ls.fail()) {
      throw ParseError("procstat: malformed line '" + std::string(line) + "'");
    }
    sample.per_cpu[label] = j;
  }
  if (sample.per_cpu.empty()) {
    throw ParseError("procstat: no per-cpu lines found");
  }
  return sample;
}

// Trace file format: repeated snapshots, each introduced by a line
// "=== <timestamp_s> ===" followed by raw /proc/stat content.
inline std::vector<ProcStatSample> read_trace(std::istream& is) {
  std::vector<ProcStatSample> samples;
  std::string line;
  std::optional<double> ts;
  std::string body;
  auto flush = [&] {
    if (ts) {
      samples.push_back(parse_procstat(body, *ts));
      body.clear();
    }
  };
  while (std::getline(is, line)) {
    if (line.size() > 8 && line.starts_with("=== ") && line.ends_with(" ===")) {
      flush();
      const std::string stamp = line.substr(4, line.size() - 8);
      const auto parsed = detail::parse_f64(stamp);
      if (!parsed) {
        throw ParseError("trace: bad timestamp line '" + line + "'");
      }
      ts = *parsed;
    } else if (ts) {
      body += line;
      body += '\n';
    } else if (!line.empty()) {
      throw ParseError("trace: content before first '=== <ts> ===' header");
    }
  }
  flush();
  if (samples.empty()) throw DataError("trace: no snapshots");
  return samples;
}

inline void write_trace(const std::vector<ProcStatSample>& samples,
                        std::ostream& os) {
  for (const ProcStatSample& s : samples) {
    os << "=== " << format_double(s.timestamp_s) << " ===\n";
    for (const auto& [label, j] : s.per_cpu) {
      os << label << " " << j.user << " " << j.nice << " " << j.system << " "
         << j.idle << " " << j.iowait << " " << j.irq << " " << j.softirq
         << " " << j.steal << "\n";
    }
  }
}

struct ActivityInterval {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string core;
  double mean_busy = 0.0;

  double duration() const { return end_s - start_s; }
};

// Busy fraction per sample gap is 1 - (d_idle + d_iowait)/d_total; maximal
// runs of gaps above the threshold that last at least min_duration_s become
// intervals. Counter regressions are rejected, never clamped.
inline std::vector<ActivityInterval> segment_activity(
    const std::vector<ProcStatSample>& samples, const std::string& core,
    double busy_threshold = 0.8, double min_duration_s = 2.0) {
  if (samples.size() < 2) {
    throw DataError("segment_activity: need at least 2 samples");
  }
  if (!(busy_threshold > 0.0 && busy_threshold < 1.0)) {
    throw ConfigError("segment_activity: threshold must be in (0,1)");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].per_cpu.count(core)) {
      throw DataError("segment_activity: core '" + core +
                      "' missing from sample " + std::to_string(i));
    }
    if (i > 0 && samples[i].timestamp_s <= samples[i - 1].timestamp_s) {
      throw DataError("segment_activity: timestamps not strictly increasing");
    }
  }

  struct Gap {
    double start, end, busy;
    std::uint64_t d_total, d_idle;
  };
  std::vector<Gap> gaps;
  gaps.reserve(samples.size() - 1);
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const CpuJiffies& a = samples[i].per_cpu.at(core);
    const CpuJiffies& b = samples[i + 1].per_cpu.at(core);
    const std::array<std::pair<std::uint64_t, std::uint64_t>, 8> cols{{
        {a.user, b.user},
        {a.nice, b.nice},
        {a.system, b.system},
        {a.idle, b.idle},
        {a.iowait, b.iowait},
        {a.irq, b.irq},
        {a.softirq, b.softirq},
        {a.steal, b.steal},
    }};
    for (const auto& [prev, next] : cols) {
      if (next < prev) {
        throw DataError("segment_activity: jiffy counter decreased on " +
                        core);
      }
    }
    const std::uint64_t d_total = b.total() - a.total();
    const std::uint64_t d_idle = b.idle_like() - a.idle_like();
    const double busy =
        d_total > 0
            ? 1.0 - static_cast<double>(d_idle) / static_cast<double>(d_total)
            : 0.0;
    gaps.push_back({samples[i].timestamp_s, samples[i + 1].timestamp_s, busy,
                    d_total, d_idle});
  }

  std::vector<ActivityInterval> intervals;
  std::size_t run_start = 0;
  bool in_run = false;
  auto close_run = [&](std::size_t run_end) {
    const double start = gaps[run_start].start;
    const double end = gaps[run_end].end;
    if (end - start < min_duration_s) return;
    std::uint64_t total = 0, idle = 0;
    for (std::size_t k = run_start; k <= run_end; ++k) {
      total += gaps[k].d_total;
      idle += gaps[k].d_idle;
    }
    const double mean_busy =
        total > 0 ? 1.0 - static_cast<double>(idle) / static_cast<double>(total)
                  : 0.0;
    intervals.push_back({start, end, core, mean_busy});
  };
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    if (gaps[i].busy > busy_threshold) {
      if (!in_run) {
        run_start = i;
        in_run = true;
      }
    } else if (in_run) {
      close_run(i - 1);
      in_run = false;
    }
  }
  if (in_run) close_run(gaps.size() - 1);
  return intervals;
}

// Interval duration is the Tier-1 time feature; matching counter records sum
// into the Tier-2 feature.
inline Observation to_observation(const std::vector<PerfRecord>& records,
                                  const ActivityInterval& interval,
                                  const std::string& llc_event) {
  bool found = false;
  double sum = 0.0;
  for (const PerfRecord& r : records) {
    if (r.event != llc_event) continue;
    if (!r.value) {
      throw DataError("to_observation: event '" + llc_event +
                      "' was not counted; trial unusable");
    }
    found = true;
    sum += static_cast<double>(*r.value);
  }
  if (!found) {
    throw DataError("to_observation: no record for event '" + llc_event + "'");
  }
  return {interval.duration(), sum};
}

// --- Observation CSV (header: trial,time_s,llc_misses,label) ---

struct ObservationRow {
  int trial = 0;
  Observation obs;
  std::string label;  // may be empty
};

inline std::string write_observations(const std::vector<ObservationRow>& rows) {
  std::ostringstream os;
  os << "trial,time_s,llc_misses,label\n";
  for (const ObservationRow& r : rows) {
    os << r.trial << "," << format_double(r.obs.time_s) << ","
       << format_double(r.obs.llc_misses) << "," << r.label << "\n";
  }
  return os.str();
}

inline std::vector<ObservationRow> read_observations(std::string_view text) {
  std::vector<ObservationRow> rows;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    std::string_view line = text.substr(
        start, nl == std::string_view::npos ? text.size() - start : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "trial,time_s,llc_misses,label") {
        throw ParseError("observations: unexpected header '" +
                         std::string(line) + "'");
      }
      continue;
    }
    const auto fields = detail::split_fields(line, ',');
    if (fields.size() != 4) {
      throw ParseError("observations line " + std::to_string(line_no) +
                       ": expected 4 fields");
    }
    ObservationRow row;
    const auto trial = detail::parse_u64(fields[0]);
    const auto t = detail::parse_f64(fields[1]);
    const auto c = detail::parse_f64(fields[2]);
    if (!trial || !t || !c) {
      throw ParseError("observations line " + std::to_string(line_no) +
                       ": bad numeric field");
    }
    row.trial = static_cast<int>(*trial);
    row.obs = {*t, *c};
    row.label = std::string(fields[3]);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("observations: no rows");
  return rows;
}

// Synthesizes the telemetry an attacker would record for a batch of trials:
// one /proc/stat trace with a busy burst per trial on `core` (1 Hz sampling,
// 100 jiffies per second) and one perf record per trial. Burst lengths are
// the trial times rounded to whole sampling periods.
struct SyntheticTelemetry {
  std::vector<ProcStatSample> trace;
  std::vector<PerfRecord> perf;
};

inline SyntheticTelemetry synthesize_telemetry(
    const std::vector<Observation>& trials, const std::string& core = "cpu4",
    const std::string& llc_event = "LLC-load-misses",
    int idle_gap_samples = 3) {
  SyntheticTelemetry out;
  const std::uint64_t jiffies_per_s = 100;
  std::map<std::string, CpuJiffies> state;
  state[core] = {};
  state["cpu5"] = {};
  double now = 0.0;
  auto push = [&] {
    ProcStatSample s;
    s.timestamp_s = now;
    s.per_cpu = state;
    out.trace.push_back(std::move(s));
  };
  auto advance = [&](bool busy) {
    if (busy) {
      state[core].user += jiffies_per_s;
    } else {
      state[core].idle += jiffies_per_s;
    }
    state["cpu5"].idle += jiffies_per_s;
    now += 1.0;
    push();
  };
  push();
  for (int k = 0; k < idle_gap_samples; ++k) advance(false);
  for (const Observation& obs : trials) {
    const int busy_gaps =
        std::max(1, static_cast<int>(std::llround(obs.time_s)));
    for (int k = 0; k < busy_gaps; ++k) advance(true);
    for (int k = 0; k < idle_gap_samples; ++k) advance(false);
    PerfRecord rec;
    rec.value = static_cast<std::uint64_t>(std::llround(obs.llc_misses));
    rec.event = llc_event;
    rec.run_time_ns = static_cast<std::uint64_t>(obs.time_s * 1e9);
    rec.pct_running = 100.0;
    out.perf.push_back(std::move(rec));
  }
  return out;
}

}  // namespace sidechan::telemetry
