#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bufsched {

struct MetricsRow {
  std::string scheduler;
  std::uint64_t step = 0;  // 1-based decision sequence number
  int query_id = 0;
  std::int64_t hits = 0;
  std::int64_t misses = 0;
  double hit_ratio = 0.0;
  double cum_cost = 0.0;  // non-decreasing simulated cost
};

struct SummaryRow {
  std::string scheduler;
  std::uint64_t checkpoint = 0;  // training queries scheduled so far
  double avg_hit_ratio = 0.0;
  double total_cost = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "scheduler,step,query_id,hits,misses,hit_ratio,cum_cost";
inline constexpr const char* kSummaryHeader =
    "scheduler,checkpoint,avg_hit_ratio,total_cost";

namespace detail {

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open output file " + path);
  return os;
}

inline std::ifstream open_for_read(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open input file " + path);
  return is;
}

}  // namespace detail

inline void write_metrics_csv(std::ostream& os,
                              std::span<const MetricsRow> rows) {
  os << kMetricsHeader << '\n';
  for (const MetricsRow& r : rows) {
    os << r.scheduler << ',' << r.step << ',' << r.query_id << ',' << r.hits
       << ',' << r.misses << ',' << detail::fixed6(r.hit_ratio) << ','
       << detail::fixed6(r.cum_cost) << '\n';
  }
}

inline void write_metrics_csv(const std::string& path,
                              std::span<const MetricsRow> rows) {
  auto os = detail::open_for_write(path);
  write_metrics_csv(os, rows);
  if (!os) throw std::runtime_error("failed writing " + path);
}

inline std::vector<MetricsRow> read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kMetricsHeader) {
    throw std::runtime_error("bad metrics CSV header");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 7) throw std::runtime_error("bad metrics CSV row");
    MetricsRow r;
    r.scheduler = f[0];
    r.step = std::stoull(f[1]);
    r.query_id = std::stoi(f[2]);
    r.hits = std::stoll(f[3]);
    r.misses = std::stoll(f[4]);
    r.hit_ratio = std::stod(f[5]);
    r.cum_cost = std::stod(f[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  auto is = detail::open_for_read(path);
  return read_metrics_csv(is);
}

inline void write_summary_csv(std::ostream& os,
                              std::span<const SummaryRow> rows) {
  os << kSummaryHeader << '\n';
  for (const SummaryRow& r : rows) {
    os << r.scheduler << ',' << r.checkpoint << ','
       << detail::fixed6(r.avg_hit_ratio) << ',' << detail::fixed6(r.total_cost)
       << '\n';
  }
}

inline void write_summary_csv(const std::string& path,
                              std::span<const SummaryRow> rows) {
  auto os = detail::open_for_write(path);
  write_summary_csv(os, rows);
  if (!os) throw std::runtime_error("failed writing " + path);
}

inline std::vector<SummaryRow> read_summary_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kSummaryHeader) {
    throw std::runtime_error("bad summary CSV header");
  }
  std::vector<SummaryRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 4) throw std::runtime_error("bad summary CSV row");
    SummaryRow r;
    r.scheduler = f[0];
    r.checkpoint = std::stoull(f[1]);
    r.avg_hit_ratio = std::stod(f[2]);
    r.total_cost = std::stod(f[3]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<SummaryRow> read_summary_csv(const std::string& path) {
  auto is = detail::open_for_read(path);
  return read_summary_csv(is);
}

}  // namespace bufsched
