#pragma once

#include <iomanip>

#include "config.hpp"
#include "metrics.hpp"

namespace mdsam {

// CSV emission for metric reports and threshold curves. Every file carries a
// header row and a provenance comment with the config hash.

inline void write_metric_report_csv(const MetricReport& report, const std::string& path,
                                    std::uint64_t cfg_hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << "# config_hash=" << hash_hex(cfg_hash) << "\n";
  out << "# warnings=" << report.unmatched.size() << " empty_gt=" << report.empty_gt_count << "\n";
  for (const auto& u : report.unmatched) out << "# unmatched: " << u << "\n";
  out << "id,mae,f_max,f_mean,s_measure,e_measure,weighted_f,empty_gt\n";
  out << std::setprecision(10);
  for (const auto& m : report.per_image) {
    out << m.id << "," << m.mae << "," << m.f_max << "," << m.f_mean << "," << m.s << "," << m.e
        << "," << m.wf << "," << (m.empty_gt ? 1 : 0) << "\n";
  }
  out << "aggregate," << report.mae << "," << report.f_max << "," << report.f_mean << ","
      << report.s << "," << report.e << "," << report.wf << "," << report.empty_gt_count << "\n";
}

inline void write_curves_csv(const MetricReport& report, const std::string& path,
                             std::uint64_t cfg_hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write curves: " + path);
  out << "# config_hash=" << hash_hex(cfg_hash) << "\n";
  out << "threshold,precision,recall,f\n";
  out << std::setprecision(10);
  for (int t = 0; t < kThresholds; ++t) {
    out << t << "," << report.precision[static_cast<size_t>(t)] << ","
        << report.recall[static_cast<size_t>(t)] << "," << report.f[static_cast<size_t>(t)]
        << "\n";
  }
}

struct CurveTable {
  std::vector<double> threshold, precision, recall, f;
};

// Reads a curves CSV back (comment lines ignored). Throws on malformed rows.
inline CurveTable read_curves_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open curves CSV: " + path);
  CurveTable table;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line.rfind("threshold,", 0) != 0) {
        throw std::runtime_error("malformed curves CSV (bad header): " + path);
      }
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(row, cell, ',')) {
      size_t used = 0;
      double v = 0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw std::runtime_error("malformed curves CSV (non-numeric cell '" + cell + "'): " + path);
      }
      if (used != cell.size()) {
        throw std::runtime_error("malformed curves CSV (trailing junk in '" + cell + "'): " + path);
      }
      vals.push_back(v);
    }
    if (vals.size() != 4) {
      throw std::runtime_error("malformed curves CSV (expected 4 columns): " + path);
    }
    table.threshold.push_back(vals[0]);
    table.precision.push_back(vals[1]);
    table.recall.push_back(vals[2]);
    table.f.push_back(vals[3]);
  }
  if (!header_seen || table.threshold.empty()) {
    throw std::runtime_error("malformed curves CSV (no data rows): " + path);
  }
  return table;
}

// Parses a metric report CSV back into the aggregate fields (per-image rows
// plus the trailing aggregate row).
inline MetricReport read_metric_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report CSV: " + path);
  MetricReport report;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw std::runtime_error("malformed report CSV: " + path);
    if (cells[0] == "aggregate") {
      report.mae = std::stod(cells[1]);
      report.f_max = std::stod(cells[2]);
      report.f_mean = std::stod(cells[3]);
      report.s = std::stod(cells[4]);
      report.e = std::stod(cells[5]);
      report.wf = std::stod(cells[6]);
      report.empty_gt_count = std::stoi(cells[7]);
    } else {
      PerImageMetrics m;
      m.id = cells[0];
      m.mae = std::stod(cells[1]);
      m.f_max = std::stod(cells[2]);
      m.f_mean = std::stod(cells[3]);
      m.s = std::stod(cells[4]);
      m.e = std::stod(cells[5]);
      m.wf = std::stod(cells[6]);
      m.empty_gt = cells[7] == "1";
      report.per_image.push_back(std::move(m));
      ++report.evaluated;
    }
  }
  return report;
}

}  // namespace mdsam
