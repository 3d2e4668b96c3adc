#include "dfl/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dfl {

bool row_finite(const TraceRow& r) {
  for (double v : {r.lagrangian, r.dw, r.dwk_max, r.dlambda_max, r.consensus_gap, r.objective,
                   r.slack_lemma1, r.slack_lemma3, r.lemma4_margin}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, MetricsFormat format)
    : format_(format), path_(path.string()) {
  file_ = path_ == "-" ? stdout : std::fopen(path_.c_str(), "w");
  if (file_ == nullptr) throw IoError("cannot open metrics file " + path_);
  if (format_ == MetricsFormat::csv) {
    bool first = true;
    for (const char* col : kTraceColumns) {
      std::fprintf(file_, first ? "%s" : ",%s", col);
      first = false;
    }
    std::fputc('\n', file_);
  }
  if (std::fflush(file_) != 0) throw IoError("cannot write metrics file " + path_);
}

MetricsWriter::~MetricsWriter() {
  if (file_ != nullptr && file_ != stdout) std::fclose(file_);
}

void MetricsWriter::write(const TraceRow& r) {
  const double values[] = {r.lagrangian,    r.dw,        r.dwk_max,      r.dlambda_max,
                           r.consensus_gap, r.objective, r.slack_lemma1, r.slack_lemma3,
                           r.lemma4_margin};
  int rc = 0;
  if (format_ == MetricsFormat::csv) {
    rc = std::fprintf(file_, "%lld", static_cast<long long>(r.t));
    for (double v : values) rc = rc < 0 ? rc : std::fprintf(file_, ",%.17g", v);
  } else {
    rc = std::fprintf(file_, "{\"%s\":%lld", kTraceColumns[0], static_cast<long long>(r.t));
    for (std::size_t i = 0; i < std::size(values) && rc >= 0; ++i) {
      rc = std::fprintf(file_, ",\"%s\":%.17g", kTraceColumns[i + 1], values[i]);
    }
    if (rc >= 0) rc = std::fputc('}', file_);
  }
  if (rc < 0 || std::fputc('\n', file_) == EOF || std::fflush(file_) != 0) {
    throw IoError("cannot write metrics file " + path_);
  }
}

std::vector<std::vector<double>> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read metrics file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    if (line.front() == '{') {
      const auto obj = nlohmann::json::parse(line);
      for (const char* col : kTraceColumns) row.push_back(obj.at(col).get<double>());
    } else {
      if (!header_seen) {
        header_seen = true;
        continue;
      }
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
      if (row.size() != std::size(kTraceColumns)) {
        throw IoError("malformed metrics row in " + path.string());
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace dfl
