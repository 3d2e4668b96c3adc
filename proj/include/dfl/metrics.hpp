#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "dfl/config.hpp"
#include "dfl/types.hpp"

namespace dfl {

/// One line of the per-iteration trace. Row t describes the move from state t to t+1.
struct TraceRow {
  Iteration t = 0;
  double lagrangian = 0.0;
  double dw = 0.0;
  double dwk_max = 0.0;
  double dlambda_max = 0.0;
  double consensus_gap = 0.0;
  double objective = 0.0;
  double slack_lemma1 = 0.0;
  double slack_lemma3 = 0.0;
  double lemma4_margin = 0.0;
};

inline constexpr const char* kTraceColumns[] = {
    "t",         "L",         "dw",           "dwk_max",      "dlambda_max",
    "consensus_gap", "objective", "slack_lemma1", "slack_lemma3", "lemma4_margin"};

bool row_finite(const TraceRow& row);

/// Streams rows to disk, flushing each one so a crash leaves a readable prefix.
class MetricsWriter {
 public:
  /// "-" writes to stdout.
  MetricsWriter(const std::filesystem::path& path, MetricsFormat format);
  ~MetricsWriter();
  MetricsWriter(const MetricsWriter&) = delete;
  MetricsWriter& operator=(const MetricsWriter&) = delete;

  void write(const TraceRow& row);

 private:
  std::FILE* file_ = nullptr;
  MetricsFormat format_;
  std::string path_;
};

/// Reads a csv or jsonl trace back. Each row holds the columns in kTraceColumns order.
std::vector<std::vector<double>> read_metrics(const std::filesystem::path& path);

}  // namespace dfl
