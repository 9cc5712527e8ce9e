#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "lungsvm/metrics.hpp"

namespace lungsvm::cli {

inline constexpr std::string_view kReportHeader =
    "run_id,task,tp,fp,fn,tn,precision,recall,f1,accuracy,specificity,wall_time_seconds";

/// One CSV record of a metric report. Ratios print with 4 decimals, wall time with 3.
struct ReportRow {
  std::string run_id;
  std::string task;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  double specificity = 0.0;
  double wall_time_seconds = 0.0;

  bool operator==(const ReportRow&) const = default;
};

ReportRow make_row(std::string run_id, std::string task, const pipeline::MetricReport& report,
                   double wall_time_seconds);

/// Throws FormatError when a field contains a comma or newline.
std::string format_row(const ReportRow& row);

/// Inverse of format_row. Throws FormatError on a malformed record.
ReportRow parse_row(std::string_view line);

/// Runs one subcommand; `args` excludes the program name.
/// Returns 0 on success, 1 on usage errors, 2 on runtime errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lungsvm::cli
