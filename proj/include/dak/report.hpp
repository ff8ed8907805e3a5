#pragma once

#include <string>

#include "json.hpp"

#include "dak/experiment.hpp"

namespace dak {

/// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite values.
std::string format_number(double value);

std::string rounds_csv(const MetricsLog& log);
std::string evals_csv(const MetricsLog& log);
nlohmann::json summary_json(const MetricsLog& log);

struct ReportPaths {
    std::string rounds;
    std::string evals;
    std::string summary;
};

/// Writes rounds.csv, evals.csv and summary.json under `directory` (created if missing).
ReportPaths emit_report(const MetricsLog& log, const std::string& directory);

}  // namespace dak
