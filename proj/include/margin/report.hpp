#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "margin/backtest.hpp"
#include "margin/cpnr.hpp"
#include "margin/markov.hpp"
#include "margin/optimizer.hpp"
#include "margin/quantiles.hpp"

namespace margin {

using Json = nlohmann::json;

enum class ReportFormat { Json, Csv };

ReportFormat parse_report_format(const std::string& text);

/// One flat CSV table.
struct CsvTable {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// A report ready for emission: a JSON document plus the tables its CSV form shows.
/// When `tables` is empty the CSV form lists every JSON leaf as `key,value`.
struct Report {
    Json json;
    std::vector<CsvTable> tables;
};

inline constexpr const char* kQuantileMethod =
    "linear interpolation between order statistics at zero-based position p*(N-1)";

Json to_json(const QuantileTable& table);
Json to_json(const SummaryTable& table);
Json to_json(const MarkovTestResult& result);
Json to_json(const CpnrResult& result);
Json to_json(const MarginSystem& system);
Json to_json(const LoanOutcome& loan);
Json to_json(const BacktestConfig& config);

/// `statistic,value`, one row per entry.
CsvTable to_csv(const std::string& name, const QuantileTable& table);
/// `statistic,min,max,mean,q70,q80,q90,q95`, one row per statistic.
CsvTable to_csv(const std::string& name, const SummaryTable& table);

Report make_report(const MarkovTestResult& result);
Report make_report(const CpnrResult& result);
Report make_report(const StockReport& report);
Report make_report(const ComparisonReport& report);
Report make_report(const CorpusBacktest& corpus);
Report make_report(const CorpusComparison& corpus);
Report make_report(const std::vector<DynamicsPoint>& points);

/// Sorted keys, numbers with six fixed decimals (integers verbatim), no nulls.
std::string canonical_json(const Json& value);

/// Format a double the way reports do.
std::string format_decimal(double value);

void write_report(const Report& report, ReportFormat format, std::ostream& out);

/// Writes to `dest`, or stdout when absent. Throws IoError when the file cannot be written.
void emit_report(const Report& report, ReportFormat format, const std::optional<std::filesystem::path>& dest);

}  // namespace margin
