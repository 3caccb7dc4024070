#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace margin {

/// Linear interpolation between order statistics at zero-based position p (N - 1).
double quantile(std::span<const double> sorted_samples, double level);

/// Labelled summary of one sample: min, max, mean, then one entry per level.
class QuantileTable {
public:
    using Entry = std::pair<std::string, double>;

    QuantileTable() = default;
    explicit QuantileTable(std::vector<Entry> entries) : entries_(std::move(entries)) {}

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }
    /// Throws std::out_of_range for unknown labels.
    double at(const std::string& label) const;

private:
    std::vector<Entry> entries_;
};

/// Label for a quantile level: 0.2 -> "q20", 0.975 -> "q97.5".
std::string quantile_label(double level);

QuantileTable quantile_analysis(std::span<const double> samples, std::span<const double> levels);

/// Levels observed per stock: 0.20 .. 0.90 by 0.10, then 0.95.
std::span<const double> per_stock_levels();
/// Columns of the cross-stock summary: 0.70, 0.80, 0.90, 0.95.
std::span<const double> summary_levels();
/// Columns of the margin-call count table: 0.30, 0.50, 0.80, 0.90, 0.95, 0.99.
std::span<const double> call_count_levels();

/// Cross-sectional view: every statistic of a set of per-stock QuantileTables
/// (rows) summarised by min, max, mean and `levels` (columns).
struct SummaryTable {
    std::vector<std::string> columns;
    std::vector<std::pair<std::string, QuantileTable>> rows;

    bool empty() const noexcept { return rows.empty(); }
};

/// Row names follow the per-stock labels with min/max spelled out as
/// "minimum"/"maximum". All inputs must carry the same labels.
SummaryTable summarize(std::span<const QuantileTable> per_stock, std::span<const double> levels);

}  // namespace margin
