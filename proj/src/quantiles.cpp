#include "margin/quantiles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "margin/errors.hpp"

namespace margin {

namespace {

constexpr std::array<double, 9> kPerStock{0.20, 0.30, 0.40, 0.50, 0.60, 0.70, 0.80, 0.90, 0.95};
constexpr std::array<double, 4> kSummary{0.70, 0.80, 0.90, 0.95};
constexpr std::array<double, 6> kCalls{0.30, 0.50, 0.80, 0.90, 0.95, 0.99};

std::string row_name(const std::string& label) {
    if (label == "min") return "minimum";
    if (label == "max") return "maximum";
    return label;
}

}  // namespace

double quantile(std::span<const double> sorted, double level) {
    if (sorted.empty()) throw ValidationError("quantile of an empty sample");
    if (!(level >= 0.0 && level <= 1.0)) throw ValidationError("quantile level outside [0,1]");
    const double position = level * static_cast<double>(sorted.size() - 1);
    const auto lower = static_cast<std::size_t>(std::floor(position));
    const std::size_t upper = std::min(lower + 1, sorted.size() - 1);
    const double fraction = position - static_cast<double>(lower);
    if (fraction == 0.0) return sorted[lower];
    return sorted[lower] + fraction * (sorted[upper] - sorted[lower]);
}

double QuantileTable::at(const std::string& label) const {
    for (const auto& [name, value] : entries_)
        if (name == label) return value;
    throw std::out_of_range("no statistic '" + label + "' in quantile table");
}

std::string quantile_label(double level) {
    const double percent = level * 100.0;
    const double rounded = std::round(percent);
    char buf[32];
    if (std::abs(percent - rounded) < 1e-9)
        std::snprintf(buf, sizeof buf, "q%02d", static_cast<int>(rounded));
    else
        std::snprintf(buf, sizeof buf, "q%g", percent);
    return buf;
}

QuantileTable quantile_analysis(std::span<const double> samples, std::span<const double> levels) {
    if (samples.empty()) throw ValidationError("quantile analysis of an empty sample");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());

    std::vector<QuantileTable::Entry> entries{{"min", sorted.front()}, {"max", sorted.back()}, {"mean", mean}};
    for (double level : levels) entries.emplace_back(quantile_label(level), quantile(sorted, level));
    return QuantileTable(std::move(entries));
}

std::span<const double> per_stock_levels() { return kPerStock; }
std::span<const double> summary_levels() { return kSummary; }
std::span<const double> call_count_levels() { return kCalls; }

SummaryTable summarize(std::span<const QuantileTable> per_stock, std::span<const double> levels) {
    SummaryTable table;
    if (per_stock.empty()) return table;
    table.columns = {"min", "max", "mean"};
    for (double level : levels) table.columns.push_back(quantile_label(level));

    const auto& labels = per_stock.front().entries();
    for (std::size_t r = 0; r < labels.size(); ++r) {
        std::vector<double> values;
        values.reserve(per_stock.size());
        for (const auto& t : per_stock) {
            if (t.entries().size() != labels.size() || t.entries()[r].first != labels[r].first)
                throw ValidationError("per-stock quantile tables carry different statistics");
            values.push_back(t.entries()[r].second);
        }
        table.rows.emplace_back(row_name(labels[r].first), quantile_analysis(values, levels));
    }
    return table;
}

}  // namespace margin
