#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace margin {

using Date = std::chrono::year_month_day;

/// Parses a strict ISO-8601 calendar date (YYYY-MM-DD). Returns false on failure.
bool parse_iso_date(std::string_view text, Date& out);
std::string format_iso_date(const Date& date);

struct Observation {
    Date date;
    double close;
};

/// Daily closing prices of one instrument, strictly increasing in date.
class PriceSeries {
public:
    PriceSeries() = default;
    /// Throws ValidationError unless dates strictly increase and every close is positive.
    PriceSeries(std::string ticker, std::vector<Observation> observations);

    /// Sorts by date first; duplicate dates are still rejected.
    static PriceSeries from_unsorted(std::string ticker, std::vector<Observation> observations);

    const std::string& ticker() const noexcept { return ticker_; }
    std::size_t size() const noexcept { return closes_.size(); }
    bool empty() const noexcept { return closes_.empty(); }

    std::span<const double> closes() const noexcept { return closes_; }
    std::span<const Date> dates() const noexcept { return dates_; }
    double close(std::size_t i) const { return closes_.at(i); }
    const Date& date(std::size_t i) const { return dates_.at(i); }

    /// Position of an exact trading date, or size() when absent.
    std::size_t index_of(const Date& date) const;

    friend bool operator==(const PriceSeries&, const PriceSeries&) = default;

private:
    std::string ticker_;
    std::vector<Date> dates_;
    std::vector<double> closes_;
};

/// The `depth` closes ending at `end_index` inclusive. The last element is the
/// transaction-date price P0.
struct PriceWindow {
    std::vector<double> prices;
    std::size_t end_index = 0;
    std::size_t depth = 0;

    double transaction_price() const { return prices.back(); }
};

PriceWindow window(const PriceSeries& series, std::size_t end_index, std::size_t depth);

/// Reads a `date,close` CSV. Extra columns are ignored; rows may be in any order.
PriceSeries load_price_csv(const std::filesystem::path& path);
PriceSeries parse_price_csv(std::istream& in, std::string ticker);

void write_price_csv(const PriceSeries& series, std::ostream& out);
void write_price_csv(const PriceSeries& series, const std::filesystem::path& path);

struct SyntheticStep {
    double factor;       // multiplicative daily move
    double probability;
};

struct SyntheticSpec {
    std::size_t length = 0;
    double start_price = 1.0;
    std::vector<SyntheticStep> steps;
    std::uint64_t seed = 0;
    std::string ticker = "SYNTH";
    Date start_date = Date{std::chrono::year{2000}, std::chrono::January, std::chrono::day{3}};
};

void validate(const SyntheticSpec& spec);

/// Multiplicative random walk on weekday dates. Bit-reproducible for a fixed seed.
PriceSeries generate_synthetic(const SyntheticSpec& spec);

}  // namespace margin
