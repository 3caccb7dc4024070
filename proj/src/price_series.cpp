#include "margin/price_series.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "margin/errors.hpp"

namespace margin {

namespace {

bool parse_uint(std::string_view text, unsigned& out) {
    if (text.empty()) return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
}

// Uniform double in [0,1) from the top 53 bits; independent of the standard
// library's distribution implementations.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

bool parse_iso_date(std::string_view text, Date& out) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
    unsigned y = 0, m = 0, d = 0;
    if (!parse_uint(text.substr(0, 4), y) || !parse_uint(text.substr(5, 2), m) ||
        !parse_uint(text.substr(8, 2), d))
        return false;
    Date date{std::chrono::year{static_cast<int>(y)}, std::chrono::month{m}, std::chrono::day{d}};
    if (!date.ok()) return false;
    out = date;
    return true;
}

std::string format_iso_date(const Date& date) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

PriceSeries::PriceSeries(std::string ticker, std::vector<Observation> observations)
    : ticker_(std::move(ticker)) {
    dates_.reserve(observations.size());
    closes_.reserve(observations.size());
    for (std::size_t i = 0; i < observations.size(); ++i) {
        const auto& obs = observations[i];
        if (!(obs.close > 0.0) || !std::isfinite(obs.close))
            throw ValidationError("non-positive close on " + format_iso_date(obs.date));
        if (i > 0 && !(observations[i - 1].date < obs.date)) {
            if (observations[i - 1].date == obs.date)
                throw ValidationError("duplicate date " + format_iso_date(obs.date));
            throw ValidationError("dates not increasing at " + format_iso_date(obs.date));
        }
        dates_.push_back(obs.date);
        closes_.push_back(obs.close);
    }
}

PriceSeries PriceSeries::from_unsorted(std::string ticker, std::vector<Observation> observations) {
    std::stable_sort(observations.begin(), observations.end(),
                     [](const Observation& a, const Observation& b) { return a.date < b.date; });
    return PriceSeries(std::move(ticker), std::move(observations));
}

std::size_t PriceSeries::index_of(const Date& date) const {
    auto it = std::lower_bound(dates_.begin(), dates_.end(), date);
    if (it == dates_.end() || *it != date) return size();
    return static_cast<std::size_t>(it - dates_.begin());
}

PriceWindow window(const PriceSeries& series, std::size_t end_index, std::size_t depth) {
    if (depth == 0) throw ValidationError("window depth must be positive");
    if (end_index >= series.size())
        throw ValidationError("window end index " + std::to_string(end_index) +
                              " outside series of length " + std::to_string(series.size()));
    if (end_index + 1 < depth)
        throw InsufficientHistory(depth, end_index + 1,
                                  "window of depth " + std::to_string(depth) + " ending at index " +
                                      std::to_string(end_index));
    auto closes = series.closes();
    PriceWindow w;
    w.prices.assign(closes.begin() + static_cast<std::ptrdiff_t>(end_index + 1 - depth),
                    closes.begin() + static_cast<std::ptrdiff_t>(end_index + 1));
    w.end_index = end_index;
    w.depth = depth;
    return w;
}

PriceSeries parse_price_csv(std::istream& in, std::string ticker) {
    std::string line;
    std::size_t line_no = 0;
    std::size_t date_col = 0, close_col = 0, width = 0;
    bool have_header = false;
    std::vector<Observation> rows;

    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = trim(line);
        if (line_no == 1 && view.size() >= 3 && static_cast<unsigned char>(view[0]) == 0xEF &&
            static_cast<unsigned char>(view[1]) == 0xBB && static_cast<unsigned char>(view[2]) == 0xBF)
            view.remove_prefix(3);
        if (view.empty()) continue;
        auto fields = split_fields(view);
        if (!have_header) {
            bool found_date = false, found_close = false;
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (fields[i] == "date") date_col = i, found_date = true;
                else if (fields[i] == "close") close_col = i, found_close = true;
            }
            if (!found_date || !found_close)
                throw ParseError(line_no, "expected header with columns date,close");
            width = std::max(date_col, close_col) + 1;
            have_header = true;
            continue;
        }
        if (fields.size() < width) throw ParseError(line_no, "too few columns");
        Observation obs{};
        if (!parse_iso_date(fields[date_col], obs.date))
            throw ParseError(line_no, "malformed date '" + std::string(fields[date_col]) + "'");
        auto text = fields[close_col];
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), obs.close);
        if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(obs.close))
            throw ParseError(line_no, "malformed close '" + std::string(text) + "'");
        if (!(obs.close > 0.0))
            throw ValidationError("line " + std::to_string(line_no) + ": non-positive close " +
                                  std::string(text));
        rows.push_back(obs);
    }
    if (!have_header) throw ParseError(line_no == 0 ? 1 : line_no, "missing header date,close");

    // Duplicates are reported against the later line in file order.
    std::vector<std::size_t> order(rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rows[a].date < rows[b].date; });
    for (std::size_t i = 1; i < order.size(); ++i)
        if (rows[order[i]].date == rows[order[i - 1]].date)
            throw ValidationError("duplicate date " + format_iso_date(rows[order[i]].date));
    return PriceSeries::from_unsorted(std::move(ticker), std::move(rows));
}

PriceSeries load_price_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open price file " + path.string());
    return parse_price_csv(in, path.stem().string());
}

void write_price_csv(const PriceSeries& series, std::ostream& out) {
    out << "date,close\n";
    std::array<char, 64> buf{};
    for (std::size_t i = 0; i < series.size(); ++i) {
        auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), series.close(i));
        out << format_iso_date(series.date(i)) << ',' << std::string_view(buf.data(), ptr - buf.data())
            << '\n';
    }
}

void write_price_csv(const PriceSeries& series, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    write_price_csv(series, out);
    if (!out) throw IoError("write failed for " + path.string());
}

void validate(const SyntheticSpec& spec) {
    if (!(spec.start_price > 0.0)) throw ValidationError("synthetic start price must be positive");
    if (spec.steps.empty()) throw ValidationError("synthetic step distribution is empty");
    double total = 0.0;
    for (const auto& s : spec.steps) {
        if (!(s.factor > 0.0)) throw ValidationError("synthetic step factors must be positive");
        if (!(s.probability >= 0.0)) throw ValidationError("synthetic step probability negative");
        total += s.probability;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw ValidationError("synthetic step probabilities must sum to 1");
    if (!spec.start_date.ok()) throw ValidationError("synthetic start date invalid");
}

PriceSeries generate_synthetic(const SyntheticSpec& spec) {
    validate(spec);
    using namespace std::chrono;

    std::vector<double> cumulative;
    double acc = 0.0;
    for (const auto& s : spec.steps) cumulative.push_back(acc += s.probability);

    std::mt19937_64 rng(spec.seed);
    std::vector<Observation> obs;
    obs.reserve(spec.length);

    sys_days day{spec.start_date};
    auto next_weekday = [](sys_days d) {
        do d += days{1};
        while (weekday{d} == Saturday || weekday{d} == Sunday);
        return d;
    };
    if (weekday{day} == Saturday || weekday{day} == Sunday) day = next_weekday(day);

    double price = spec.start_price;
    for (std::size_t i = 0; i < spec.length; ++i) {
        if (i > 0) {
            double u = unit_uniform(rng) * acc;
            auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
            std::size_t k = std::min<std::size_t>(it - cumulative.begin(), spec.steps.size() - 1);
            price *= spec.steps[k].factor;
            day = next_weekday(day);
        }
        obs.push_back({year_month_day{day}, price});
    }
    return PriceSeries(spec.ticker, std::move(obs));
}

}  // namespace margin
