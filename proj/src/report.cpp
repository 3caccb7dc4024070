#include "margin/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "margin/errors.hpp"

namespace margin {

ReportFormat parse_report_format(const std::string& text) {
    if (text == "json") return ReportFormat::Json;
    if (text == "csv") return ReportFormat::Csv;
    throw ValidationError("unknown output format '" + text + "' (expected json or csv)");
}

std::string format_decimal(double value) {
    if (!std::isfinite(value)) throw ValidationError("cannot emit a non-finite number");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", value);
    std::string s = buf;
    if (s == "-0.000000") s = "0.000000";
    return s;
}

Json to_json(const QuantileTable& table) {
    Json j = Json::object();
    for (const auto& [label, value] : table.entries()) j[label] = value;
    return j;
}

Json to_json(const SummaryTable& table) {
    Json rows = Json::object();
    for (const auto& [name, row] : table.rows) rows[name] = to_json(row);
    return Json{{"columns", table.columns}, {"rows", rows}};
}

Json to_json(const MarkovTestResult& r) {
    return Json{{"chi_square", r.chi_square},
                {"df", r.degrees_of_freedom},
                {"effective_states", r.effective_states},
                {"p_value", r.p_value}};
}

Json to_json(const CpnrResult& r) {
    return Json{{"cpnr", r.cpnr},
                {"prob_AB", r.prob_AB},
                {"prob_B", r.prob_B},
                {"per_day_call_probs", r.per_day_call_probs},
                {"per_day_loss_and_call", r.per_day_loss_and_call},
                {"survival_product", r.survival_product}};
}

Json to_json(const MarginSystem& s) {
    return Json{{"m", s.m}, {"w", s.w}, {"cpnr", s.cpnr_at_construction}};
}

Json to_json(const LoanOutcome& l) {
    Json j{{"start_date", format_iso_date(l.start_date)},
           {"start_index", l.start_index},
           {"horizon", l.horizon},
           {"p0", l.p0},
           {"q0", l.q0},
           {"system", to_json(l.system)},
           {"mode", to_string(l.mode)},
           {"margin_called", l.margin_called},
           {"return", l.return_amount},
           {"negative_return", l.negative_return}};
    if (l.fallback) j["fallback"] = true;
    if (l.tau) j["tau"] = *l.tau;
    if (l.tau_star) j["tau_star"] = *l.tau_star;
    if (l.cost) j["cost"] = *l.cost;
    if (l.num_calls) j["num_calls"] = *l.num_calls;
    return j;
}

Json to_json(const BacktestConfig& c) {
    return Json{{"depth", c.depth},
                {"group", c.group},
                {"horizon", c.horizon},
                {"loans", c.loans_per_stock},
                {"target", c.cpnr_target},
                {"r", c.r},
                {"mode", to_string(c.mode)},
                {"system", c.system.to_string()}};
}

CsvTable to_csv(const std::string& name, const QuantileTable& table) {
    CsvTable csv{name, {"statistic", "value"}, {}};
    for (const auto& [label, value] : table.entries()) csv.rows.push_back({label, format_decimal(value)});
    return csv;
}

CsvTable to_csv(const std::string& name, const SummaryTable& table) {
    CsvTable csv{name, {"statistic"}, {}};
    csv.header.insert(csv.header.end(), table.columns.begin(), table.columns.end());
    for (const auto& [row_name, row] : table.rows) {
        std::vector<std::string> cells{row_name};
        for (const auto& column : table.columns) cells.push_back(format_decimal(row.at(column)));
        csv.rows.push_back(std::move(cells));
    }
    return csv;
}

namespace {

template <typename Table>
void put_table(Json& j, Report& report, const std::string& key, const Table& table, const std::string& prefix = "") {
    if (table.empty()) return;
    j[key] = to_json(table);
    report.tables.push_back(to_csv(prefix + key, table));
}

Json stock_json(const StockReport& r, Report& report, const std::string& prefix) {
    Json j{{"ticker", r.ticker},
           {"config", to_json(r.config)},
           {"quantile_method", kQuantileMethod},
           {"num_loans", r.loans.size()},
           {"num_margin_calls", r.num_margin_calls},
           {"num_negative_returns", r.num_negative_returns},
           {"num_fallbacks", r.num_fallbacks},
           {"negative_return_frequency", r.negative_return_frequency},
           {"pass", pass_test(r, r.config.cpnr_target)}};
    Json loans = Json::array();
    for (const auto& l : r.loans) loans.push_back(to_json(l));
    j["loans"] = std::move(loans);
    put_table(j, report, "initial_margin_ratio", r.initial_margin_ratio, prefix);
    put_table(j, report, "maintenance_margin_ratio", r.maintenance_margin_ratio, prefix);
    put_table(j, report, "cost", r.cost, prefix);
    return j;
}

Json side_json(const SystemSummary& s, Report& report, const std::string& prefix) {
    Json j{{"num_margin_calls", s.num_margin_calls},
           {"num_negative_returns", s.num_negative_returns},
           {"negative_return_frequency", s.negative_return_frequency},
           {"pass", s.passed}};
    put_table(j, report, "cost", s.cost, prefix);
    put_table(j, report, "initial_margin_ratio", s.initial_margin_ratio, prefix);
    put_table(j, report, "maintenance_margin_ratio", s.maintenance_margin_ratio, prefix);
    return j;
}

Json comparison_json(const ComparisonReport& r, Report& report, const std::string& prefix) {
    Json rd = Json::object();
    for (const auto& [label, value] : r.cost_relative_difference) rd[label] = value;
    Json j{{"ticker", r.ticker},
           {"config", to_json(r.config)},
           {"quantile_method", kQuantileMethod},
           {"num_loans", r.num_loans},
           {"num_fallbacks", r.num_fallbacks},
           {"required", side_json(r.required, report, prefix + "required.")},
           {"deduced", side_json(r.deduced, report, prefix + "deduced.")},
           {"cost_relative_difference", rd}};
    CsvTable csv{prefix + "cost_relative_difference", {"statistic", "rd"}, {}};
    for (const auto& [label, value] : r.cost_relative_difference) csv.rows.push_back({label, format_decimal(value)});
    report.tables.push_back(std::move(csv));
    return j;
}

void dump(const Json& v, std::string& out) {
    switch (v.type()) {
        case Json::value_t::object: {
            out += '{';
            bool first = true;
            for (auto it = v.begin(); it != v.end(); ++it) {  // std::map: keys already sorted
                if (it.value().is_null()) continue;
                if (!first) out += ',';
                first = false;
                out += Json(it.key()).dump();
                out += ':';
                dump(it.value(), out);
            }
            out += '}';
            break;
        }
        case Json::value_t::array: {
            out += '[';
            bool first = true;
            for (const auto& e : v) {
                if (e.is_null()) continue;
                if (!first) out += ',';
                first = false;
                dump(e, out);
            }
            out += ']';
            break;
        }
        case Json::value_t::number_float:
            out += format_decimal(v.get<double>());
            break;
        default:
            out += v.dump();
            break;
    }
}

void flatten(const Json& v, const std::string& path, std::vector<std::vector<std::string>>& rows) {
    if (v.is_object()) {
        for (auto it = v.begin(); it != v.end(); ++it)
            flatten(it.value(), path.empty() ? it.key() : path + "." + it.key(), rows);
    } else if (v.is_array()) {
        for (std::size_t i = 0; i < v.size(); ++i) flatten(v[i], path + "." + std::to_string(i), rows);
    } else if (!v.is_null()) {
        std::string text;
        if (v.is_string()) text = v.get<std::string>();
        else dump(v, text);
        rows.push_back({path, text});
    }
}

std::string csv_cell(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
    std::string quoted = "\"";
    for (char c : cell) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    return quoted + '"';
}

void write_csv(const CsvTable& t, std::ostream& out) {
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_cell(cells[i]);
        out << '\n';
    };
    line(t.header);
    for (const auto& r : t.rows) line(r);
}

}  // namespace

Report make_report(const MarkovTestResult& result) { return Report{to_json(result), {}}; }

Report make_report(const CpnrResult& result) {
    Report r{to_json(result), {}};
    CsvTable csv{"cpnr_per_day", {"day", "call_prob", "loss_and_call_prob"}, {}};
    for (std::size_t t = 0; t < result.per_day_call_probs.size(); ++t)
        csv.rows.push_back({std::to_string(t + 1), format_decimal(result.per_day_call_probs[t]),
                            format_decimal(result.per_day_loss_and_call[t])});
    CsvTable totals{"cpnr", {"statistic", "value"},
                    {{"prob_B", format_decimal(result.prob_B)},
                     {"prob_AB", format_decimal(result.prob_AB)},
                     {"cpnr", format_decimal(result.cpnr)},
                     {"survival_product", format_decimal(result.survival_product)}}};
    r.tables = {std::move(totals), std::move(csv)};
    return r;
}

Report make_report(const StockReport& stock) {
    Report r;
    r.json = stock_json(stock, r, "");
    CsvTable loans{"loans",
                   {"start_date", "p0", "m", "w", "tau", "tau_star", "margin_called", "return", "negative_return",
                    "cost", "num_calls"},
                   {}};
    for (const auto& l : stock.loans)
        loans.rows.push_back({format_iso_date(l.start_date), format_decimal(l.p0), format_decimal(l.system.m),
                              format_decimal(l.system.w), l.tau ? std::to_string(*l.tau) : "",
                              l.tau_star ? std::to_string(*l.tau_star) : "", l.margin_called ? "1" : "0",
                              format_decimal(l.return_amount), l.negative_return ? "1" : "0",
                              l.cost ? format_decimal(*l.cost) : "", l.num_calls ? std::to_string(*l.num_calls) : ""});
    r.tables.insert(r.tables.begin(), std::move(loans));
    return r;
}

Report make_report(const ComparisonReport& comparison) {
    Report r;
    r.json = comparison_json(comparison, r, "");
    return r;
}

Report make_report(const CorpusBacktest& corpus) {
    Report r;
    Json stocks = Json::array();
    for (const auto& s : corpus.stocks) stocks.push_back(stock_json(s, r, s.ticker + "."));
    Json j{{"num_stocks", corpus.stocks.size()},
           {"stocks_passing", corpus.stocks_passing},
           {"quantile_method", kQuantileMethod},
           {"stocks", stocks}};
    put_table(j, r, "initial_margin_ratio", corpus.initial_margin_ratio);
    put_table(j, r, "maintenance_margin_ratio", corpus.maintenance_margin_ratio);
    put_table(j, r, "cost", corpus.cost);
    r.json = std::move(j);
    return r;
}

Report make_report(const CorpusComparison& corpus) {
    Report r;
    Json stocks = Json::array();
    for (const auto& s : corpus.stocks) stocks.push_back(comparison_json(s, r, s.ticker + "."));

    Json calls = Json::object();
    Json cost = Json::object();
    put_table(calls, r, "required", corpus.required_calls, "margin_calls.");
    put_table(calls, r, "deduced", corpus.deduced_calls, "margin_calls.");
    put_table(cost, r, "required", corpus.required_cost, "cost.");
    put_table(cost, r, "deduced", corpus.deduced_cost, "cost.");

    Json rd = Json::object();
    CsvTable rd_csv{"cost.relative_difference_q95", {"statistic", "rd"}, {}};
    for (const auto& [name, value] : corpus.cost_relative_difference) {
        rd[name] = value;
        rd_csv.rows.push_back({name, format_decimal(value)});
    }
    r.tables.push_back(std::move(rd_csv));
    cost["relative_difference_q95"] = rd;

    Json j{{"num_stocks", corpus.stocks.size()},
           {"quantile_method", kQuantileMethod},
           {"stocks", stocks},
           {"margin_calls", calls},
           {"cost", cost}};
    put_table(j, r, "initial_margin_ratio", corpus.deduced_initial_margin_ratio);
    put_table(j, r, "maintenance_margin_ratio", corpus.deduced_maintenance_margin_ratio);
    r.json = std::move(j);
    return r;
}

Report make_report(const std::vector<DynamicsPoint>& points) {
    Report r;
    Json list = Json::array();
    CsvTable csv{"dynamics", {"date", "p0", "m", "w", "cpnr"}, {}};
    std::size_t gaps = 0;
    for (const auto& p : points) {
        Json e{{"date", format_iso_date(p.date)}, {"index", p.index}, {"p0", p.p0}};
        if (p.system) {
            e["m"] = p.system->m;
            e["w"] = p.system->w;
            e["cpnr"] = p.system->cpnr_at_construction;
            csv.rows.push_back({format_iso_date(p.date), format_decimal(p.p0), format_decimal(p.system->m),
                                format_decimal(p.system->w), format_decimal(p.system->cpnr_at_construction)});
        } else {
            e["gap"] = true;
            ++gaps;
            csv.rows.push_back({format_iso_date(p.date), format_decimal(p.p0), "", "", ""});
        }
        list.push_back(std::move(e));
    }
    r.json = Json{{"dates", list}, {"num_gaps", gaps}};
    r.tables.push_back(std::move(csv));
    return r;
}

std::string canonical_json(const Json& value) {
    std::string out;
    dump(value, out);
    return out;
}

void write_report(const Report& report, ReportFormat format, std::ostream& out) {
    if (format == ReportFormat::Json) {
        out << canonical_json(report.json) << '\n';
        return;
    }
    if (report.tables.empty()) {
        CsvTable flat{"report", {"key", "value"}, {}};
        flatten(report.json, "", flat.rows);
        write_csv(flat, out);
        return;
    }
    for (std::size_t i = 0; i < report.tables.size(); ++i) {
        if (i > 0) out << '\n';
        if (report.tables.size() > 1) out << "# " << report.tables[i].name << '\n';
        write_csv(report.tables[i], out);
    }
}

void emit_report(const Report& report, ReportFormat format, const std::optional<std::filesystem::path>& dest) {
    if (!dest) {
        write_report(report, format, std::cout);
        std::cout.flush();
        return;
    }
    std::ostringstream buffer;
    write_report(report, format, buffer);
    std::ofstream out(*dest, std::ios::binary);
    if (!out) throw IoError("cannot write report to " + dest->string());
    out << buffer.str();
    out.flush();
    if (!out) throw IoError("failed writing report to " + dest->string());
}

}  // namespace margin
