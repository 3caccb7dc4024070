#include "margin/cli.hpp"

#include <charconv>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "margin/backtest.hpp"
#include "margin/cpnr.hpp"
#include "margin/errors.hpp"
#include "margin/markov.hpp"
#include "margin/optimizer.hpp"
#include "margin/price_series.hpp"
#include "margin/report.hpp"

namespace margin {

namespace {

struct CommonOptions {
    std::vector<std::string> prices;
    std::size_t depth = 800;
    std::size_t group = 25;
    std::size_t horizon = 30;
    double target = 0.05;
    double r = 0.0001;
    std::uint64_t seed = 42;
    std::string out;
    std::string format = "json";
    std::string date;
};

struct Options {
    CommonOptions common;
    // cpnr / margin
    std::optional<double> q0;
    std::optional<double> w;
    // dynamics
    std::size_t count = 1;
    // backtest / compare
    std::string mode = "default";
    std::string system = "deduced";
    std::size_t loans = 200;
    // synth
    std::size_t length = 1030;
    double start_price = 10.0;
    std::string steps = "0.99:0.5,1.01:0.5";
    std::string ticker = "SYNTH";
};

void add_prices(CLI::App* cmd, CommonOptions& c, bool many) {
    auto* opt = cmd->add_option("--prices", c.prices, many ? "Price CSV (date,close); repeat for several stocks"
                                                           : "Price CSV (date,close)");
    opt->required();
    if (!many) opt->expected(1);
}

void add_model(CLI::App* cmd, CommonOptions& c) {
    cmd->add_option("--depth", c.depth, "Closes used to fit the Markov chain")->capture_default_str();
    cmd->add_option("--group", c.group, "Distinct prices per state")->capture_default_str();
    cmd->add_option("--horizon", c.horizon, "Loan period in trading days")->capture_default_str();
}

void add_output(CLI::App* cmd, CommonOptions& c) {
    cmd->add_option("--out", c.out, "Write the report to this path instead of stdout");
    cmd->add_option("--format", c.format, "Report format: json or csv")
        ->capture_default_str()
        ->check(CLI::IsMember({"json", "csv"}));
}

void add_rate(CLI::App* cmd, CommonOptions& c) {
    cmd->add_option("--r", c.r, "One-day riskless (and loan) interest rate")->capture_default_str();
}

void add_target(CLI::App* cmd, CommonOptions& c) {
    cmd->add_option("--target", c.target, "CPNR target")->capture_default_str();
}

void add_date(CLI::App* cmd, CommonOptions& c, const std::string& help) {
    cmd->add_option("--date", c.date, help);
}

std::size_t resolve_date(const PriceSeries& series, const std::string& text) {
    if (series.empty()) throw ValidationError("price series is empty");
    if (text.empty()) return series.size() - 1;
    Date date{};
    if (!parse_iso_date(text, date)) throw ValidationError("malformed --date '" + text + "'");
    const auto index = series.index_of(date);
    if (index == series.size()) throw ValidationError("date " + text + " is not a trading day in " + series.ticker());
    return index;
}

std::vector<SyntheticStep> parse_steps(const std::string& text) {
    std::vector<SyntheticStep> steps;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        SyntheticStep step{};
        bool ok = colon != std::string::npos;
        if (ok) {
            const char* b = item.data();
            auto r1 = std::from_chars(b, b + colon, step.factor);
            auto r2 = std::from_chars(b + colon + 1, b + item.size(), step.probability);
            ok = r1.ec == std::errc{} && r1.ptr == b + colon && r2.ec == std::errc{} && r2.ptr == b + item.size();
        }
        if (!ok) throw ValidationError("malformed step '" + item + "' (expected factor:probability)");
        steps.push_back(step);
    }
    return steps;
}

class Runner {
public:
    Runner(const Options& o, std::ostream& out) : o_(o), c_(o.common), out_(out) {}

    void emit(const Report& report) const {
        const auto format = parse_report_format(c_.format);
        if (c_.out.empty()) write_report(report, format, out_);
        else emit_report(report, format, std::filesystem::path(c_.out));
    }

    void ingest() const {
        auto series = load_price_csv(c_.prices.front());
        Json j{{"ticker", series.ticker()}, {"num_observations", series.size()}};
        if (!series.empty()) {
            auto closes = series.closes();
            j["first_date"] = format_iso_date(series.date(0));
            j["last_date"] = format_iso_date(series.date(series.size() - 1));
            j["min_close"] = *std::min_element(closes.begin(), closes.end());
            j["max_close"] = *std::max_element(closes.begin(), closes.end());
        }
        emit(Report{j, {}});
    }

    void markov_test() const {
        auto series = load_price_csv(c_.prices.front());
        auto win = window(series, resolve_date(series, c_.date), c_.depth);
        auto chain = fit_chain(win.prices, c_.group);
        auto result = markov_chi_square_test(chain.counts);
        auto report = make_report(result);
        report.json["num_states"] = chain.space.size();
        report.json["end_date"] = format_iso_date(series.date(win.end_index));
        emit(report);
    }

    void cpnr_cmd() const {
        auto series = load_price_csv(c_.prices.front());
        auto win = window(series, resolve_date(series, c_.date), c_.depth);
        auto chain = fit_chain(win.prices, c_.group);
        auto query = make_query(chain.space, win.transaction_price(), *o_.q0, *o_.w, c_.r, c_.horizon);
        auto result = cpnr(chain.model, chain.space, query);
        auto report = make_report(result);
        report.json["p0"] = query.p0;
        report.json["q0"] = query.q0;
        report.json["w"] = query.w;
        report.json["state"] = query.state + 1;
        report.json["num_states"] = chain.space.size();
        report.json["date"] = format_iso_date(series.date(win.end_index));
        emit(report);
    }

    void margin_cmd() const {
        auto series = load_price_csv(c_.prices.front());
        auto win = window(series, resolve_date(series, c_.date), c_.depth);
        auto chain = fit_chain(win.prices, c_.group);
        chain.model.precompute(c_.horizon);
        const double p0 = win.transaction_price();
        auto config = OptimizerConfig::standard(c_.target, c_.r, c_.horizon);

        Json j{{"date", format_iso_date(series.date(win.end_index))}, {"p0", p0}, {"target", c_.target}};
        if (o_.q0) {
            j["q0"] = *o_.q0;
            auto choice = individualized_maintenance(chain.model, chain.space, p0, *o_.q0, config);
            j["feasible"] = choice.has_value();
            if (choice) {
                j["w_star"] = choice->w;
                j["cpnr"] = choice->cpnr;
            }
            emit(Report{j, {}});
            return;
        }
        auto set = indifference_set(chain.model, chain.space, p0, config);
        Json members = Json::array();
        CsvTable csv{"indifference_set", {"m", "w", "cpnr"}, {}};
        for (const auto& s : set) {
            members.push_back(to_json(s));
            csv.rows.push_back({format_decimal(s.m), format_decimal(s.w), format_decimal(s.cpnr_at_construction)});
        }
        j["indifference_set"] = members;
        j["feasible"] = !set.empty();
        if (auto best = deduce_margin_system(set)) j["deduced"] = to_json(*best);
        Report report{j, {}};
        if (auto best = deduce_margin_system(set))
            report.tables.push_back({"deduced",
                                     {"m", "w", "cpnr"},
                                     {{format_decimal(best->m), format_decimal(best->w),
                                       format_decimal(best->cpnr_at_construction)}}});
        report.tables.push_back(std::move(csv));
        emit(report);
    }

    void dynamics() const {
        auto series = load_price_csv(c_.prices.front());
        std::size_t start = c_.date.empty() ? c_.depth - 1 : resolve_date(series, c_.date);
        DynamicsConfig config{c_.depth, c_.group, OptimizerConfig::standard(c_.target, c_.r, c_.horizon)};
        emit(make_report(margin_dynamics(series, start, o_.count, config)));
    }

    BacktestConfig backtest_config() const {
        BacktestConfig config;
        config.depth = c_.depth;
        config.group = c_.group;
        config.horizon = c_.horizon;
        config.loans_per_stock = o_.loans;
        config.cpnr_target = c_.target;
        config.r = c_.r;
        config.mode = parse_loan_mode(o_.mode);
        config.system = SystemSource::parse(o_.system);
        return config;
    }

    void backtest() const {
        const auto config = backtest_config();
        std::vector<StockReport> reports;
        for (const auto& path : c_.prices) reports.push_back(run_out_of_sample(load_price_csv(path), config));
        if (reports.size() == 1) emit(make_report(reports.front()));
        else emit(make_report(summarize_backtests(std::move(reports), config.cpnr_target)));
    }

    void compare() const {
        const auto config = backtest_config();
        std::vector<ComparisonReport> reports;
        for (const auto& path : c_.prices) reports.push_back(compare_systems(load_price_csv(path), config));
        if (reports.size() == 1) emit(make_report(reports.front()));
        else emit(make_report(summarize_comparisons(std::move(reports))));
    }

    void synth() const {
        SyntheticSpec spec;
        spec.length = o_.length;
        spec.start_price = o_.start_price;
        spec.steps = parse_steps(o_.steps);
        spec.seed = c_.seed;
        spec.ticker = o_.ticker;
        auto series = generate_synthetic(spec);
        if (c_.out.empty()) write_price_csv(series, out_);
        else write_price_csv(series, std::filesystem::path(c_.out));
    }

private:
    const Options& o_;
    const CommonOptions& c_;
    std::ostream& out_;
};

void write_error(std::ostream& err, const std::string& kind, const std::string& message) {
    err << canonical_json(Json{{"error", Json{{"kind", kind}, {"message", message}}}}) << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    auto& c = o.common;
    CLI::App app{"Margin lending risk engine: Markov-chain CPNR, active margin systems and backtests",
                 "margin-engine"};
    app.require_subcommand(1);

    auto* ingest = app.add_subcommand("ingest", "Validate a price CSV and summarise it");
    add_prices(ingest, c, false);
    add_output(ingest, c);

    auto* markov = app.add_subcommand("markov-test", "Chi-square test of the Markov property on one window");
    add_prices(markov, c, false);
    add_model(markov, c);
    add_date(markov, c, "Window end date (default: last date)");
    add_output(markov, c);

    auto* cpnr_cmd = app.add_subcommand("cpnr", "Conditional probability of negative return for one loan");
    add_prices(cpnr_cmd, c, false);
    add_model(cpnr_cmd, c);
    add_rate(cpnr_cmd, c);
    add_date(cpnr_cmd, c, "Transaction date (default: last date)");
    cpnr_cmd->add_option("--q0", o.q0, "Initial margin amount")->required();
    cpnr_cmd->add_option("--w", o.w, "Maintenance margin ratio")->required();
    add_output(cpnr_cmd, c);

    auto* margin_cmd = app.add_subcommand("margin", "Individualized maintenance ratio or deduced margin system");
    add_prices(margin_cmd, c, false);
    add_model(margin_cmd, c);
    add_rate(margin_cmd, c);
    add_target(margin_cmd, c);
    add_date(margin_cmd, c, "Transaction date (default: last date)");
    margin_cmd->add_option("--q0", o.q0, "Initial margin amount; prints w*(Q0) instead of the deduced system");
    add_output(margin_cmd, c);

    auto* dynamics = app.add_subcommand("dynamics", "Deduced margin system over consecutive dates");
    add_prices(dynamics, c, false);
    add_model(dynamics, c);
    add_rate(dynamics, c);
    add_target(dynamics, c);
    add_date(dynamics, c, "First date (default: first date with full history)");
    dynamics->add_option("--count", o.count, "Number of consecutive dates")->capture_default_str();
    add_output(dynamics, c);

    auto add_backtest_flags = [&](CLI::App* cmd) {
        add_prices(cmd, c, true);
        add_model(cmd, c);
        add_rate(cmd, c);
        add_target(cmd, c);
        cmd->add_option("--loans", o.loans, "Loans per stock")->capture_default_str();
        add_output(cmd, c);
    };
    auto* backtest = app.add_subcommand("backtest", "Out-of-sample test of a margin system");
    add_backtest_flags(backtest);
    backtest->add_option("--mode", o.mode, "Loan mode: default (liquidate) or topup")
        ->capture_default_str()
        ->check(CLI::IsMember({"default", "topup"}));
    backtest->add_option("--system", o.system, "Margin system: deduced, required or fixed:m,w")
        ->capture_default_str();

    auto* compare = app.add_subcommand("compare", "Required (0.5, 1.3) versus deduced system over the same loans");
    add_backtest_flags(compare);

    auto* synth = app.add_subcommand("synth", "Generate a synthetic multiplicative random-walk price CSV");
    synth->add_option("--length", o.length, "Number of closes")->capture_default_str();
    synth->add_option("--start-price", o.start_price, "First close")->capture_default_str();
    synth->add_option("--steps", o.steps, "Daily moves as factor:probability pairs")->capture_default_str();
    synth->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    synth->add_option("--ticker", o.ticker, "Ticker of the generated series")->capture_default_str();
    synth->add_option("--out", c.out, "Write the CSV here instead of stdout");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    Runner runner(o, out);
    try {
        if (ingest->parsed()) runner.ingest();
        else if (markov->parsed()) runner.markov_test();
        else if (cpnr_cmd->parsed()) runner.cpnr_cmd();
        else if (margin_cmd->parsed()) runner.margin_cmd();
        else if (dynamics->parsed()) runner.dynamics();
        else if (backtest->parsed()) runner.backtest();
        else if (compare->parsed()) runner.compare();
        else if (synth->parsed()) runner.synth();
    } catch (const Error& e) {
        write_error(err, e.kind(), e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        write_error(err, "internal_error", e.what());
        return kExitValidation;
    }
    return kExitOk;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace margin
