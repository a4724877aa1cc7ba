#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "envelope.hpp"
#include "errors.hpp"
#include "market.hpp"
#include "multipliers.hpp"
#include "preferences.hpp"
#include "replicate.hpp"

namespace omega {

inline constexpr const char* tool_version = "1.0.0";

using json = nlohmann::ordered_json;

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SweepSpec {
    std::string axis;
    std::vector<double> values;
};

struct DiagnosticTriple {
    double nu = 0.0;
    double lambda = 0.0;
    double beta = 1.0;
};

// "none": inputs as given; "auto": scale x0 and c0 jointly to the middle of the
// feasibility window (intersected across sweep points); "factor": fixed scale.
struct RescaleSpec {
    std::string mode = "none";
    double factor = 1.0;
};

struct StrategySpec {
    BondVariant variant = BondVariant::AsPrinted;
    std::uint64_t steps = 400;
};

struct ScenarioConfig {
    std::string name = "scenario";
    MarketParams market;
    PowerParams preferences;
    double theta = 7.0;
    double floor = 6.5;
    double eps = 0.01;
    QuadratureSpec quad;
    std::optional<SweepSpec> sweep;
    RescaleSpec rescale;
    StrategySpec strategy;
    std::uint64_t seed = 1;
    std::string output = "out";
    double compare_nu = 1.0;
    bool diagnostic = false;
    std::vector<DiagnosticTriple> triples;
};

namespace detail {

inline json rate_to_json(const RateCurve& r) {
    if (r.is_constant()) return r.values()[0];
    return json(r.values());
}

inline std::string line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_, "expected an object");
    }

    ~Reader() noexcept(false) {
        if (std::uncaught_exceptions()) return;
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) fail(path_ + "/" + k, "unknown field");
    }

    bool has(const std::string& k) {
        seen_.insert(k);
        return j_.contains(k);
    }

    double number(const std::string& k, double fallback) {
        if (!has(k)) return fallback;
        const auto& v = j_.at(k);
        if (!v.is_number()) fail(path_ + "/" + k, "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(path_ + "/" + k, "expected a finite number");
        return x;
    }

    std::uint64_t integer(const std::string& k, std::uint64_t fallback) {
        if (!has(k)) return fallback;
        const auto& v = j_.at(k);
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) fail(path_ + "/" + k, "expected a nonnegative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& k, bool fallback) {
        if (!has(k)) return fallback;
        const auto& v = j_.at(k);
        if (!v.is_boolean()) fail(path_ + "/" + k, "expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& k, const std::string& fallback) {
        if (!has(k)) return fallback;
        const auto& v = j_.at(k);
        if (!v.is_string()) fail(path_ + "/" + k, "expected a string");
        return v.get<std::string>();
    }

    RateCurve rate(const std::string& k, const RateCurve& fallback) {
        if (!has(k)) return fallback;
        const auto& v = j_.at(k);
        if (v.is_number()) return RateCurve(v.get<double>());
        if (!v.is_array() || v.empty()) fail(path_ + "/" + k, "expected a number or a nonempty array of per-year rates");
        std::vector<double> xs;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) fail(path_ + "/" + k + "/" + std::to_string(i), "expected a number");
            xs.push_back(v[i].get<double>());
        }
        return RateCurve(std::move(xs));
    }

    const json& raw(const std::string& k) {
        seen_.insert(k);
        return j_.at(k);
    }

    const std::string& path() const { return path_; }

    [[noreturn]] static void fail(const std::string& where, const std::string& what) {
        throw config_error("config field '" + (where.empty() ? "/" : where) + "': " + what);
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline const char* const sweep_axes[] = {"theta", "L", "epsilon", "gamma1", "gamma2"};

inline void check_axis_value(const std::string& axis, double v, const std::string& where) {
    auto bad = [&](const char* what) { Reader::fail(where, axis + " value " + std::to_string(v) + " " + what); };
    if (axis == "theta" && !(v > 0.0)) bad("must be positive");
    if (axis == "L" && !(v >= 0.0)) bad("must be nonnegative");
    if (axis == "epsilon" && !(v >= 0.0 && v <= 1.0)) bad("must lie in [0, 1]");
    if ((axis == "gamma1" || axis == "gamma2") && !(v > 0.0)) bad("must be positive");
}

}  // namespace detail

inline ScenarioConfig config_from_json(const json& root) {
    using detail::Reader;
    ScenarioConfig c;
    Reader r(root, "");
    c.name = r.string("name", c.name);
    if (r.has("market")) {
        Reader m(r.raw("market"), "/market");
        auto& p = c.market;
        p.T = m.number("T", p.T);
        p.r_n = m.rate("r_n", p.r_n);
        p.r_r = m.rate("r_r", p.r_r);
        p.sigma_I = m.number("sigma_I", p.sigma_I);
        p.sigma_S1 = m.number("sigma_S1", p.sigma_S1);
        p.sigma_S2 = m.number("sigma_S2", p.sigma_S2);
        p.mu = m.number("mu", p.mu);
        p.sigma_C1 = m.number("sigma_C1", p.sigma_C1);
        p.sigma_C2 = m.number("sigma_C2", p.sigma_C2);
        p.lambda_I = m.number("lambda_I", p.lambda_I);
        p.lambda_S = m.number("lambda_S", p.lambda_S);
        p.i0 = m.number("i0", p.i0);
        p.c0 = m.number("c0", p.c0);
        p.x0 = m.number("x0", p.x0);
    }
    if (r.has("preferences")) {
        Reader m(r.raw("preferences"), "/preferences");
        c.preferences.gamma1 = m.number("gamma1", c.preferences.gamma1);
        c.preferences.gamma2 = m.number("gamma2", c.preferences.gamma2);
        c.preferences.A = m.number("A", c.preferences.A);
    }
    c.theta = r.number("theta", c.theta);
    c.floor = r.number("floor", c.floor);
    c.eps = r.number("epsilon", c.eps);
    if (r.has("quadrature")) {
        Reader q(r.raw("quadrature"), "/quadrature");
        c.quad.nodes = static_cast<int>(q.integer("nodes", static_cast<std::uint64_t>(c.quad.nodes)));
        c.quad.split_at_breakpoints = q.boolean("split", c.quad.split_at_breakpoints);
    }
    if (r.has("sweep")) {
        Reader s(r.raw("sweep"), "/sweep");
        SweepSpec sw;
        sw.axis = s.string("axis", "");
        if (std::find(std::begin(detail::sweep_axes), std::end(detail::sweep_axes), sw.axis) ==
            std::end(detail::sweep_axes))
            Reader::fail("/sweep/axis", "expected one of theta, L, epsilon, gamma1, gamma2");
        if (!s.has("values") || !s.raw("values").is_array() || s.raw("values").empty())
            Reader::fail("/sweep/values", "expected a nonempty array of numbers");
        const auto& vs = s.raw("values");
        for (std::size_t i = 0; i < vs.size(); ++i) {
            const std::string where = "/sweep/values/" + std::to_string(i);
            if (!vs[i].is_number()) Reader::fail(where, "expected a number");
            detail::check_axis_value(sw.axis, vs[i].get<double>(), where);
            sw.values.push_back(vs[i].get<double>());
        }
        c.sweep = std::move(sw);
    }
    if (r.has("rescale")) {
        const auto& v = r.raw("rescale");
        if (v.is_string()) {
            c.rescale.mode = v.get<std::string>();
            if (c.rescale.mode != "none" && c.rescale.mode != "auto")
                Reader::fail("/rescale", "expected \"none\", \"auto\" or a positive number");
        } else if (v.is_number() && v.get<double>() > 0.0) {
            c.rescale.mode = "factor";
            c.rescale.factor = v.get<double>();
        } else {
            Reader::fail("/rescale", "expected \"none\", \"auto\" or a positive number");
        }
    }
    if (r.has("strategy")) {
        Reader s(r.raw("strategy"), "/strategy");
        const auto v = s.string("variant", to_string(c.strategy.variant));
        if (v == "as_printed")
            c.strategy.variant = BondVariant::AsPrinted;
        else if (v == "volatility_matched")
            c.strategy.variant = BondVariant::VolatilityMatched;
        else
            Reader::fail("/strategy/variant", "expected \"as_printed\" or \"volatility_matched\"");
        c.strategy.steps = s.integer("steps", c.strategy.steps);
        if (c.strategy.steps < 1) Reader::fail("/strategy/steps", "must be at least 1");
    }
    c.seed = r.integer("seed", c.seed);
    c.output = r.string("output", c.output);
    if (r.has("compare")) {
        Reader s(r.raw("compare"), "/compare");
        c.compare_nu = s.number("nu", c.compare_nu);
        if (!(c.compare_nu > 0.0)) Reader::fail("/compare/nu", "must be positive");
    }
    c.diagnostic = r.boolean("diagnostic", c.diagnostic);
    if (r.has("triples")) {
        const auto& ts = r.raw("triples");
        if (!ts.is_array()) Reader::fail("/triples", "expected an array of {nu, lambda, beta}");
        for (std::size_t i = 0; i < ts.size(); ++i) {
            Reader t(ts[i], "/triples/" + std::to_string(i));
            DiagnosticTriple d{t.number("nu", 0.0), t.number("lambda", 0.0), t.number("beta", 1.0)};
            if (!(d.nu >= 0.0 && d.lambda >= 0.0 && d.beta > 0.0))
                Reader::fail(t.path(), "need nu >= 0, lambda >= 0, beta > 0");
            c.triples.push_back(d);
        }
    }

    try {
        c.market.validate();
    } catch (const std::invalid_argument& e) {
        throw config_error(std::string("config field '/market': ") + e.what());
    }
    if (!(c.preferences.gamma1 > 0.0 && c.preferences.gamma2 > 0.0 && c.preferences.A > 0.0))
        Reader::fail("/preferences", "gamma1, gamma2 and A must be positive");
    detail::check_axis_value("theta", c.theta, "/theta");
    detail::check_axis_value("L", c.floor, "/floor");
    detail::check_axis_value("epsilon", c.eps, "/epsilon");
    if (c.quad.nodes < 64) Reader::fail("/quadrature/nodes", "must be at least 64");
    return c;
}

inline ScenarioConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw config_error("config parse error at " + detail::line_col(text, e.byte ? e.byte - 1 : 0) + ": " +
                           e.what());
    }
    // A run manifest carries its effective config under "config".
    if (root.is_object() && root.contains("manifest_version") && root.contains("config"))
        return config_from_json(root.at("config"));
    return config_from_json(root);
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

inline json config_to_json(const ScenarioConfig& c) {
    json j;
    j["name"] = c.name;
    const auto& p = c.market;
    j["market"] = {{"T", p.T},
                   {"r_n", detail::rate_to_json(p.r_n)},
                   {"r_r", detail::rate_to_json(p.r_r)},
                   {"sigma_I", p.sigma_I},
                   {"sigma_S1", p.sigma_S1},
                   {"sigma_S2", p.sigma_S2},
                   {"mu", p.mu},
                   {"sigma_C1", p.sigma_C1},
                   {"sigma_C2", p.sigma_C2},
                   {"lambda_I", p.lambda_I},
                   {"lambda_S", p.lambda_S},
                   {"i0", p.i0},
                   {"c0", p.c0},
                   {"x0", p.x0}};
    j["preferences"] = {{"gamma1", c.preferences.gamma1}, {"gamma2", c.preferences.gamma2}, {"A", c.preferences.A}};
    j["theta"] = c.theta;
    j["floor"] = c.floor;
    j["epsilon"] = c.eps;
    j["quadrature"] = {{"nodes", c.quad.nodes}, {"split", c.quad.split_at_breakpoints}};
    if (c.sweep) j["sweep"] = {{"axis", c.sweep->axis}, {"values", c.sweep->values}};
    if (c.rescale.mode == "factor")
        j["rescale"] = c.rescale.factor;
    else
        j["rescale"] = c.rescale.mode;
    j["strategy"] = {{"variant", to_string(c.strategy.variant)}, {"steps", c.strategy.steps}};
    j["seed"] = c.seed;
    j["output"] = c.output;
    j["compare"] = {{"nu", c.compare_nu}};
    j["diagnostic"] = c.diagnostic;
    json ts = json::array();
    for (const auto& t : c.triples) ts.push_back({{"nu", t.nu}, {"lambda", t.lambda}, {"beta", t.beta}});
    j["triples"] = ts;
    return j;
}

// One (theta, L, eps, preferences) point of a scenario or sweep.
struct RunPoint {
    MarketParams market;
    PowerParams preferences;
    double theta = 0.0;
    double floor = 0.0;
    double eps = 0.0;
};

inline RunPoint apply_axis(const ScenarioConfig& c, const std::string& axis, double v) {
    RunPoint rp{c.market, c.preferences, c.theta, c.floor, c.eps};
    if (axis == "theta") rp.theta = v;
    else if (axis == "L") rp.floor = v;
    else if (axis == "epsilon") rp.eps = v;
    else if (axis == "gamma1") rp.preferences.gamma1 = v;
    else if (axis == "gamma2") rp.preferences.gamma2 = v;
    return rp;
}

inline std::vector<RunPoint> run_points(const ScenarioConfig& c) {
    if (!c.sweep) return {RunPoint{c.market, c.preferences, c.theta, c.floor, c.eps}};
    std::vector<RunPoint> out;
    for (double v : c.sweep->values) out.push_back(apply_axis(c, c.sweep->axis, v));
    return out;
}

struct RescaleOutcome {
    std::string mode = "none";
    double factor = 1.0;
    double window_lower = 0.0;
    double window_upper = 0.0;
    bool window_empty = false;
};

// Scale of (x0, c0) placing x~0 in the middle of the window shared by every point.
inline RescaleOutcome resolve_rescale(const ScenarioConfig& c, const std::vector<RunPoint>& pts) {
    RescaleOutcome out;
    out.mode = c.rescale.mode;
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    for (const auto& rp : pts) {
        const auto f = feasibility(rp.market, rp.theta, rp.floor, rp.eps);
        lo = std::max(lo, f.lower);
        hi = std::min(hi, f.upper);
    }
    out.window_lower = lo;
    out.window_upper = hi;
    out.window_empty = !(lo < hi);
    if (c.rescale.mode == "factor") out.factor = c.rescale.factor;
    if (c.rescale.mode == "auto" && !out.window_empty) {
        const double x0t = auxiliary_initial(c.market);
        const double pv = x0t * c.market.i0;  // x0 + c0 a(0) scales linearly
        if (pv > 0.0) out.factor = 0.5 * (lo + hi) / x0t;
    }
    return out;
}

inline void apply_scale(MarketParams& p, double k) {
    p.x0 *= k;
    p.c0 *= k;
}

enum class ExitCode : int { Solved = 0, Failure = 1, Infeasible = 2, Numerical = 3 };

struct PointOutcome {
    ExitCode code = ExitCode::Solved;
    std::string label;
    std::string verdict;
    std::optional<SolverResult> result;
    FeasibilityReport feasibility;
    std::string error;
};

namespace detail {

// Shortest text that reads back to the same double.
inline std::string fmt(double x) {
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << s;
}

inline void write_json(const std::filesystem::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

inline json num_or_null(double x) {
    if (std::isfinite(x)) return x;
    return nullptr;
}

inline json feasibility_json(const FeasibilityReport& f) {
    json j = {{"verdict", to_string(f.verdict)},
              {"lower", f.lower},
              {"upper", f.upper},
              {"x0_tilde", f.x0_tilde},
              {"tail_quantile", num_or_null(f.tail_quantile)}};
    return j;
}

inline json thresholds_json(const PiecewiseSolution& s) {
    json j = json::object();
    s.thresholds().for_each([&](const char* name, double v) { j[name] = num_or_null(v); });
    return j;
}

inline std::string kernel_bound_text(double y, double beta) {
    if (std::isinf(y)) return "inf";
    return fmt(y / beta);
}

}  // namespace detail

// Log-spaced H(T) grid over five standard deviations of the kernel law.
inline std::vector<double> curve_grid(const KernelLaw& law, std::size_t n = 1000) {
    const double lo = -law.a - 5.0 * law.sd(), hi = -law.a + 5.0 * law.sd();
    std::vector<double> H(n);
    for (std::size_t i = 0; i < n; ++i)
        H[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    return H;
}

inline std::string emit_curve(const PiecewiseSolution& sol, double beta, const std::vector<double>& grid) {
    std::string out = "H,Z\n";
    for (double H : grid) out += detail::fmt(H) + "," + detail::fmt(sol(beta * H)) + "\n";
    return out;
}

inline json regions_json(const PiecewiseSolution& sol, double beta) {
    json regions = json::array();
    std::set<BranchKind> kinds;
    for (const auto& b : sol.branches()) {
        kinds.insert(b.kind);
        regions.push_back({{"kind", to_string(b.kind)},
                           {"y_lo", b.y_lo},
                           {"y_hi", detail::num_or_null(b.y_hi)},
                           {"H_lo", b.y_lo / beta},
                           {"H_hi", detail::num_or_null(b.y_hi / beta)}});
    }
    return {{"label", to_string(sol.label())},
            {"variant", to_string(sol.variant())},
            {"region_count", regions.size()},
            {"distinct_kinds", kinds.size()},
            {"regions", regions},
            {"thresholds", detail::thresholds_json(sol)}};
}

inline json moments_json(const Moments& m) {
    return {{"budget", m.budget}, {"prob_floor", m.prob_floor}, {"reward", m.reward}, {"penalty", m.penalty}};
}

inline json result_json(const SolverResult& r) {
    json j = {{"verdict", to_string(r.verdict)},
              {"nu", r.nu},
              {"lambda", r.lambda},
              {"beta", r.beta},
              {"nu_fixed", r.nu_fixed},
              {"nu_evaluations", r.nu_evaluations}};
    if (r.p) j["sup_probability"] = *r.p;
    if (r.solution) {
        j["label"] = to_string(r.solution->label());
        j["variant"] = to_string(r.solution->variant());
        j["moments"] = moments_json(r.moments);
        j["ratio"] = r.moments.penalty > 0.0 ? json(r.moments.reward / r.moments.penalty) : json(nullptr);
        j["residuals"] = {{"budget_relative", r.residuals.budget},
                          {"slack", r.residuals.slack},
                          {"var_gap", r.residuals.var_gap},
                          {"value", r.residuals.value},
                          {"ratio_relative", detail::num_or_null(r.residuals.ratio)}};
        j["thresholds"] = detail::thresholds_json(*r.solution);
    }
    return j;
}

inline Problem make_problem(const RunPoint& rp, const QuadratureSpec& q) {
    Problem pb;
    pb.law = kernel_law(rp.market);
    pb.pair = PreferencePair::power(rp.preferences.gamma1, rp.preferences.gamma2, rp.preferences.A);
    pb.x0_tilde = auxiliary_initial(rp.market);
    pb.theta = rp.theta;
    pb.floor = rp.floor;
    pb.eps = rp.eps;
    pb.quad = q;
    return pb;
}

// One seeded path of the closed-form hedge: t, H, X~, pi_P, pi_S.
inline std::string strategy_csv(const MarketParams& p, const Payoff& pay, const PiecewiseSolution& sol,
                                double x0_tilde, const StrategySpec& spec, std::uint64_t seed) {
    const auto times = time_grid(p.T, spec.steps, TimeGrid::Uniform);
    ClosedFormHedge hedge(p, pay, spec.variant, times);
    SimulationSpec sim;
    sim.paths = 1;
    sim.steps = spec.steps;
    sim.seed = seed;
    sim.threads = 1;
    std::vector<WealthSnapshot> path;
    simulate_paths(p, x0_tilde, closed_form_source(hedge, sol), sim, &path, 1);
    std::string out = "t,H,X_tilde,pi_P,pi_S\n";
    for (const auto& s : path)
        out += detail::fmt(s.t) + "," + detail::fmt(s.H) + "," + detail::fmt(s.X_tilde) + "," + detail::fmt(s.pi_P) +
               "," + detail::fmt(s.pi_S) + "\n";
    return out;
}

inline json diagnostics_json(const Problem& pb, const std::vector<DiagnosticTriple>& triples) {
    json out = json::array();
    for (const auto& t : triples) {
        json e = {{"nu", t.nu}, {"lambda", t.lambda}, {"beta", t.beta}};
        try {
            const auto sol = classify_and_solve(pb.objective(t.nu, t.lambda), pb.pair);
            const auto m = moments(pb.law, sol, t.beta, pb.quad);
            e["label"] = to_string(sol.label());
            e["R"] = m.budget;
            e["S"] = m.prob_floor;
            e["v"] = m.value(t.nu);
            e["budget_gap"] = m.budget - pb.x0_tilde;
        } catch (const std::exception& ex) {
            e["error"] = ex.what();
        }
        out.push_back(e);
    }
    return out;
}

struct RunOptions {
    std::optional<double> fixed_nu;  // pins nu (compare mode ii)
    bool write_strategy = true;
};

// Feasibility, then diagnostics or the full solve; writes artifacts into dir.
inline PointOutcome run_point(const ScenarioConfig& cfg, const RunPoint& rp, const std::filesystem::path& dir,
                              const RunOptions& opt = {}) {
    std::filesystem::create_directories(dir);
    PointOutcome out;
    json solver;
    try {
        out.feasibility = feasibility(rp.market, rp.theta, rp.floor, rp.eps);
        solver["feasibility"] = detail::feasibility_json(out.feasibility);
        const Problem pb = make_problem(rp, cfg.quad);
        const bool feasible = out.feasibility.verdict == Verdict::Feasible;
        if (!feasible || cfg.diagnostic) {
            solver["mode"] = "diagnostic";
            solver["optimality_claimed"] = false;
            solver["diagnostics"] = diagnostics_json(pb, cfg.triples);
            out.code = feasible ? ExitCode::Solved : ExitCode::Infeasible;
            out.verdict = feasible ? "Diagnostic" : to_string(out.feasibility.verdict);
            solver["verdict"] = out.verdict;
            detail::write_json(dir / "solver.json", solver);
            return out;
        }
        solver["mode"] = opt.fixed_nu ? "fixed_nu" : "solve";
        SolverResult r = opt.fixed_nu ? solve_fixed_nu(pb, *opt.fixed_nu) : solve_nu(pb);
        solver["result"] = result_json(r);
        out.verdict = to_string(r.verdict);
        solver["verdict"] = out.verdict;
        if (r.verdict != Existence::Solved) {
            out.code = ExitCode::Infeasible;
            out.result = std::move(r);
            detail::write_json(dir / "solver.json", solver);
            return out;
        }
        out.label = to_string(r.solution->label());
        detail::write_json(dir / "solver.json", solver);
        detail::write_text(dir / "curve.csv", emit_curve(*r.solution, r.beta, curve_grid(pb.law)));
        detail::write_json(dir / "regions.json", regions_json(*r.solution, r.beta));
        if (opt.write_strategy) {
            const auto pay = atoms_from_solution(*r.solution, r.beta);
            detail::write_text(dir / "strategy.csv",
                               strategy_csv(rp.market, pay, *r.solution, pb.x0_tilde, cfg.strategy, cfg.seed));
        }
        out.result = std::move(r);
    } catch (const numerical_error& e) {
        out.code = ExitCode::Numerical;
        out.error = e.what();
    } catch (const invariant_violation& e) {
        out.code = ExitCode::Numerical;
        out.error = e.what();
    } catch (const degenerate_market& e) {
        out.code = ExitCode::Numerical;
        out.error = e.what();
    }
    if (!out.error.empty()) {
        solver["verdict"] = "NumericalFailure";
        solver["error"] = out.error;
        out.verdict = "NumericalFailure";
        detail::write_json(dir / "solver.json", solver);
    }
    return out;
}

inline std::string axis_dir(const std::string& axis, double v) { return axis + "=" + detail::fmt(v); }

inline json manifest_json(const ScenarioConfig& effective, const std::string& command, const RescaleOutcome& rs,
                          const std::vector<std::string>& artifacts) {
    Tolerances tol;
    return {{"manifest_version", 1},
            {"tool_version", tool_version},
            {"command", command},
            {"config", config_to_json(effective)},
            {"rescale",
             {{"mode", rs.mode},
              {"factor", rs.factor},
              {"window_lower", rs.window_lower},
              {"window_upper", detail::num_or_null(rs.window_upper)},
              {"window_empty", rs.window_empty}}},
            {"tolerances",
             {{"budget_relative", tol.budget},
              {"value", tol.value},
              {"slack", tol.slack},
              {"lambda_grid", {lambda_grid_lo, lambda_grid_hi, lambda_grid_points}},
              {"nu_max", nu_max}}},
            {"seed", effective.seed},
            {"artifacts", artifacts}};
}

inline ExitCode worst(ExitCode a, ExitCode b) {
    auto rank = [](ExitCode c) {
        switch (c) {
            case ExitCode::Solved: return 0;
            case ExitCode::Infeasible: return 1;
            case ExitCode::Numerical: return 2;
            case ExitCode::Failure: return 3;
        }
        return 3;
    };
    return rank(a) >= rank(b) ? a : b;
}

inline std::vector<std::string> artifact_list(const std::filesystem::path& root) {
    std::vector<std::string> out;
    if (!std::filesystem::exists(root)) return out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().filename() != "manifest.json")
            out.push_back(std::filesystem::relative(e.path(), root).generic_string());
    std::sort(out.begin(), out.end());
    return out;
}

struct ScenarioOutcome {
    ExitCode code = ExitCode::Solved;
    RescaleOutcome rescale;
    std::vector<PointOutcome> points;
};

// solve or sweep: every point in its own directory, then the manifest.
inline ScenarioOutcome run_scenario(ScenarioConfig cfg, const std::string& command = "solve") {
    const std::filesystem::path root = cfg.output;
    std::filesystem::create_directories(root);
    ScenarioOutcome out;
    if (command == "solve") cfg.sweep.reset();
    auto pts = run_points(cfg);
    out.rescale = resolve_rescale(cfg, pts);
    for (auto& rp : pts) apply_scale(rp.market, out.rescale.factor);

    std::vector<std::filesystem::path> dirs;
    for (std::size_t i = 0; i < pts.size(); ++i)
        dirs.push_back(cfg.sweep ? root / axis_dir(cfg.sweep->axis, cfg.sweep->values[i]) : root);
    std::vector<std::future<PointOutcome>> jobs;
    for (std::size_t i = 0; i < pts.size(); ++i)
        jobs.push_back(std::async(std::launch::async, [&, i] { return run_point(cfg, pts[i], dirs[i]); }));
    for (auto& j : jobs) out.points.push_back(j.get());
    for (const auto& p : out.points) out.code = worst(out.code, p.code);

    if (cfg.sweep) {
        json summary = json::array();
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const auto& p = out.points[i];
            json e = {{cfg.sweep->axis, cfg.sweep->values[i]},
                      {"directory", dirs[i].filename().generic_string()},
                      {"verdict", p.verdict}};
            if (!p.label.empty()) e["label"] = p.label;
            if (p.result && p.result->solution) {
                e["nu"] = p.result->nu;
                e["lambda"] = p.result->lambda;
                e["beta"] = p.result->beta;
            }
            summary.push_back(e);
        }
        detail::write_json(root / "sweep.json", {{"axis", cfg.sweep->axis}, {"points", summary}});
    }
    detail::write_json(root / "manifest.json", manifest_json(cfg, command, out.rescale, artifact_list(root)));
    return out;
}

// (i) eps = 1 full solve; (ii) nu pinned with the VaR constraint; plus the
// unconstrained solution at the same nu for the floor-interval comparison.
inline ScenarioOutcome compare_modes(ScenarioConfig cfg) {
    const std::filesystem::path root = cfg.output;
    std::filesystem::create_directories(root);
    cfg.sweep.reset();
    ScenarioOutcome out;
    RunPoint base{cfg.market, cfg.preferences, cfg.theta, cfg.floor, cfg.eps};
    out.rescale = resolve_rescale(cfg, {base});
    apply_scale(base.market, out.rescale.factor);

    RunPoint no_var = base;
    no_var.eps = 1.0;
    out.points.push_back(run_point(cfg, no_var, root / "no_var"));
    out.points.push_back(run_point(cfg, base, root / "fixed_nu", RunOptions{cfg.compare_nu, true}));
    RunPoint free_pt = base;
    free_pt.eps = 1.0;
    out.points.push_back(run_point(cfg, free_pt, root / "fixed_nu_no_var", RunOptions{cfg.compare_nu, false}));
    for (const auto& p : out.points) out.code = worst(out.code, p.code);

    json cmp = {{"nu", cfg.compare_nu}, {"floor", base.floor}};
    auto floor_y = [](const PointOutcome& p) -> json {
        if (!p.result || !p.result->solution) return nullptr;
        return detail::num_or_null(p.result->solution->floor_threshold());
    };
    auto floor_H = [](const PointOutcome& p) -> json {
        if (!p.result || !p.result->solution) return nullptr;
        return detail::num_or_null(p.result->solution->floor_threshold() / p.result->beta);
    };
    cmp["no_var"] = {{"verdict", out.points[0].verdict}, {"floor_threshold_y", floor_y(out.points[0])},
                     {"floor_threshold_H", floor_H(out.points[0])}};
    cmp["fixed_nu"] = {{"verdict", out.points[1].verdict}, {"floor_threshold_y", floor_y(out.points[1])},
                       {"floor_threshold_H", floor_H(out.points[1])}};
    cmp["fixed_nu_no_var"] = {{"verdict", out.points[2].verdict}, {"floor_threshold_y", floor_y(out.points[2])},
                              {"floor_threshold_H", floor_H(out.points[2])}};
    detail::write_json(root / "comparison.json", cmp);
    detail::write_json(root / "manifest.json", manifest_json(cfg, "compare", out.rescale, artifact_list(root)));
    return out;
}

}  // namespace omega
