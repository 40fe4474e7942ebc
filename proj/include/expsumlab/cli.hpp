#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "arcs.hpp"
#include "core.hpp"
#include "curve.hpp"
#include "decoupling.hpp"
#include "expsum.hpp"
#include "levelset.hpp"
#include "local_moments.hpp"
#include "lower_bound.hpp"
#include "moments.hpp"

namespace esl::cli {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"conditions",   "moment",          "bilinear-moment", "sweep-alpha",
                                            "oracle-count", "weyl-verify",     "levelset-verify", "lemma76",
                                            "lower-bound",  "decouple",        "rescale-identity"};
    return c;
}

/// Bad configuration; maps to exit status 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- rows

inline const std::array<const char*, 20>& columns() {
    static const std::array<const char*, 20> c{"experiment", "curve_family", "a",          "b",          "N",
                                               "alpha",      "beta",         "p",          "j",          "s",
                                               "value",      "bound",        "ratio",      "stderr",     "samples_x1",
                                               "samples_x2", "samples_x3",   "samples_x4", "seed",       "wall_ms"};
    return c;
}

inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// One CSV record; unset columns stay empty.
struct Row {
    std::array<std::string, 20> cells;

    Row& set(const std::string& col, const std::string& v) {
        for (std::size_t i = 0; i < cells.size(); ++i)
            if (col == columns()[i]) {
                cells[i] = v;
                return *this;
            }
        throw std::logic_error("unknown column " + col);
    }
    Row& num(const std::string& col, double v) { return set(col, fmt(v)); }
    Row& integer(const std::string& col, long long v) { return set(col, std::to_string(v)); }
};

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string o = "\"";
    for (char ch : s) o += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return o + "\"";
}

inline std::string to_csv(const std::vector<Row>& rows) {
    std::ostringstream os;
    for (std::size_t i = 0; i < columns().size(); ++i) os << (i ? "," : "") << columns()[i];
    os << "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.cells.size(); ++i) os << (i ? "," : "") << csv_escape(r.cells[i]);
        os << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------- config

inline json default_config() {
    return json{{"schema_version", kSchemaVersion},
                {"preset", nullptr},
                {"curves", json::array({json{{"family", "moment"}}})},
                {"N", nullptr},
                {"p", nullptr},
                {"alpha", nullptr},
                {"beta", nullptr},
                {"alphas", nullptr},
                {"delta", nullptr},
                {"rho", 4.0},
                {"samples", nullptr},
                {"window", nullptr},
                {"seed", 1},
                {"workers", 1},
                {"out", "out"},
                {"record_timing", false},
                {"trials", nullptr},
                {"M", nullptr},
                {"k", 6},
                {"I", nullptr},
                {"I1", nullptr},
                {"I2", nullptr},
                {"method", "grid"},
                {"engine", "spectral"},
                {"slice", false},
                {"plan", json::object()},
                {"jmax", 10},
                {"eps", 0.05},
                {"op", "parabola"},
                {"coeffs", "random-signs"},
                {"rhs", "l2"},
                {"mode", "pointmass"},
                {"arcs", nullptr},
                {"assert", json::object()}};
}

/// Parses the value of --set key=value: JSON when it parses, a string otherwise.
inline json parse_value(const std::string& v) {
    try {
        return json::parse(v);
    } catch (const json::parse_error&) {
        return json(v);
    }
}

/// Applies key=value; dotted keys reach into objects.
inline void apply_override(json& cfg, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    json* node = &cfg;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (dot == std::string::npos) {
            (*node)[part] = parse_value(kv.substr(eq + 1));
            return;
        }
        if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
        node = &(*node)[part];
        start = dot + 1;
    }
}

inline json merge_config(const json& file_cfg) {
    json cfg = default_config();
    if (!file_cfg.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [k, v] : file_cfg.items()) {
        if (!cfg.contains(k)) throw ConfigError("unknown config key '" + k + "'");
        cfg[k] = v;
    }
    return cfg;
}

namespace detail {

inline double get_num(const json& cfg, const char* key) {
    const auto& v = cfg.at(key);
    if (!v.is_number()) throw ConfigError(std::string(key) + " must be a number");
    return v.get<double>();
}

inline std::int64_t get_int(const json& v, const std::string& key) {
    if (!v.is_number_integer() && !(v.is_number() && std::floor(v.get<double>()) == v.get<double>()))
        throw ConfigError(key + " must be an integer");
    return v.get<std::int64_t>();
}

inline std::vector<std::int64_t> get_int_list(const json& cfg, const char* key) {
    const auto& v = cfg.at(key);
    std::vector<std::int64_t> out;
    if (v.is_array()) {
        for (const auto& e : v) out.push_back(get_int(e, key));
    } else {
        out.push_back(get_int(v, key));
    }
    if (out.empty()) throw ConfigError(std::string(key) + " must not be empty");
    return out;
}

inline std::vector<double> get_num_list(const json& cfg, const char* key) {
    const auto& v = cfg.at(key);
    std::vector<double> out;
    if (v.is_array()) {
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigError(std::string(key) + " entries must be numbers");
            out.push_back(e.get<double>());
        }
    } else {
        out.push_back(get_num(cfg, key));
    }
    if (out.empty()) throw ConfigError(std::string(key) + " must not be empty");
    return out;
}

inline std::string get_str(const json& cfg, const char* key) {
    const auto& v = cfg.at(key);
    if (!v.is_string()) throw ConfigError(std::string(key) + " must be a string");
    return v.get<std::string>();
}

/// Fills null fields with the command's defaults.
inline void fill(json& cfg, const char* key, const json& v) {
    if (cfg.at(key).is_null()) cfg[key] = v;
}

inline Curve make_curve(const json& spec) {
    if (!spec.is_object() || !spec.contains("family")) throw ConfigError("curve spec needs a family");
    const auto fam = spec.at("family").get<std::string>();
    for (const auto& [k, v] : spec.items())
        if (k != "family" && k != "a" && k != "b") throw ConfigError("unknown curve key '" + k + "'");
    if (fam == "moment") return Curve::moment();
    if (fam == "power") {
        if (!spec.contains("a") || !spec.contains("b")) throw ConfigError("power curve needs a and b");
        return Curve::power(spec.at("a").get<double>(), spec.at("b").get<double>());
    }
    throw ConfigError("curve family must be moment or power");
}

inline std::vector<std::pair<json, Curve>> curves(const json& cfg) {
    std::vector<std::pair<json, Curve>> out;
    if (!cfg.at("curves").is_array() || cfg.at("curves").empty()) throw ConfigError("curves must be a nonempty list");
    for (const auto& c : cfg.at("curves")) out.emplace_back(c, make_curve(c));
    return out;
}

inline Row base_row(const std::string& experiment, const json& curve_spec, std::uint64_t seed) {
    Row r;
    r.set("experiment", experiment);
    const auto fam = curve_spec.at("family").get<std::string>();
    r.set("curve_family", fam);
    if (fam == "power") {
        r.num("a", curve_spec.at("a").get<double>());
        r.num("b", curve_spec.at("b").get<double>());
    } else if (fam == "moment") {
        r.num("a", 3);
        r.num("b", 4);
    }
    r.integer("seed", static_cast<long long>(seed));
    return r;
}

}  // namespace detail

// ---------------------------------------------------------------- results

struct Assertion {
    std::string name;
    double value = 0;
    double limit = 0;
    std::string relation;  // "<=", ">=", "=="
    bool pass = false;
};

struct RunResult {
    int exit_code = 0;
    std::vector<Row> rows;
    json summary;
    std::vector<Assertion> assertions;
    std::string diagnostics;
    std::string csv() const { return to_csv(rows); }
};

/// Run context: effective config plus accumulated output.
struct Context {
    json cfg;
    std::uint64_t seed = 1;
    int workers = 1;
    bool timing = false;
    std::vector<Row> rows;
    std::vector<Assertion> assertions;
    json fits = json::object();
    json extra = json::object();

    double assert_limit(const char* name, double dflt) const {
        const auto& a = cfg.at("assert");
        if (!a.is_object()) throw ConfigError("assert must be an object");
        if (!a.contains(name)) return dflt;
        if (!a.at(name).is_number()) throw ConfigError(std::string("assert.") + name + " must be a number");
        return a.at(name).get<double>();
    }
    bool has_assert(const char* name) const { return cfg.at("assert").contains(name); }
    void check(const std::string& name, double value, const std::string& rel, double limit) {
        bool ok = false;
        if (rel == "<=") ok = value <= limit;
        else if (rel == ">=") ok = value >= limit;
        else if (rel == "<") ok = value < limit;
        else if (rel == ">") ok = value > limit;
        else ok = value == limit;
        assertions.push_back({name, value, limit, rel, ok});
    }
    void timed(Row& r, double ms) const {
        if (timing) r.num("wall_ms", ms);
    }
};

namespace detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline IntervalZ interval_of(const json& v, std::int64_t N, const char* key) {
    if (v.is_null()) return upper_half(N);
    if (!v.is_array() || v.size() != 2) throw ConfigError(std::string(key) + " must be [lo, hi]");
    // Integers are absolute; fractions are scaled by N.
    auto end = [&](const json& e, bool lo) -> std::int64_t {
        if (e.is_number_integer()) return e.get<std::int64_t>();
        if (!e.is_number()) throw ConfigError(std::string(key) + " entries must be numbers");
        const double x = e.get<double>() * static_cast<double>(N);
        return lo ? static_cast<std::int64_t>(std::ceil(x - 1e-9)) : static_cast<std::int64_t>(std::floor(x + 1e-9));
    };
    return IntervalZ(end(v[0], true), end(v[1], false));
}

inline SamplingPlan plan_of(const json& cfg) {
    SamplingPlan plan;
    plan.rho = get_num(cfg, "rho");
    plan.workers = static_cast<int>(get_int(cfg.at("workers"), "workers"));
    const auto e = get_str(cfg, "engine");
    if (e == "spectral") plan.engine = MomentEngine::Spectral;
    else if (e == "direct") plan.engine = MomentEngine::Direct;
    else throw ConfigError("engine must be spectral or direct");
    const auto& p = cfg.at("plan");
    if (!p.is_object()) throw ConfigError("plan must be an object");
    for (const auto& [k, v] : p.items()) {
        if (k == "n_x1") plan.n_x1 = get_int(v, k);
        else if (k == "n_x2") plan.n_x2 = get_int(v, k);
        else if (k == "K3") plan.K3 = get_int(v, k);
        else if (k == "K4") plan.K4 = get_int(v, k);
        else if (k == "halving_tol") plan.halving_tol = v.get<double>();
        else if (k == "max_pairs") plan.max_pairs = v.get<double>();
        else if (k == "max_points") plan.max_points = v.get<double>();
        else throw ConfigError("unknown plan key '" + k + "'");
    }
    return plan;
}

inline void moment_row(Row& r, const MomentReport& m) {
    r.integer("N", m.N).num("p", m.p).num("value", m.value).num("bound", m.floor).num("stderr", m.error);
    if (m.method == "grid") {
        r.integer("samples_x1", m.plan.n_x1).integer("samples_x2", m.plan.n_x2);
        r.integer("samples_x3", m.domain.x3.width() > 0 ? m.plan.K3 + 1 : 1);
        r.integer("samples_x4", m.domain.x4.width() > 0 ? m.plan.K4 + 1 : 1);
    } else {
        r.num("samples_x1", m.work);
    }
    if (m.floor > 0) r.num("ratio", m.value / m.floor);
}

inline void fit_row(Context& ctx, const std::string& experiment, const json& curve, const std::vector<double>& xs,
                    const std::vector<double>& ys, const std::string& fit_key) {
    if (xs.size() < 2) return;
    const auto f = fit_loglog(xs, ys);
    Row r = base_row(experiment, curve, ctx.seed);
    r.num("value", f.slope).num("bound", f.intercept);
    ctx.rows.push_back(r);
    ctx.fits[fit_key] = f.slope;
}

inline void check_exponents(const json& cfg, double alpha, double beta) {
    if (!(alpha >= beta && beta >= 0)) throw ConfigError("need alpha >= beta >= 0");
    if (cfg.at("preset") == "conjecture" && std::abs(alpha + beta - 3) > 1e-12)
        throw ConfigError("the conjecture preset needs alpha + beta = 3");
    if (!cfg.at("delta").is_null()) {
        const double d = cfg.at("delta").get<double>();
        if (d < 2 - 1.5 * beta || d > 1.8 - beta) throw ConfigError("delta must satisfy 2 - 3 beta/2 <= delta <= 9/5 - beta");
    }
}

}  // namespace detail

// ---------------------------------------------------------------- commands

inline void cmd_conditions(Context& ctx) {
    const int grid = ctx.cfg.at("samples").is_null() ? 2048 : static_cast<int>(detail::get_int(ctx.cfg.at("samples"), "samples"));
    for (const auto& [spec, c] : detail::curves(ctx.cfg)) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto rep = verify_conditions(c, grid);
        Row r = detail::base_row("conditions", spec, ctx.seed);
        // value = A4, bound = A2, ratio = A3 / A2; all four constants go to the summary.
        r.num("value", rep.A4).num("bound", rep.A2).num("ratio", rep.A3 / rep.A2).integer("samples_x1", grid + 1);
        ctx.timed(r, detail::ms_since(t0));
        ctx.rows.push_back(r);
        ctx.extra[rep.curve_id] = json{{"A1", rep.A1}, {"A2", rep.A2}, {"A3", rep.A3}, {"A4", rep.A4},
                                       {"A2_diag", rep.A2_diag}, {"A3_diag", rep.A3_diag}};
        ctx.check(rep.curve_id + ": conditions hold", rep.all_pass() ? 1 : 0, "==", 1);
    }
}

inline void cmd_moment(Context& ctx, bool bilinear) {
    auto& cfg = ctx.cfg;
    detail::fill(cfg, "p", 12);
    detail::fill(cfg, "alpha", 1.5);
    detail::fill(cfg, "beta", 1.5);
    detail::fill(cfg, "N", json::array({4, 6, 8}));
    const int p = static_cast<int>(detail::get_int(cfg.at("p"), "p"));
    const double alpha = detail::get_num(cfg, "alpha"), beta = detail::get_num(cfg, "beta");
    detail::check_exponents(cfg, alpha, beta);
    const auto Ns = detail::get_int_list(cfg, "N");
    const auto method = detail::get_str(cfg, "method");
    if (method != "grid" && method != "quasi-random") throw ConfigError("method must be grid or quasi-random");
    const bool slice = cfg.at("slice").get<bool>();
    const auto plan = detail::plan_of(cfg);
    const std::int64_t samples = cfg.at("samples").is_null() ? (std::int64_t{1} << 20) : detail::get_int(cfg.at("samples"), "samples");
    for (const auto& [spec, c] : detail::curves(cfg)) {
        std::vector<double> xs, ys;
        for (auto N : Ns) {
            const auto t0 = std::chrono::steady_clock::now();
            const Domain4 d = slice ? Domain4::slice() : Domain4::conjecture(N, alpha, beta);
            MomentReport m;
            if (bilinear) {
                detail::fill(cfg, "I1", json::array({0.5, 0.625}));
                detail::fill(cfg, "I2", json::array({0.875, 1.0}));
                const auto I1 = detail::interval_of(cfg.at("I1"), N, "I1"), I2 = detail::interval_of(cfg.at("I2"), N, "I2");
                m = method == "grid" ? moment_bilinear(c, N, I1, I2, d, plan)
                                     : moment_bilinear_quasirandom(c, N, I1, I2, d, samples, ctx.seed, ctx.workers);
            } else {
                const auto I = detail::interval_of(cfg.at("I"), N, "I");
                m = method == "grid" ? moment_lp(c, N, I, p, d, plan)
                                     : moment_quasirandom(c, N, I, p, d, samples, ctx.seed, ctx.workers);
            }
            Row r = detail::base_row(bilinear ? "bilinear-moment" : "moment", spec, ctx.seed);
            detail::moment_row(r, m);
            if (!slice) r.num("alpha", alpha).num("beta", beta);
            ctx.timed(r, detail::ms_since(t0));
            ctx.rows.push_back(r);
            const std::string tag = c.id() + " N=" + std::to_string(N);
            if (method == "grid") ctx.check(tag + ": converged", m.converged ? 1 : 0, "==", 1);
            if (!bilinear && m.floor > 0) ctx.check(tag + ": value above constructive floor", m.value, ">=", m.floor);
            if (slice && !bilinear && p % 2 == 0 && ctx.has_assert("oracle")) {
                const auto I = detail::interval_of(cfg.at("I"), N, "I");
                const double o = static_cast<double>(tuple_count_oracle(N, I, p / 2));
                ctx.check(tag + ": relative distance to tuple count", std::abs(m.value - o) / o, "<=",
                          ctx.assert_limit("oracle", 1e-9));
            }
            xs.push_back(static_cast<double>(N));
            ys.push_back(m.value);
        }
        if (xs.size() >= 2 && !slice) {
            const std::string key = c.id();
            detail::fit_row(ctx, std::string(bilinear ? "bilinear-moment" : "moment") + ".fit", spec, xs, ys, key);
            if (ctx.has_assert("slope_min")) ctx.check(key + ": fitted slope", ctx.fits[key].get<double>(), ">=", ctx.assert_limit("slope_min", 0));
            if (ctx.has_assert("slope_max")) ctx.check(key + ": fitted slope", ctx.fits[key].get<double>(), "<=", ctx.assert_limit("slope_max", 0));
        }
    }
}

inline void cmd_sweep_alpha(Context& ctx) {
    auto& cfg = ctx.cfg;
    detail::fill(cfg, "p", 12);
    detail::fill(cfg, "N", json::array({4, 6, 8}));
    detail::fill(cfg, "alphas", json::array({1.5, 1.65, 1.8, 1.9, 2.0}));
    const int p = static_cast<int>(detail::get_int(cfg.at("p"), "p"));
    const auto Ns = detail::get_int_list(cfg, "N");
    const auto alphas = detail::get_num_list(cfg, "alphas");
    const auto plan = detail::plan_of(cfg);
    for (const auto& [spec, c] : detail::curves(cfg)) {
        for (double alpha : alphas) {
            const double b = p / 2.0 - 3 - alpha;
            detail::check_exponents(cfg, alpha, b);
            std::vector<double> xs, ys;
            for (auto N : Ns) {
                const auto t0 = std::chrono::steady_clock::now();
                const auto m = moment_lp(c, N, upper_half(N), p, Domain4::conjecture(N, alpha, b), plan);
                Row r = detail::base_row("sweep-alpha", spec, ctx.seed);
                detail::moment_row(r, m);
                r.num("alpha", alpha).num("beta", b);
                ctx.timed(r, detail::ms_since(t0));
                ctx.rows.push_back(r);
                ctx.check(c.id() + " alpha=" + fmt(alpha) + " N=" + std::to_string(N) + ": converged", m.converged ? 1 : 0, "==", 1);
                xs.push_back(static_cast<double>(N));
                ys.push_back(m.value);
            }
            if (xs.size() >= 2) {
                const auto f = fit_loglog(xs, ys);
                Row r = detail::base_row("sweep-alpha.fit", spec, ctx.seed);
                r.num("alpha", alpha).num("beta", b).num("p", p).num("value", f.slope).num("bound", f.intercept);
                ctx.rows.push_back(r);
                ctx.fits[c.id() + " alpha=" + fmt(alpha)] = f.slope;
            }
        }
    }
}

inline void cmd_oracle_count(Context& ctx) {
    auto& cfg = ctx.cfg;
    detail::fill(cfg, "N", 8);
    const auto Ns = detail::get_int_list(cfg, "N");
    const int k = static_cast<int>(detail::get_int(cfg.at("k"), "k"));
    const json spec{{"family", "moment"}};
    for (auto N : Ns) {
        const auto I = detail::interval_of(cfg.at("I"), N, "I");
        const auto t0 = std::chrono::steady_clock::now();
        const auto n = tuple_count_oracle(N, I, k);
        Row r = detail::base_row("oracle-count", spec, ctx.seed);
        r.set("curve_family", "").set("a", "").set("b", "");
        r.integer("N", N).integer("p", 2 * k).set("value", std::to_string(n)).integer("samples_x1", I.size());
        ctx.timed(r, detail::ms_since(t0));
        ctx.rows.push_back(r);
        if (ctx.has_assert("count"))
            ctx.check("N=" + std::to_string(N) + ": count", static_cast<double>(n), "==", ctx.assert_limit("count", 0));
    }
}

inline void cmd_weyl_verify(Context& ctx) {
    auto& cfg = ctx.cfg;
    detail::fill(cfg, "M", 64);
    detail::fill(cfg, "trials", 200);
    const auto Ms = detail::get_int_list(cfg, "M");
    const int trials = static_cast<int>(detail::get_int(cfg.at("trials"), "trials"));
    const double eps = detail::get_num(cfg, "eps");
    const json spec{{"family", "moment"}};
    for (auto M : Ms) {
        const auto t0 = std::chrono::steady_clock::now();
        MajorArcOptions opt;
        opt.workers = ctx.workers;
        const auto rep = verify_major_arcs(M, trials, ctx.seed, eps, opt);
        for (std::size_t i = 0; i < rep.rows.size(); ++i) {
            const auto& t = rep.rows[i];
            Row r = detail::base_row("weyl-verify", spec, ctx.seed);
            r.set("curve_family", "").set("a", "").set("b", "");
            r.integer("N", M).integer("j", static_cast<long long>(i)).integer("s", t.q);
            r.num("value", t.G_abs).num("ratio", t.on_ratio).num("stderr", t.poisson_err);
            if (t.off_tested) r.num("bound", t.off_fraction);
            ctx.rows.push_back(r);
        }
        const double md = static_cast<double>(M);
        const std::string tag = "M=" + std::to_string(M);
        ctx.check(tag + ": max on-arc ratio", rep.max_on_ratio, "<=", ctx.assert_limit("on_ratio_c", 8) * std::pow(md, eps));
        ctx.check(tag + ": max off-arc fraction", rep.max_off_fraction, "<=", ctx.assert_limit("off_fraction", 0.01));
        ctx.check(tag + ": max Poisson error / M", rep.max_poisson_err, "<=", ctx.assert_limit("poisson", 1e-6));
        ctx.extra[tag] = json{{"max_on_ratio", rep.max_on_ratio}, {"c_fit", rep.c_fit}, {"off_trials", rep.off_trials},
                              {"wall_ms", detail::ms_since(t0)}};
    }
}

inline void cmd_levelset_verify(Context& ctx) {
    auto& cfg = ctx.cfg;
    detail::fill(cfg, "trials", 100);
    if (cfg.at("curves") == default_config().at("curves"))
        cfg["curves"] = json::array({json{{"family", "moment"}}, json{{"family", "power"}, {"a", 1.5}, {"b", 0.5}}});
    const int trials = static_cast<int>(detail::get_int(cfg.at("trials"), "trials"));
    const int jmax = static_cast<int>(detail::get_int(cfg.at("jmax"), "jmax"));
    LevelMeasureOptions opt;
    opt.workers = ctx.workers;
    if (!cfg.at("window").is_null()) opt.window = detail::get_num(cfg, "window");
    if (!cfg.at("samples").is_null()) opt.grid = static_cast<int>(detail::get_int(cfg.at("samples"), "samples"));
    for (const auto& [spec, c] : detail::curves(cfg)) {
        const auto rep = verify_level_measures(c, trials, jmax, ctx.seed, opt);
        for (const auto& t : rep.rows) {
            Row r = detail::base_row("levelset-verify", spec, ctx.seed);
            r.integer("j", t.j).integer("s", t.worst_s).num("value", t.worst_measure).num("ratio", t.worst_ratio);
            r.num("bound", rep.ceiling).integer("samples_x1", t.samples);
            ctx.rows.push_back(r);
        }
        ctx.check(c.id() + ": max measure * sqrt(2^(j+s))", rep.max_ratio, "<=", ctx.assert_limit("max_ratio", 32));
        ctx.extra[c.id()] = json{{"max_ratio_by_case", rep.max_ratio_by_case}};
    }
}

inline void cmd_local_sums(Context& ctx) {
    auto& cfg = ctx.cfg;
    detail::fill(cfg, "M", json::array({16, 32, 64}));
    detail::fill(cfg, "window", json::array({0.5, 1.0}));
    const auto Ms = detail::get_int_list(cfg, "M");
    const auto cs = detail::get_num_list(cfg, "window");
    const json spec{{"family", "moment"}};
    for (auto M : Ms)
        for (double c : cs) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto rep = local_sum_check(M, c, ctx.workers);
            for (const auto& row : rep.rows) {
                Row r = detail::base_row("lemma76", spec, ctx.seed);
                r.set("curve_family", "").set("a", "").set("b", "");
                r.integer("N", M).integer("j", row.j).num("value", row.lhs).num("bound", row.rhs).num("ratio", row.ratio);
                r.num("stderr", row.raw_ratio);
                ctx.rows.push_back(r);
            }
            ctx.check("M=" + std::to_string(M) + " c=" + fmt(c) + ": max normalized ratio", rep.max_ratio, "<=",
                      ctx.assert_limit("max_ratio", 20));
            ctx.extra["M=" + std::to_string(M) + " c=" + fmt(c)] = json{{"full", rep.full}, {"wall_ms", detail::ms_since(t0)}};
        }
}

inline void cmd_lower_bound(Context& ctx) {
    auto& cfg = ctx.cfg;
    detail::fill(cfg, "p", 10);
    detail::fill(cfg, "alpha", 1.0);
    detail::fill(cfg, "beta", 1.0);
    detail::fill(cfg, "N", json::array({16, 64, 256}));
    const double p = detail::get_num(cfg, "p"), alpha = detail::get_num(cfg, "alpha"), beta = detail::get_num(cfg, "beta");
    const auto Ns = detail::get_int_list(cfg, "N");
    for (const auto& [spec, c] : detail::curves(cfg)) {
        std::vector<double> xs, ys;
        for (auto N : Ns) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto rep = lower_bound_blocks(c, N, p, alpha, beta);
            Row r = detail::base_row("lower-bound", spec, ctx.seed);
            r.integer("N", N).num("alpha", alpha).num("beta", beta).num("p", p);
            const auto& chosen = rep.chosen == "blocks" ? rep.blocks : rep.single;
            r.integer("s", chosen.M).num("value", rep.value).num("bound", rep.floor);
            r.num("ratio", rep.value / std::pow(static_cast<double>(N), p - 3));
            ctx.timed(r, detail::ms_since(t0));
            ctx.rows.push_back(r);
            xs.push_back(static_cast<double>(N));
            ys.push_back(rep.value);
        }
        if (xs.size() >= 2) {
            detail::fit_row(ctx, "lower-bound.fit", spec, xs, ys, c.id());
            ctx.check(c.id() + ": fitted exponent", ctx.fits[c.id()].get<double>(), ">=", ctx.assert_limit("slope_min", p - 3 + 0.15));
        }
    }
}

inline void cmd_decouple(Context& ctx) {
    auto& cfg = ctx.cfg;
    const auto op = detail::get_str(cfg, "op");
    const auto kind = coeff_kind_from(detail::get_str(cfg, "coeffs"));
    const CoeffFamily fam{kind, ctx.seed, {}, {1, 0}};
    BallOptions ball;
    ball.seed = ctx.seed;
    ball.workers = ctx.workers;
    if (!cfg.at("samples").is_null()) ball.samples = detail::get_int(cfg.at("samples"), "samples");
    const auto [spec, c] = detail::curves(cfg).front();
    std::vector<double> xs, ys;
    auto emit = [&](const std::string& exp, std::int64_t N, const RatioResult& r, double ms) {
        Row row = detail::base_row(exp, spec, ctx.seed);
        row.integer("N", N).num("value", r.lhs).num("bound", r.rhs).num("ratio", r.ratio).num("stderr", r.error);
        row.integer("samples_x1", r.samples);
        ctx.timed(row, ms);
        ctx.rows.push_back(row);
        xs.push_back(static_cast<double>(N));
        ys.push_back(r.ratio);
    };
    if (op == "parabola") {
        detail::fill(cfg, "N", json::array({64, 256, 1024}));
        for (auto N : detail::get_int_list(cfg, "N")) {
            const auto t0 = std::chrono::steady_clock::now();
            ParabolaOptions po;
            po.rho = detail::get_num(cfg, "rho");
            emit("decouple.parabola", N, parabola_ratio(N, [](double t) { return t * t; }, fam, po), detail::ms_since(t0));
        }
    } else if (op == "bilinear") {
        detail::fill(cfg, "N", json::array({16, 64}));
        detail::fill(cfg, "I1", json::array({0.5, 0.625}));
        detail::fill(cfg, "I2", json::array({0.875, 1.0}));
        const auto rhs_s = detail::get_str(cfg, "rhs");
        if (rhs_s != "l2" && rhs_s != "l6") throw ConfigError("rhs must be l2 or l6");
        const auto& a = cfg.at("I1");
        const auto& b = cfg.at("I2");
        const Interval I1{a[0].get<double>(), a[1].get<double>()}, I2{b[0].get<double>(), b[1].get<double>()};
        CoeffFamily f2 = fam;
        for (auto N : detail::get_int_list(cfg, "N")) {
            const auto t0 = std::chrono::steady_clock::now();
            emit("decouple.bilinear." + rhs_s, N,
                 bilinear_curve_ratio(N, c, I1, I2, fam, f2, rhs_s == "l2" ? BilinearRhs::L2 : BilinearRhs::L6, ball),
                 detail::ms_since(t0));
        }
    } else if (op == "surface") {
        detail::fill(cfg, "N", json::array({16, 64, 256}));
        const auto mode_s = detail::get_str(cfg, "mode");
        if (mode_s != "pointmass" && mode_s != "blocks") throw ConfigError("mode must be pointmass or blocks");
        SurfaceOptions so;
        so.ball = ball;
        if (cfg.at("samples").is_null()) so.ball.samples = std::int64_t{1} << 20;
        for (auto N : detail::get_int_list(cfg, "N")) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto s = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(N))));
            const std::int64_t M = cfg.at("M").is_null() ? s : detail::get_int(cfg.at("M"), "M");
            const auto psi = SurfacePsi::from_curve(c, static_cast<double>(N), 0.6 * N, 0.8 * N, 1);
            emit("decouple.surface." + mode_s, N,
                 surface_ratio(N, psi, fam, mode_s == "pointmass" ? SurfaceMode::PointMass : SurfaceMode::Blocks, M, so),
                 detail::ms_since(t0));
        }
    } else if (op == "transversality") {
        detail::fill(cfg, "N", json::array({64, 256}));
        detail::fill(cfg, "arcs", json::array({0.5, 0.9}));
        const auto arcs = detail::get_num_list(cfg, "arcs");
        if (arcs.size() != 2) throw ConfigError("arcs must be [l1, l2]");
        std::vector<double> same;
        for (auto N : detail::get_int_list(cfg, "N")) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto tr = transversality_check(N, c, arcs[0], arcs[1], fam, fam, 0, ball);
            const double ms = detail::ms_since(t0);
            for (int k = 0; k < 2; ++k) {
                Row row = detail::base_row(k ? "decouple.transversality.same" : "decouple.transversality", spec, ctx.seed);
                row.integer("N", N).num("value", k ? tr.same_raw : tr.raw).num("ratio", k ? tr.same_ratio : tr.ratio);
                row.num("stderr", k ? tr.same_error : tr.error).integer("samples_x1", tr.samples).integer("j", tr.waves);
                ctx.timed(row, ms);
                ctx.rows.push_back(row);
            }
            ctx.check("N=" + std::to_string(N) + ": separated N^4-normalized ratio", tr.raw, "<=", ctx.assert_limit("max_raw", 100));
            xs.push_back(static_cast<double>(N));
            ys.push_back(tr.ratio);
            same.push_back(tr.same_ratio);
        }
        if (same.size() >= 2) {
            ctx.fits["same-arc"] = fit_loglog(xs, same).slope;
            if (ctx.has_assert("same_growth_min"))
                ctx.check("same-arc growth, last N over first N", same.back() / same.front(), ">",
                          ctx.assert_limit("same_growth_min", 4));
        }
    } else {
        throw ConfigError("op must be parabola, bilinear, surface or transversality");
    }
    if (xs.size() >= 2) {
        const double slope = fit_loglog(xs, ys).slope;
        ctx.fits[op] = slope;
        Row r = detail::base_row("decouple." + op + ".fit", spec, ctx.seed);
        r.num("value", slope);
        ctx.rows.push_back(r);
        ctx.check(op + ": fitted slope", slope, "<=", ctx.assert_limit("slope_max", 0.25));
    }
}

inline void cmd_rescale_identity(Context& ctx) {
    auto& cfg = ctx.cfg;
    detail::fill(cfg, "N", 64);
    detail::fill(cfg, "trials", 100);
    if (cfg.at("curves") == default_config().at("curves"))
        cfg["curves"] = json::array({json{{"family", "moment"}}, json{{"family", "power"}, {"a", 1.5}, {"b", 0.5}}});
    const int trials = static_cast<int>(detail::get_int(cfg.at("trials"), "trials"));
    for (const auto& [spec, c] : detail::curves(cfg))
        for (auto N : detail::get_int_list(cfg, "N")) {
            const auto rep = rescale_identity_check(c, N, trials, ctx.seed);
            for (std::size_t i = 0; i < rep.rows.size(); ++i) {
                const auto& t = rep.rows[i];
                Row r = detail::base_row("rescale-identity", spec, ctx.seed);
                r.integer("N", N).integer("j", static_cast<long long>(i)).integer("s", t.M);
                r.num("value", t.lhs).num("bound", t.rhs).num("ratio", t.rel_err);
                ctx.rows.push_back(r);
            }
            ctx.check(c.id() + " N=" + std::to_string(N) + ": max relative error", rep.max_rel_err, "<=",
                      ctx.assert_limit("max_rel_err", 1e-9));
        }
}

// ---------------------------------------------------------------- driver

/// Validates the merged config and runs `command`. Library errors are
/// translated to exit codes; rows are only returned for completed runs.
inline RunResult run(const std::string& command, json cfg) {
    RunResult res;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (std::find(commands().begin(), commands().end(), command) == commands().end())
            throw ConfigError("unknown command '" + command + "'");
        if (cfg.at("schema_version") != kSchemaVersion) throw ConfigError("unsupported schema_version");
        Context ctx;
        ctx.seed = static_cast<std::uint64_t>(detail::get_int(cfg.at("seed"), "seed"));
        ctx.workers = static_cast<int>(detail::get_int(cfg.at("workers"), "workers"));
        if (ctx.workers < 1) throw ConfigError("workers must be >= 1");
        ctx.timing = cfg.at("record_timing").get<bool>();
        ctx.cfg = std::move(cfg);
        if (command == "conditions") cmd_conditions(ctx);
        else if (command == "moment") cmd_moment(ctx, false);
        else if (command == "bilinear-moment") cmd_moment(ctx, true);
        else if (command == "sweep-alpha") cmd_sweep_alpha(ctx);
        else if (command == "oracle-count") cmd_oracle_count(ctx);
        else if (command == "weyl-verify") cmd_weyl_verify(ctx);
        else if (command == "levelset-verify") cmd_levelset_verify(ctx);
        else if (command == "lemma76") cmd_local_sums(ctx);
        else if (command == "lower-bound") cmd_lower_bound(ctx);
        else if (command == "decouple") cmd_decouple(ctx);
        else cmd_rescale_identity(ctx);
        res.rows = std::move(ctx.rows);
        res.assertions = ctx.assertions;
        bool ok = true;
        json asserts = json::array();
        for (const auto& a : ctx.assertions) {
            ok = ok && a.pass;
            asserts.push_back(json{{"name", a.name}, {"value", a.value}, {"relation", a.relation}, {"limit", a.limit}, {"pass", a.pass}});
        }
        res.exit_code = ok ? 0 : 1;
        res.summary = json{{"schema_version", kSchemaVersion}, {"command", command}, {"config", ctx.cfg},
                           {"assertions", asserts},           {"fits", ctx.fits},    {"details", ctx.extra},
                           {"rows", res.rows.size()},         {"wall_ms", detail::ms_since(t0)},
                           {"exit_code", res.exit_code}};
    } catch (const ResourceError& e) {
        res = RunResult{};
        res.exit_code = 3;
        res.diagnostics = std::string("resource budget exceeded: ") + e.what();
    } catch (const ConfigError& e) {
        res = RunResult{};
        res.exit_code = 2;
        res.diagnostics = std::string("invalid config: ") + e.what();
    } catch (const json::exception& e) {
        res = RunResult{};
        res.exit_code = 2;
        res.diagnostics = std::string("invalid config: ") + e.what();
    } catch (const ArgumentError& e) {
        res = RunResult{};
        res.exit_code = 2;
        res.diagnostics = std::string("invalid arguments: ") + e.what();
    } catch (const RangeError& e) {
        res = RunResult{};
        res.exit_code = 2;
        res.diagnostics = std::string("invalid arguments: ") + e.what();
    } catch (const DomainError& e) {
        res = RunResult{};
        res.exit_code = 2;
        res.diagnostics = std::string("invalid arguments: ") + e.what();
    } catch (const std::exception& e) {
        res = RunResult{};
        res.exit_code = 1;
        res.diagnostics = std::string("run failed: ") + e.what();
    }
    return res;
}

/// Writes rows.csv and summary.json into `dir`.
inline void write_outputs(const RunResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "rows.csv", std::ios::binary) << r.csv();
    std::ofstream(dir / "summary.json", std::ios::binary) << r.summary.dump(2) << "\n";
}

}  // namespace esl::cli
