// Acceptance run: one PASS/FAIL line per criterion. Every measurement goes
// through the CLI runner so the reproducibility check can replay it.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <expsumlab/cli.hpp>

namespace cli = esl::cli;

namespace {

struct Job {
    std::string command;
    std::vector<std::string> sets;
    cli::json config() const {
        auto cfg = cli::merge_config(cli::json::object());
        for (const auto& s : sets) cli::apply_override(cfg, s);
        return cfg;
    }
};

struct Verdict {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string title;
    double limit_s;
    std::vector<Job> jobs;
    std::function<Verdict(const std::vector<cli::RunResult>&)> judge;
};

std::size_t column(const char* name) {
    for (std::size_t i = 0; i < cli::columns().size(); ++i)
        if (std::string(name) == cli::columns()[i]) return i;
    return 0;
}

double num(const cli::Row& r, const char* col) {
    const auto& s = r.cells[column(col)];
    return s.empty() ? std::nan("") : std::stod(s);
}

std::vector<const cli::Row*> rows_of(const cli::RunResult& r, const std::string& experiment) {
    std::vector<const cli::Row*> out;
    for (const auto& row : r.rows)
        if (row.cells[0] == experiment) out.push_back(&row);
    return out;
}

/// All runner assertions passed; detail names the first failure or the worst margin.
Verdict from_assertions(const std::vector<cli::RunResult>& rs, const std::string& label) {
    for (const auto& r : rs) {
        if (r.exit_code == 2 || r.exit_code == 3) return {false, r.diagnostics};
        for (const auto& a : r.assertions)
            if (!a.pass) return {false, a.name + " = " + cli::fmt(a.value) + ", need " + a.relation + " " + cli::fmt(a.limit)};
    }
    double worst = 0;
    std::string name;
    for (const auto& r : rs)
        for (const auto& a : r.assertions)
            if (a.relation == "<=" && a.limit > 0 && a.value / a.limit >= worst) {
                worst = a.value / a.limit;
                name = a.name + " = " + cli::fmt(a.value) + " (limit " + cli::fmt(a.limit) + ")";
            }
    return {true, label + (name.empty() ? "" : "; largest: " + name)};
}

std::string short_num(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.4g", v);
    return b;
}

}  // namespace

int main() {
    std::vector<Criterion> cs;

    cs.push_back({1, "slice moment equals tuple count", 60,
                  {{"moment", {"N=[4,6,8]", "p=12", "slice=true", "assert.oracle=1e-9"}}},
                  [](const std::vector<cli::RunResult>& r) { return from_assertions(r, "N = 4, 6, 8 at 1e-9"); }});

    cs.push_back({2, "p = 12 moment exponent in [8.3, 9.7]", 3600,
                  {{"moment", {"N=[4,6,8,12,16]", "p=12", "alpha=1.5", "beta=1.5"}}},
                  [](const std::vector<cli::RunResult>& r) -> Verdict {
                      if (r[0].exit_code != 0) return from_assertions(r, "");
                      const auto rows = rows_of(r[0], "moment");
                      std::vector<double> xs, ys;
                      for (std::size_t i = rows.size() - 3; i < rows.size(); ++i) {
                          xs.push_back(num(*rows[i], "N"));
                          ys.push_back(num(*rows[i], "value"));
                      }
                      const double slope = esl::fit_loglog(xs, ys).slope;
                      return {slope >= 8.3 && slope <= 9.7, "slope over N = 8, 12, 16 is " + short_num(slope)};
                  }});

    cs.push_back({3, "major-arc bound at M = 64", 120,
                  {{"weyl-verify", {"M=64", "trials=200"}}},
                  [](const std::vector<cli::RunResult>& r) { return from_assertions(r, "200 trials"); }});

    cs.push_back({4, "level-set measures at most 32", 120,
                  {{"levelset-verify",
                    {"trials=100", "jmax=10", R"(curves=[{"family":"moment"},{"family":"power","a":1.5,"b":0.5}])"}}},
                  [](const std::vector<cli::RunResult>& r) { return from_assertions(r, "100 pairs per curve"); }});

    cs.push_back({5, "local sixth-moment sums within 20 (log2 M)^3", 600,
                  {{"lemma76", {"M=[16,32,64]", "window=[0.5,1]"}}},
                  [](const std::vector<cli::RunResult>& r) { return from_assertions(r, "M = 16, 32, 64, c = 1/2, 1"); }});

    cs.push_back({6, "block rescaling identity", 60,
                  {{"rescale-identity",
                    {"N=64", "trials=100", R"(curves=[{"family":"moment"},{"family":"power","a":1.5,"b":0.5}])"}}},
                  [](const std::vector<cli::RunResult>& r) { return from_assertions(r, "100 trials per curve"); }});

    cs.push_back({7, "p = 10 block lower bound exponent at least 7.15", 600,
                  {{"lower-bound", {"N=[16,64,256]", "p=10", "alpha=1", "beta=1", "assert.slope_min=7.15"}}},
                  [](const std::vector<cli::RunResult>& r) -> Verdict {
                      auto v = from_assertions(r, "");
                      if (r[0].exit_code == 0 || r[0].exit_code == 1)
                          v.detail = "fitted exponent " + short_num(r[0].summary["fits"].begin()->get<double>()) +
                                     (v.pass ? "" : "; " + v.detail);
                      return v;
                  }});

    cs.push_back(
        {8, "decoupling ratios", 900,
         {{"decouple", {"op=\"parabola\"", "coeffs=\"one-hot\"", "N=[64]"}},
          {"decouple", {"op=\"bilinear\"", "coeffs=\"one-hot\"", "N=[64]", "samples=65536"}},
          {"decouple", {"op=\"surface\"", "coeffs=\"one-hot\"", "N=[64]", "samples=65536"}},
          {"decouple", {"op=\"transversality\"", "coeffs=\"one-hot\"", "N=[64]", "samples=65536"}},
          {"decouple", {"op=\"parabola\"", "coeffs=\"random-signs\"", "N=[64,256,1024]", "assert.slope_max=0.2"}},
          {"decouple", {"op=\"transversality\"", "coeffs=\"random-signs\"", "N=[256]"}},
          {"decouple", {"op=\"transversality\"", "coeffs=\"constant\"", "N=[64,256]", "assert.same_growth_min=4",
                        "assert.slope_max=1e300"}}},
         [](const std::vector<cli::RunResult>& r) -> Verdict {
             for (const auto& x : r)
                 if (x.exit_code == 2 || x.exit_code == 3) return {false, x.diagnostics};
             std::vector<std::string> bad;
             double worst_one = 0;
             for (int k = 0; k < 4; ++k)
                 for (const auto& row : r[static_cast<std::size_t>(k)].rows)
                     if (row.cells[0].find(".fit") == std::string::npos && row.cells[0].find(".same") == std::string::npos)
                         worst_one = std::max(worst_one, std::abs(num(row, "ratio") - 1));
             if (!(worst_one <= 1e-9)) bad.push_back("one-hot deviation " + short_num(worst_one));
             const double slope = r[4].summary["fits"]["parabola"].get<double>();
             if (!(slope <= 0.2)) bad.push_back("parabola slope " + short_num(slope));
             const double sep = num(*rows_of(r[5], "decouple.transversality")[0], "value");
             if (!(sep <= 100)) bad.push_back("separated ratio " + short_num(sep));
             const auto same = rows_of(r[6], "decouple.transversality.same");
             const double growth = num(*same[1], "ratio") / num(*same[0], "ratio");
             if (!(growth > 4)) bad.push_back("same-arc growth 64 -> 256 is " + short_num(growth) + " (need > 4)");
             std::string d = "one-hot max deviation " + short_num(worst_one) + ", parabola slope " + short_num(slope) +
                             ", separated ratio at 256 " + short_num(sep) + ", same-arc growth " + short_num(growth);
             if (!bad.empty()) {
                 d += "; failing:";
                 for (const auto& b : bad) d += " " + b + ";";
             }
             return {bad.empty(), d};
         }});

    bool all = true;
    std::vector<std::vector<std::string>> csvs;
    for (const auto& c : cs) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<cli::RunResult> results;
        std::vector<std::string> csv;
        for (const auto& j : c.jobs) {
            results.push_back(cli::run(j.command, j.config()));
            csv.push_back(results.back().csv());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        auto v = c.judge(results);
        if (secs > c.limit_s) {
            v.pass = false;
            v.detail += "; runtime " + short_num(secs) + " s over " + short_num(c.limit_s) + " s";
        }
        all = all && v.pass;
        std::printf("%s criterion %d (%s): %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", c.id, c.title.c_str(),
                    v.detail.c_str(), secs);
        std::fflush(stdout);
        csvs.push_back(csv);
    }

    // Replay every job with a different worker count.
    const auto t0 = std::chrono::steady_clock::now();
    int mismatches = 0, jobs = 0;
    for (std::size_t i = 0; i < cs.size(); ++i)
        for (std::size_t k = 0; k < cs[i].jobs.size(); ++k) {
            auto cfg = cs[i].jobs[k].config();
            cfg["workers"] = 3;
            ++jobs;
            if (cli::run(cs[i].jobs[k].command, cfg).csv() != csvs[i][k]) {
                ++mismatches;
                std::printf("  replay mismatch: criterion %d job %zu\n", cs[i].id, k);
            }
        }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool rep = mismatches == 0;
    all = all && rep;
    std::printf("%s criterion 9 (byte-identical CSV on replay with 3 workers): %d of %d jobs identical [%.1f s]\n",
                rep ? "PASS" : "FAIL", jobs - mismatches, jobs, secs);
    return all ? 0 : 1;
}
