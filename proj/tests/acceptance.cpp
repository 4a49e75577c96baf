// Acceptance suite: one pass/fail line per criterion. Every scenario runs
// through the same command layer as the CLI, once with 1 thread and once
// with 8; the report files of the two runs must match byte for byte.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cli/commands.hpp"
#include "cli/output.hpp"
#include "mflow/parallel.hpp"

namespace fs = std::filesystem;
using namespace mflow::cli;

namespace {

struct Run {
    bool ok = false;       ///< command completed and all its checks passed
    std::string error;     ///< exception text, if any
    json report;
    double seconds = 0.0;
    bool identical = false;  ///< 1-thread and 8-thread files agree
    std::string mismatch;
};

fs::path scenario_dir() { return fs::path(MFLOW_SCENARIO_DIR); }

Outcome execute(const std::string& name, int threads, double* seconds) {
    const auto text = read_text(scenario_dir() / (name + ".json"));
    const json config = parse_config(text, name);
    mflow::set_thread_count(threads);
    const auto t0 = std::chrono::steady_clock::now();
    auto o = run_command(config.at("command").get<std::string>(), config);
    if (seconds) *seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    mflow::set_thread_count(0);
    return o;
}

std::map<std::string, std::string> files_in(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = read_text(e.path());
    return out;
}

Run run_scenario(const std::string& name, const fs::path& out) {
    Run r;
    try {
        const auto one = execute(name, 1, &r.seconds);
        write_outcome(out / "threads1" / name, one);
        const auto eight = execute(name, 8, nullptr);
        write_outcome(out / "threads8" / name, eight);
        r.ok = one.pass;
        r.report = one.report;
        const auto a = files_in(out / "threads1" / name), b = files_in(out / "threads8" / name);
        r.identical = a == b;
        if (!r.identical) {
            for (const auto& [f, text] : a)
                if (!b.count(f) || b.at(f) != text) r.mismatch += f + " ";
        }
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    return r;
}

// "name value/bound" for every check in the report.
std::string summarize(const std::string& scenario, const Run& r) {
    const auto num = [](const json& v) { return v.is_number() ? v.get<double>() : std::nan(""); };
    std::string out = scenario + ":";
    for (const auto& c : r.report.at("result").at("checks")) {
        out += fmt::format(" [{}] {}={:.4g}/{:.4g}", c.at("pass").get<bool>() ? "ok" : "x", c.at("name").get<std::string>(),
                           num(c.at("value")), num(c.at("bound")));
    }
    return out;
}

struct Criterion {
    int id;
    std::string title;
    std::vector<std::string> scenarios;
    double time_limit;  ///< seconds for the 1-thread runs together; 0 = none
};

}  // namespace

int main(int argc, char** argv) {
    const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
    fs::remove_all(out);

    const std::vector<Criterion> criteria{
        {1, "Ito identity, continuous case", {"ito_brownian"}, 60},
        {2, "Ito identity, jump case", {"ito_jump"}, 120},
        {3, "Ito identity, singular case", {"singular_common", "singular_idiosyncratic"}, 60},
        {4, "Convergence sweep", {"sweep_brownian"}, 300},
        {5, "Riccati oracle", {"lq_decoupled"}, 1},
        {6, "LQ optimality", {"lq_optimality"}, 300},
        {7, "LQ value match", {"lq_value"}, 120},
        {8, "MV closed forms and adjoint", {"mv_closed_form"}, 0},
        {9, "MV value check", {"mv_gamma_large", "mv_reflect"}, 300},
        {10, "Fokker-Planck consistency", {"fp_diffusion", "fp_jump"}, 120},
    };

    int failures = 0;
    bool all_identical = true;
    std::string mismatches;
    for (const auto& c : criteria) {
        std::vector<Run> runs;
        bool ok = true;
        double seconds = 0;
        std::string err;
        for (const auto& s : c.scenarios) {
            runs.push_back(run_scenario(s, out));
            const auto& r = runs.back();
            ok = ok && r.ok && r.error.empty();
            seconds += r.seconds;
            if (!r.error.empty()) err += fmt::format("{}: {} ", s, r.error);
            if (r.error.empty() && !r.identical) {
                all_identical = false;
                mismatches += fmt::format("{}[{}] ", s, r.mismatch);
            }
            if (!r.error.empty()) all_identical = false;
        }
        const bool in_time = c.time_limit <= 0 || seconds <= c.time_limit;
        const bool pass = ok && in_time;
        std::string detail;
        if (err.empty()) {
            for (std::size_t i = 0; i < runs.size(); ++i) detail += (i ? "; " : "") + summarize(c.scenarios[i], runs[i]);
        } else {
            detail = "error: " + err;
        }
        const std::string timing =
            c.time_limit > 0 ? fmt::format("{:.1f} s, limit {:.0f} s", seconds, c.time_limit) : fmt::format("{:.1f} s", seconds);
        std::printf("criterion %d: %s  %s; %s; %s\n", c.id, pass ? "PASS" : "FAIL", c.title.c_str(), detail.c_str(),
                    timing.c_str());
        std::fflush(stdout);
        if (!pass) ++failures;
    }
    std::printf("criterion 11: %s  Determinism at 1 vs 8 threads; %s\n", all_identical ? "PASS" : "FAIL",
                all_identical ? "every report and table byte-identical" : ("differences: " + mismatches).c_str());
    if (!all_identical) ++failures;
    std::printf("%d of 11 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
