#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cli/commands.hpp"
#include "cli/hash.hpp"
#include "cli/output.hpp"
#include "mflow/error.hpp"
#include "mflow/parallel.hpp"

namespace fs = std::filesystem;
using namespace mflow::cli;

namespace {

constexpr int exit_pass = 0, exit_tolerance = 1, exit_schema = 2, exit_simulation = 3;

struct Options {
    std::string config, out;
    int threads = 0;
    std::vector<std::string> overrides;
};

int run(const std::string& command, const Options& opt) {
    std::string text;
    try {
        text = read_text(opt.config);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_schema;
    }
    try {
        json config = parse_config(text, opt.config);
        for (const auto& o : opt.overrides) apply_override(config, o);
        mflow::set_thread_count(opt.threads);
        const auto outcome = run_command(command, config);

        json manifest = json::object();
        manifest["command"] = command;
        manifest["scenario"] = fs::path(opt.config).filename().string();
        manifest["scenario_sha1"] = git_blob_sha1(text);
        manifest["overrides"] = opt.overrides;
        manifest["config"] = config;
        std::vector<std::string> files{"report.json", "summary.txt"};
        for (const auto& t : outcome.tables) files.push_back(t.first);
        manifest["outputs"] = files;
        write_outcome(opt.out, outcome);
        write_text(fs::path(opt.out) / "manifest.json", manifest.dump(2) + "\n");
        std::cout << outcome.summary;
        return outcome.pass ? exit_pass : exit_tolerance;
    } catch (const SchemaError& e) {
        std::cerr << "schema error at " << e.what() << "\n";
        return exit_schema;
    } catch (const mflow::InvalidArgument& e) {
        std::cerr << "invalid scenario: " << e.what() << "\n";
        return exit_schema;
    } catch (const mflow::SimulationError& e) {
        std::cerr << "simulation failure: " << e.what() << "\n";
        return exit_simulation;
    } catch (const std::exception& e) {
        std::cerr << "internal failure: " << e.what() << "\n";
        return exit_simulation;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Measure-flow verification experiments"};
    app.require_subcommand(1);
    Options opt;
    std::string chosen;
    for (const auto& [name, fn] : command_table()) {
        (void)fn;
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", opt.config, "scenario JSON")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out, "output directory")->required();
        sub->add_option("--threads", opt.threads, "worker threads (0: runtime default)")->check(CLI::NonNegativeNumber);
        sub->add_option("--override", opt.overrides, "key.path=value, repeatable");
        sub->callback([&chosen, name = name] { chosen = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_schema;
    }
    return run(chosen, opt);
}
