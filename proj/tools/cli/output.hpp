#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "cli/commands.hpp"

namespace mflow::cli {

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << text;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline json parse_config(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("<root>", fmt::format("{} is not valid JSON: {}", origin, e.what()));
    }
}

/// report.json, summary.txt and the CSV tables; manifest.json is written by the caller.
inline void write_outcome(const std::filesystem::path& dir, const Outcome& o) {
    std::filesystem::create_directories(dir);
    write_text(dir / "report.json", o.report.dump(2) + "\n");
    write_text(dir / "summary.txt", o.summary);
    for (const auto& [name, csv] : o.tables) write_text(dir / name, csv);
}

}  // namespace mflow::cli
