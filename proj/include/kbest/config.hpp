#pragma once

// Run configuration files: flat `key = value` lines grouped in [sections].
//
//   [link]       snr_db, trials, seed, channel, noiseless, threads
//   [detector]   nt, nr, mod, k, rlimit, arithmetic, lll_delta, regularize
//   [degradation] fixed_format, target_ber
//   [run]        command, outputs, version, timestamp   (written into manifests)
//
// '#' starts a comment. A manifest is a config file, so re-running it
// reproduces the run.

#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbest/simkit.hpp"

namespace kbest {

inline constexpr const char* kVersion = "0.1.0";

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::size_t line, const std::string& what)
        : std::runtime_error(line ? "config line " + std::to_string(line) + ": " + what : "config: " + what) {}
};

struct RunManifest {
    sim::LinkConfig link;
    QFormat fixed_format{};
    double target_ber = 1e-3;
    std::string command;
    std::vector<std::string> outputs;
    std::string version = kVersion;
    std::string timestamp;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

inline RunManifest parse_config(std::istream& is) {
    using detail::trim;
    RunManifest out;
    std::string section;
    std::string line;
    std::size_t lineno = 0;
    bool have_snr = false;

    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(lineno, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "link" && section != "detector" && section != "degradation" && section != "run")
                throw ConfigError(lineno, "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(lineno, "expected key = value");
        if (section.empty()) throw ConfigError(lineno, "key outside of any [section]");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        auto as_uint = [&]() -> std::uint64_t {
            std::size_t used = 0;
            unsigned long long v = 0;
            try {
                if (!value.empty() && value.front() == '-') throw std::invalid_argument("negative");
                v = std::stoull(value, &used, 0);
            } catch (...) {
                throw ConfigError(lineno, "'" + key + "' needs a nonnegative integer, got '" + value + "'");
            }
            if (used != value.size()) throw ConfigError(lineno, "'" + key + "' has trailing characters");
            return v;
        };
        auto as_double = [&](const std::string& text) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(text, &used);
            } catch (...) {
                throw ConfigError(lineno, "'" + key + "' needs a number, got '" + text + "'");
            }
            if (used != text.size()) throw ConfigError(lineno, "'" + key + "' has trailing characters");
            return v;
        };
        auto as_bool = [&]() {
            if (value == "true" || value == "1" || value == "yes") return true;
            if (value == "false" || value == "0" || value == "no") return false;
            throw ConfigError(lineno, "'" + key + "' needs true/false");
        };
        auto as_format = [&]() {
            try {
                return QFormat::parse(value);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(lineno, e.what());
            }
        };

        auto& link = out.link;
        auto& det = link.detector;
        if (section == "link") {
            if (key == "snr_db") {
                link.snr_db.clear();
                for (const auto& item : detail::split_list(value)) link.snr_db.push_back(as_double(item));
                have_snr = true;
            } else if (key == "trials") {
                link.trials_per_snr = as_uint();
            } else if (key == "seed") {
                link.seed = as_uint();
            } else if (key == "channel") {
                link.channel_model = value;
            } else if (key == "noiseless") {
                link.noiseless = as_bool();
            } else if (key == "threads") {
                link.threads = as_uint();
            } else {
                throw ConfigError(lineno, "unknown key '" + key + "' in [link]");
            }
        } else if (section == "detector") {
            if (key == "nt") det.n_t = as_uint();
            else if (key == "nr") det.n_r = as_uint();
            else if (key == "mod") det.m = static_cast<unsigned>(as_uint());
            else if (key == "k") det.k = as_uint();
            else if (key == "rlimit") det.rlimit = as_uint();
            else if (key == "arithmetic") {
                if (value == "float") det.fixed.reset();
                else det.fixed = as_format();
            } else if (key == "lll_delta") det.lll_delta = as_double(value);
            else if (key == "regularize") det.regularize = as_bool();
            else throw ConfigError(lineno, "unknown key '" + key + "' in [detector]");
        } else if (section == "degradation") {
            if (key == "fixed_format") out.fixed_format = as_format();
            else if (key == "target_ber") out.target_ber = as_double(value);
            else throw ConfigError(lineno, "unknown key '" + key + "' in [degradation]");
        } else {
            if (key == "command") out.command = value;
            else if (key == "outputs") out.outputs = detail::split_list(value);
            else if (key == "version") out.version = value;
            else if (key == "timestamp") out.timestamp = value;
            else throw ConfigError(lineno, "unknown key '" + key + "' in [run]");
        }
    }
    if (!have_snr) throw ConfigError(0, "[link] snr_db is required");
    try {
        out.link.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(0, e.what());
    }
    return out;
}

inline void write_config(std::ostream& os, const RunManifest& m) {
    const auto& link = m.link;
    const auto& det = link.detector;
    os << "[link]\nsnr_db = ";
    for (std::size_t i = 0; i < link.snr_db.size(); ++i) os << (i ? ", " : "") << detail::fmt_double(link.snr_db[i]);
    os << "\ntrials = " << link.trials_per_snr << "\nseed = " << link.seed << "\nchannel = " << link.channel_model
       << "\nnoiseless = " << (link.noiseless ? "true" : "false") << "\nthreads = " << link.threads << "\n\n";
    os << "[detector]\nnt = " << det.n_t << "\nnr = " << det.n_r << "\nmod = " << det.m << "\nk = " << det.k
       << "\nrlimit = " << det.rlimit << "\narithmetic = " << (det.fixed ? det.fixed->to_string() : "float")
       << "\nlll_delta = " << detail::fmt_double(det.lll_delta)
       << "\nregularize = " << (det.regularize ? "true" : "false") << "\n\n";
    os << "[degradation]\nfixed_format = " << m.fixed_format.to_string()
       << "\ntarget_ber = " << detail::fmt_double(m.target_ber) << "\n";
    if (!m.command.empty() || !m.outputs.empty() || !m.timestamp.empty()) {
        os << "\n[run]\ncommand = " << m.command << "\noutputs = ";
        for (std::size_t i = 0; i < m.outputs.size(); ++i) os << (i ? ", " : "") << m.outputs[i];
        os << "\nversion = " << m.version << "\ntimestamp = " << m.timestamp << "\n";
    }
}

}  // namespace kbest
