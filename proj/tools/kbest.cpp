// kbest: command-line front end for the LR-aided complex K-best detector.
//
// Exit codes: 0 success, 1 validation, 2 numerical failure, 3 I/O.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "kbest/config.hpp"
#include "kbest/detector.hpp"
#include "kbest/pipeline.hpp"
#include "kbest/simkit.hpp"

namespace {

using namespace kbest;

enum ExitCode { kOk = 0, kValidation = 1, kNumerical = 2, kIo = 3 };

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for reading");
    return f;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    return f;
}

CMatrix load_matrix(const std::string& path) {
    auto f = open_in(path);
    try {
        return read_matrix(f);
    } catch (const ParseError& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

/// Seed precedence: --seed, then KBEST_SEED, then the config file.
void apply_seed_overrides(sim::LinkConfig& link, const CLI::Option* seed_opt, std::uint64_t seed_flag) {
    if (const char* env = std::getenv("KBEST_SEED"); env && *env) {
        try {
            link.seed = std::stoull(env, nullptr, 0);
        } catch (...) {
            throw std::invalid_argument(std::string("KBEST_SEED is not an integer: '") + env + "'");
        }
    }
    if (seed_opt->count() > 0) link.seed = seed_flag;
}

RunManifest load_config(const std::string& path) {
    auto f = open_in(path);
    return parse_config(f);
}

void write_manifest(const std::string& path, RunManifest m, const std::string& command,
                    std::vector<std::string> outputs) {
    m.command = command;
    m.outputs = std::move(outputs);
    m.version = kVersion;
    m.timestamp = utc_timestamp();
    auto f = open_out(path);
    write_config(f, m);
}

std::string join_symbols(const CVector& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s%g%+gi", i ? " " : "", v[i].real(), v[i].imag());
        out += buf;
    }
    return out;
}

DetectorConfig detector_from_flags(unsigned mod, std::size_t k, std::size_t rlimit, const std::string& arith) {
    DetectorConfig cfg;
    cfg.m = mod;
    cfg.k = k;
    cfg.rlimit = rlimit;
    if (arith != "float") cfg.fixed = QFormat::parse(arith);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LR-aided complex K-best MIMO detector: detection, BER sweeps, node audits, pipeline reports"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // detect
    auto* detect_cmd = app.add_subcommand("detect", "Detect one received vector");
    std::string channel_path, received_path, trace_path, fsm_path;
    unsigned det_mod = 64;
    std::size_t det_k = 4, det_rlimit = 4;
    std::string det_arith = "float";
    double det_noise = 0.0;
    detect_cmd->add_option("--channel", channel_path, "Channel matrix file (N_R x N_T)")->required();
    detect_cmd->add_option("--received", received_path, "Received vector file (N_R x 1)")->required();
    detect_cmd->add_option("--mod", det_mod, "Constellation order")->capture_default_str();
    detect_cmd->add_option("--k", det_k, "List size K")->capture_default_str();
    detect_cmd->add_option("--rlimit", det_rlimit, "Real-axis expansion budget")->capture_default_str();
    detect_cmd->add_option("--arith", det_arith, "float or a Q-format such as s1.7.8")->capture_default_str();
    detect_cmd->add_option("--noise-power", det_noise, "N0 used for the MMSE extension")->capture_default_str();
    detect_cmd->add_option("--trace", trace_path, "Write the node trace CSV here");
    detect_cmd->add_option("--fsm", fsm_path, "Write the cycle schedule CSV here");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "BER sweep from a config file or manifest");
    std::string sweep_config, sweep_out = "ber.csv", sweep_manifest;
    std::uint64_t sweep_seed = 0;
    std::size_t sweep_threads = 0;
    sweep_cmd->add_option("config", sweep_config, "Config file")->required();
    sweep_cmd->add_option("--out", sweep_out, "BER CSV path")->capture_default_str();
    sweep_cmd->add_option("--manifest", sweep_manifest, "Manifest path (default: <out>.manifest)");
    auto* sweep_seed_opt = sweep_cmd->add_option("--seed", sweep_seed, "Override the seed");
    auto* sweep_threads_opt = sweep_cmd->add_option("--threads", sweep_threads, "Worker threads");

    // degradation
    auto* deg_cmd = app.add_subcommand("degradation", "Fixed-vs-floating SNR gap at a target BER");
    std::string deg_config, deg_out = "degradation", deg_format;
    double deg_target = 0.0;
    std::uint64_t deg_seed = 0;
    std::size_t deg_threads = 0;
    deg_cmd->add_option("config", deg_config, "Config file")->required();
    auto* deg_target_opt = deg_cmd->add_option("--target-ber", deg_target, "Target BER");
    auto* deg_format_opt = deg_cmd->add_option("--format", deg_format, "Fixed-point format, e.g. s1.7.8");
    deg_cmd->add_option("--out", deg_out, "Output prefix for <prefix>_float.csv / <prefix>_fixed.csv")
        ->capture_default_str();
    auto* deg_seed_opt = deg_cmd->add_option("--seed", deg_seed, "Override the seed");
    auto* deg_threads_opt = deg_cmd->add_option("--threads", deg_threads, "Worker threads");

    // audit
    auto* audit_cmd = app.add_subcommand("audit", "Node-count audit against the per-level and total budgets");
    std::string audit_config;
    std::uint64_t audit_seed = 0;
    audit_cmd->add_option("config", audit_config, "Config file")->required();
    auto* audit_seed_opt = audit_cmd->add_option("--seed", audit_seed, "Override the seed");

    // pipeline
    auto* pipe_cmd = app.add_subcommand("pipeline", "Throughput / latency / NHE of the pipelined hardware");
    double freq_mhz = 0.0, gates_kg = 0.0;
    std::size_t pipe_k = 4, pipe_rlimit = 4, pipe_nt = 8;
    unsigned pipe_mod = 64;
    bool pipe_csv = false;
    pipe_cmd->add_option("--freq-mhz", freq_mhz, "Clock frequency in MHz")->required();
    pipe_cmd->add_option("--gates-kg", gates_kg, "Gate count in kilo-gates")->required();
    pipe_cmd->add_option("--k", pipe_k, "List size K")->capture_default_str();
    pipe_cmd->add_option("--rlimit", pipe_rlimit, "Rlimit")->capture_default_str();
    pipe_cmd->add_option("--nt", pipe_nt, "Transmit antennas / pipeline stages")->capture_default_str();
    pipe_cmd->add_option("--mod", pipe_mod, "Constellation order")->capture_default_str();
    pipe_cmd->add_flag("--csv", pipe_csv, "Print only the CSV row (with header)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kValidation;
    }

    try {
        if (detect_cmd->parsed()) {
            const CMatrix h = load_matrix(channel_path);
            const CVector y = matrix_to_vector(load_matrix(received_path));
            DetectorConfig cfg = detector_from_flags(det_mod, det_k, det_rlimit, det_arith);
            cfg.n_r = h.rows();
            cfg.n_t = h.cols();
            cfg.validate();
            if (y.size() != h.rows())
                throw std::invalid_argument("received vector has " + std::to_string(y.size()) +
                                            " entries, channel has " + std::to_string(h.rows()) + " rows");
            if (det_noise < 0.0) throw std::invalid_argument("--noise-power must be nonnegative");
            DetectTrace trace;
            const Decision d = lr_kbest_receive(h, y, det_noise, cfg, &trace);
            std::cout << "symbols: " << join_symbols(d.symbols) << '\n';
            std::cout << "ped: " << detail::fmt_g(d.detection.candidates.front().ped) << '\n';
            std::cout << "nodes: " << d.detection.total_nodes << " (budget " << cfg.total_node_budget() << ")\n";
            std::cout << "nodes_per_level:";
            for (std::size_t l = cfg.n_t; l >= 1; --l) std::cout << ' ' << d.detection.nodes_per_level[l - 1];
            std::cout << '\n';
            if (!trace_path.empty()) {
                auto f = open_out(trace_path);
                write_trace_csv(f, trace);
            }
            if (!fsm_path.empty()) {
                const DetectTrace one[] = {trace};
                const PipelineRun run = pipeline_run(one, cfg);
                auto f = open_out(fsm_path);
                write_fsm_csv(f, run.trace);
            }
            return kOk;
        }

        if (sweep_cmd->parsed()) {
            RunManifest m = load_config(sweep_config);
            apply_seed_overrides(m.link, sweep_seed_opt, sweep_seed);
            if (sweep_threads_opt->count()) m.link.threads = sweep_threads;
            m.link.validate();
            const sim::BerReport rep = sim::run_link(m.link);
            {
                auto f = open_out(sweep_out);
                sim::write_ber_csv(f, rep);
            }
            sim::write_ber_csv(std::cout, rep);
            for (const auto& p : rep.points)
                if (p.discarded) std::cerr << "snr " << p.snr_db << ": " << p.discarded << " singular trials discarded\n";
            write_manifest(sweep_manifest.empty() ? sweep_out + ".manifest" : sweep_manifest, m, "sweep",
                           {sweep_out});
            return kOk;
        }

        if (deg_cmd->parsed()) {
            RunManifest m = load_config(deg_config);
            apply_seed_overrides(m.link, deg_seed_opt, deg_seed);
            if (deg_threads_opt->count()) m.link.threads = deg_threads;
            if (deg_target_opt->count()) m.target_ber = deg_target;
            if (deg_format_opt->count()) m.fixed_format = QFormat::parse(deg_format);
            m.link.validate();
            const std::string flt_path = deg_out + "_float.csv", fix_path = deg_out + "_fixed.csv";
            sim::DegradationResult r;
            try {
                r = sim::fixed_float_degradation(m.link, m.fixed_format, m.target_ber);
            } catch (const sim::InsufficientRangeError& e) {
                std::cerr << "error: " << e.what() << '\n';
                return kValidation;
            }
            {
                auto f = open_out(flt_path);
                sim::write_ber_csv(f, r.reference);
            }
            {
                auto f = open_out(fix_path);
                sim::write_ber_csv(f, r.test);
            }
            write_manifest(deg_out + ".manifest", m, "degradation", {flt_path, fix_path});
            std::cout << "format=" << m.fixed_format.to_string() << '\n'
                      << "target_ber=" << detail::fmt_g(m.target_ber) << '\n'
                      << "snr_float_db=" << detail::fmt_g(r.snr_reference) << '\n'
                      << "snr_fixed_db=" << detail::fmt_g(r.snr_test) << '\n'
                      << "gap_db=" << detail::fmt_g(r.gap_db) << '\n';
            return kOk;
        }

        if (audit_cmd->parsed()) {
            RunManifest m = load_config(audit_config);
            apply_seed_overrides(m.link, audit_seed_opt, audit_seed);
            m.link.validate();
            const sim::BerReport rep = sim::run_link(m.link);
            const auto& det = m.link.detector;
            bool ok = true;
            std::cout << "snr_db,trials,max_level_nodes,level_budget,max_total_nodes,total_budget,mean_nodes,within\n";
            for (const auto& p : rep.points) {
                const bool within = p.max_level_nodes <= det.level_node_budget() &&
                                    p.max_nodes <= det.total_node_budget() && p.pops_monotone;
                ok = ok && within;
                char buf[200];
                std::snprintf(buf, sizeof buf, "%.6g,%zu,%zu,%zu,%zu,%zu,%.6f,%s\n", p.snr_db, p.trials,
                              p.max_level_nodes, det.level_node_budget(), p.max_nodes, det.total_node_budget(),
                              p.mean_nodes, within ? "yes" : "no");
                std::cout << buf;
            }
            return ok ? kOk : kNumerical;
        }

        if (pipe_cmd->parsed()) {
            if (!(freq_mhz > 0.0)) throw std::invalid_argument("--freq-mhz must be positive");
            if (gates_kg < 0.0) throw std::invalid_argument("--gates-kg must be nonnegative");
            DetectorConfig cfg;
            cfg.n_t = pipe_nt;
            cfg.n_r = pipe_nt;
            cfg.m = pipe_mod;
            cfg.k = pipe_k;
            cfg.rlimit = pipe_rlimit;
            cfg.validate();
            const PipelineReport r = report(freq_mhz * 1e6, cfg, gates_kg);
            if (!pipe_csv) write_report_kv(std::cout, r);
            write_report_csv(std::cout, r);
            return kOk;
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const RankDeficientError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    } catch (const SingularChannelError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    }
    return kValidation;
}
