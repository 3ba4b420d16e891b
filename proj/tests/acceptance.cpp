// Acceptance runner: one PASS/FAIL line per check, grouped by criterion.
// Exit status is nonzero when any check fails.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "kbest/pipeline.hpp"
#include "kbest/simkit.hpp"
#include "oracles.hpp"

using namespace kbest;

namespace {

int failures = 0;
bool pops_ok = true;  // pop-order monotonicity over criteria 2-4

void check(bool ok, const char* id, const std::string& detail) {
    std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct Shell {
    int code = -1;
    std::string out;
};

Shell shell(const std::string& args) {
    const std::string cmd = std::string(KBEST_CLI) + " " + args + " 2>&1";
    Shell r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    std::array<char, 4096> buf;
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

std::string csv(const sim::BerReport& r) {
    std::ostringstream os;
    sim::write_ber_csv(os, r);
    return os.str();
}

void note_pops(const sim::BerReport& r) {
    for (const auto& p : r.points) pops_ok = pops_ok && p.pops_monotone;
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

// ---------------------------------------------------------------------------

void criterion1() {
    const Shell r = shell("pipeline --freq-mhz 181.8 --gates-kg 63.75 --k 4 --rlimit 4 --nt 8 --mod 64");
    check(r.code == 0, "C1 pipeline command", fmt("exit %d", r.code));
    std::map<std::string, double> kv;
    std::istringstream is(r.out);
    for (std::string line; std::getline(is, line);) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = std::atof(line.c_str() + eq + 1);
    }
    // Four significant figures: relative tolerance 5e-4.
    const double tol = 5e-4;
    const struct {
        const char* id;
        const char* key;
        double want;
        const char* unit;
    } rows[] = {
        {"C1 throughput", "throughput_mbps", 1090.8, "Mbps"},
        {"C1 latency per level", "latency_per_level_us", 0.044, "us"},
        {"C1 clock period", "clock_period_ns", 5.5, "ns"},
        {"C1 NHE", "nhe_kg_per_mbps", 0.0585, "kG/Mbps"},
    };
    for (const auto& row : rows) {
        const double got = kv.count(row.key) ? kv[row.key] : std::nan("");
        check(rel(got, row.want) <= tol, row.id,
              fmt("%.10g %s vs %.6g (rel err %.2e, tol %.0e)", got, row.unit, row.want, rel(got, row.want), tol));
    }
}

void criterion2() {
    sim::LinkConfig link;
    link.snr_db = {20, 28};
    link.trials_per_snr = 10000;
    link.seed = 2;
    const sim::BerReport rep = sim::run_link(link);
    note_pops(rep);
    std::size_t runs = 0, max_level = 0, max_total = 0;
    for (const auto& p : rep.points) {
        runs += p.trials;
        max_level = std::max(max_level, p.max_level_nodes);
        max_total = std::max(max_total, p.max_nodes);
    }
    check(runs >= 10000, "C2 detections", fmt("%zu 8x8 64QAM detections (K = Rlimit = 4)", runs));
    check(max_level <= 19, "C2 per-level nodes", fmt("max %zu (bound 19)", max_level));
    check(max_total <= 152, "C2 total nodes", fmt("max %zu (bound 152)", max_total));
}

void criterion3() {
    sim::LinkConfig link;
    link.snr_db = {26, 27, 28, 29, 30, 31, 32};
    link.trials_per_snr = 200000;
    link.seed = 3;
    const auto t0 = std::chrono::steady_clock::now();
    double gap = std::nan("");
    sim::DegradationResult d;
    bool bracketed = true;
    try {
        d = sim::fixed_float_degradation(link, QFormat{7, 8}, 1e-3);
        gap = d.gap_db;
    } catch (const sim::InsufficientRangeError& e) {
        bracketed = false;
        std::printf("      %s\n", e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (bracketed) {
        note_pops(d.reference);
        note_pops(d.test);
        std::printf("      snr_db   ber_float      ber_s1.7.8     (%zu vectors per point, %.0f s)\n",
                    link.trials_per_snr, secs);
        for (std::size_t i = 0; i < d.reference.points.size(); ++i)
            std::printf("      %-6g   %.4e     %.4e\n", d.reference.points[i].snr_db, d.reference.points[i].ber,
                        d.test.points[i].ber);
        const double hi = d.reference.points.front().ber, lo = d.reference.points.back().ber;
        check(hi >= 1e-2 && lo <= 1e-4, "C3 sweep span", fmt("float BER %.3e .. %.3e covers 1e-2 .. 1e-4", hi, lo));
        std::printf("      snr at 1e-3: float %.4f dB, fixed %.4f dB\n", d.snr_reference, d.snr_test);
    }
    check(bracketed && gap <= 0.3, "C3 fixed-point gap", fmt("%.4f dB at BER 1e-3 (bound 0.3 dB)", gap));
}

void criterion4() {
    {
        sim::LinkConfig link;
        link.detector.n_t = link.detector.n_r = 2;
        link.detector.m = 4;
        link.detector.k = 16;
        link.detector.rlimit = 17;
        link.snr_db = {10};
        link.trials_per_snr = 10000;
        link.seed = 4;
        const sim::Receiver rx[] = {sim::kbest_receiver(link.detector), sim::ml_receiver(4)};
        const auto reps = sim::simulate(link, rx);
        note_pops(reps[0]);
        const auto& kb = reps[0].points[0];
        const auto& ml = reps[1].points[0];
        check(kb.ber <= 1.2 * ml.ber, "C4 K-best vs ML",
              fmt("BER %.4e vs ML %.4e, ratio %.4f (bound 1.2; %zu paired trials)", kb.ber, ml.ber, kb.ber / ml.ber,
                  kb.trials));
    }
    const struct {
        std::size_t n;
        unsigned m;
    } shapes[] = {{2, 4}, {2, 16}, {4, 4}};
    for (const auto& s : shapes) {
        sim::LinkConfig link;
        link.detector.n_t = link.detector.n_r = s.n;
        link.detector.m = s.m;
        link.noiseless = true;
        link.snr_db = {0};
        link.trials_per_snr = 10000;
        link.seed = 40 + s.n * 100 + s.m;
        const sim::BerReport rep = sim::run_link(link);
        note_pops(rep);
        const auto& p = rep.points[0];
        check(p.vector_errors == 0 && p.trials > 0, fmt("C4 loopback %zux%zu %uQAM", s.n, s.n, s.m).c_str(),
              fmt("%zu/%zu recovered (%zu singular discarded)", p.trials - p.vector_errors, p.trials, p.discarded));
    }
}

struct Shape {
    const char* name;
    std::size_t rows, cols;
    bool extended;
};

void criterion5() {
    const Shape shapes[] = {{"2x2", 2, 2, false}, {"4x4", 4, 4, false}, {"8x8", 8, 8, false}, {"16x8 mmse", 8, 8, true}};
    const std::size_t per_shape = 1000;
    std::size_t defect_up = 0, total = 0;
    long double lll_res = 0, det_res = 0, integ = 0, mu = 0, lovasz = 1e300L;
    long double q_unit = 0, q_rec = 0, q_tri = 0, q_diag = 1e300L;
    std::mt19937_64 rng(5);
    for (const auto& s : shapes) {
        std::size_t up = 0;
        for (std::size_t i = 0; i < per_shape; ++i) {
            CMatrix b = oracle::random_gaussian(rng, s.rows, s.cols);
            if (s.extended) b = mmse_extend(b, CVector(s.rows), 0.42, 21.0).h_ext;
            const LrOutput lr = lll_reduce(b, 0.75);
            const auto rep = oracle::check_lll(b, lr.reduced_basis, lr.transform, 0.75);
            lll_res = std::max(lll_res, rep.reconstruction);
            det_res = std::max(det_res, rep.det_error);
            integ = std::max(integ, rep.integrality);
            mu = std::max(mu, rep.worst_mu);
            lovasz = std::min(lovasz, rep.lovasz_slack);
            if (rep.defect_out > rep.defect_in * (1 + 1e-12L)) ++up;

            const QrResult qr = qr_decompose(lr.reduced_basis);
            const auto q = oracle::widen(qr.q), r = oracle::widen(qr.r), a = oracle::widen(lr.reduced_basis);
            const std::size_t m = q.size(), n = r[0].size();
            for (std::size_t x = 0; x < m; ++x)
                for (std::size_t y = 0; y < m; ++y) {
                    oracle::lcplx acc{};
                    for (std::size_t t = 0; t < m; ++t) acc += std::conj(q[t][x]) * q[t][y];
                    q_unit = std::max(q_unit, std::abs(acc - oracle::lcplx(x == y ? 1 : 0)));
                }
            const auto qr_prod = oracle::mul(q, r);
            for (std::size_t x = 0; x < m; ++x)
                for (std::size_t y = 0; y < n; ++y) {
                    q_rec = std::max(q_rec, std::abs(qr_prod[x][y] - a[x][y]));
                    if (x > y) q_tri = std::max(q_tri, std::abs(r[x][y]));
                    if (x == y) {
                        q_diag = std::min(q_diag, r[x][y].real());
                        q_tri = std::max(q_tri, std::abs(r[x][y].imag()));
                    }
                }
        }
        std::printf("      %-10s defect increased on %zu of %zu\n", s.name, up, per_shape);
        defect_up += up;
        total += per_shape;
    }
    const long double tol = 1e-9L;
    check(lll_res <= tol, "C5 LLL H~ = B T", fmt("max residual %.3Le over %zu instances", lll_res, total));
    check(det_res <= tol && integ == 0, "C5 LLL unimodular T",
          fmt("max ||det T| - 1| %.3Le, max non-integrality %.3Le", det_res, integ));
    check(mu <= 0.5L + tol && lovasz >= -tol, "C5 LLL size/Lovasz",
          fmt("max |mu| %.6Lf, min normalized Lovasz slack %.3Le", mu, lovasz));
    check(defect_up == 0, "C5 LLL defect non-increase", fmt("defect increased on %zu of %zu", defect_up, total));
    check(q_unit <= tol, "C5 QR unitarity", fmt("max |Q^H Q - I| %.3Le", q_unit));
    check(q_rec <= tol, "C5 QR reconstruction", fmt("max |QR - A| %.3Le", q_rec));
    check(q_tri <= tol && q_diag > 0, "C5 QR triangularity",
          fmt("max below-diagonal / imag-diagonal %.3Le, min diagonal %.3Le", q_tri, q_diag));

    // Every center on the 0.01 grid over [-8, 8], 17 terms each.
    std::size_t bad = 0, centers = 0;
    for (int i = -800; i <= 800; ++i, ++centers) {
        const double c = i / 100.0;
        const auto seq = se_real_sequence(c, 17);
        std::int64_t lo = seq[0], hi = seq[0];
        bool ok = true;
        for (std::size_t j = 1; j < seq.size(); ++j) {
            if (std::abs(seq[j] - c) + 1e-12 < std::abs(seq[j - 1] - c)) ok = false;
            lo = std::min(lo, seq[j]);
            hi = std::max(hi, seq[j]);
        }
        // Nondecreasing distance plus a contiguous run means no integer is skipped.
        if (hi - lo + 1 != static_cast<std::int64_t>(seq.size())) ok = false;
        bad += !ok;
    }
    check(bad == 0, "C5 SE distance order", fmt("%zu of %zu grid centers violate", bad, centers));
    check(pops_ok, "C5 pop-order monotonicity", "every detect in C2-C4");
}

void criterion6() {
    const std::string cfg = std::string(KBEST_SAMPLES) + "/data/sweep_small.ini";
    const Shell a = shell("sweep " + cfg + " --out acc_first.csv");
    const Shell b = shell("sweep acc_first.csv.manifest --out acc_replay.csv");
    const std::string first = slurp("acc_first.csv"), replay = slurp("acc_replay.csv");
    check(a.code == 0 && b.code == 0 && !first.empty() && first == replay, "C6 manifest replay",
          fmt("sweep exit %d, replay exit %d, %zu bytes, identical=%s", a.code, b.code, first.size(),
              first == replay ? "yes" : "no"));

    sim::LinkConfig link;
    link.detector.fixed = QFormat{7, 8};
    link.snr_db = {24, 30};
    link.trials_per_snr = 2000;
    link.seed = 6;
    const std::string one = csv(sim::run_link(link));
    link.threads = 4;
    const std::string four = csv(sim::run_link(link));
    check(one == four && one == csv(sim::run_link(link)), "C6 thread-count invariance",
          "identical CSV for 1 and 4 worker threads and on repeat");
}

}  // namespace

int main() {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    std::printf("%s: %d check(s) failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
