#pragma once

// Monte-Carlo link simulation: Gray-mapped QAM on the odd-integer grid,
// i.i.d. Rayleigh channels, AWGN, brute-force ML reference, BER sweeps and the
// fixed-vs-floating SNR gap.
//
// Every trial draws from its own engine seeded by (seed, trial index), so all
// receivers compared in one sweep see identical bits, channels and noise, and
// results never depend on thread count.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "kbest/detector.hpp"

namespace kbest::sim {

using Bits = std::vector<std::uint8_t>;

// ---------------------------------------------------------------------------
// QAM

namespace detail {

inline unsigned axis_bits(unsigned m) {
    DetectorConfig probe;
    probe.m = m;
    probe.validate();
    return static_cast<unsigned>(probe.bits_per_symbol() / 2);
}

/// Gray label of the i-th level counted from the most negative one.
/// 4-QAM uses 0 -> +1, 1 -> -1; larger orders use binary-reflected Gray code.
inline unsigned axis_label(unsigned index, unsigned levels) {
    if (levels == 2) return index == 0 ? 1u : 0u;
    return index ^ (index >> 1);
}

inline unsigned axis_index(unsigned label, unsigned levels) {
    for (unsigned i = 0; i < levels; ++i)
        if (axis_label(i, levels) == label) return i;
    throw std::logic_error("axis_index: label out of range");
}

inline double level_value(unsigned index, unsigned levels) {
    return -static_cast<double>(levels - 1) + 2.0 * static_cast<double>(index);
}

inline unsigned value_index(double v, unsigned levels) {
    const double q = quantize_axis(v, levels);
    return static_cast<unsigned>(std::lround((q + static_cast<double>(levels - 1)) / 2.0));
}

}  // namespace detail

/// Per symbol: the first log2(sqrt m) bits (MSB first) label the real axis,
/// the rest the imaginary axis.
inline CVector qam_modulate(std::span<const std::uint8_t> bits, unsigned m) {
    const unsigned b = detail::axis_bits(m);
    const unsigned levels = 1u << b;
    if (bits.size() % (2 * b) != 0)
        throw std::invalid_argument("qam_modulate: bit count must be a multiple of " + std::to_string(2 * b));
    CVector out;
    out.reserve(bits.size() / (2 * b));
    for (std::size_t pos = 0; pos < bits.size(); pos += 2 * b) {
        unsigned re = 0, im = 0;
        for (unsigned i = 0; i < b; ++i) re = (re << 1) | (bits[pos + i] & 1u);
        for (unsigned i = 0; i < b; ++i) im = (im << 1) | (bits[pos + b + i] & 1u);
        out.emplace_back(detail::level_value(detail::axis_index(re, levels), levels),
                         detail::level_value(detail::axis_index(im, levels), levels));
    }
    return out;
}

/// Inverse of qam_modulate; off-grid points are first snapped by Q(.).
inline Bits qam_demodulate(std::span<const cplx> symbols, unsigned m) {
    const unsigned b = detail::axis_bits(m);
    const unsigned levels = 1u << b;
    Bits out;
    out.reserve(symbols.size() * 2 * b);
    for (const cplx& s : symbols) {
        for (const double axis : {s.real(), s.imag()}) {
            const unsigned label = detail::axis_label(detail::value_index(axis, levels), levels);
            for (unsigned i = b; i-- > 0;) out.push_back(static_cast<std::uint8_t>((label >> i) & 1u));
        }
    }
    return out;
}

/// Every constellation point, ordered lexicographically by (re, im).
inline CVector constellation(unsigned m) {
    const unsigned levels = 1u << detail::axis_bits(m);
    CVector pts;
    for (unsigned i = 0; i < levels; ++i)
        for (unsigned j = 0; j < levels; ++j)
            pts.emplace_back(detail::level_value(i, levels), detail::level_value(j, levels));
    return pts;
}

// ---------------------------------------------------------------------------
// Random streams

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

using Engine = std::mt19937_64;

inline Engine trial_engine(std::uint64_t seed, std::uint64_t trial) {
    return Engine(splitmix64(splitmix64(seed) ^ (trial * 0xD1B54A32D192ED03ULL + 1)));
}

inline Bits sample_bits(Engine& rng, std::size_t count) {
    Bits out(count);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < count; ++i) {
        if (i % 64 == 0) word = rng();
        out[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1u);
    }
    return out;
}

/// i.i.d. CN(0, 1) entries.
inline CMatrix sample_channel(Engine& rng, std::size_t n_r, std::size_t n_t) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
    CMatrix h(n_r, n_t);
    for (std::size_t r = 0; r < n_r; ++r)
        for (std::size_t c = 0; c < n_t; ++c) {
            const double re = gauss(rng);
            h(r, c) = {re, gauss(rng)};
        }
    return h;
}

/// i.i.d. CN(0, noise_power) entries.
inline CVector sample_noise(Engine& rng, std::size_t n_r, double noise_power) {
    if (noise_power < 0.0) throw std::invalid_argument("noise_power must be nonnegative");
    std::normal_distribution<double> gauss(0.0, std::sqrt(noise_power / 2.0));
    CVector n(n_r);
    for (auto& v : n) {
        const double re = noise_power > 0.0 ? gauss(rng) : 0.0;
        v = {re, noise_power > 0.0 ? gauss(rng) : 0.0};
    }
    return n;
}

// ---------------------------------------------------------------------------
// Receivers

struct ReceiverOutcome {
    CVector symbols;
    std::size_t nodes = 0;
    std::size_t max_level_nodes = 0;
    bool pops_monotone = true;
};

using Receiver = std::function<ReceiverOutcome(const CMatrix& h, const CVector& y, double noise_power)>;

class OracleTooLargeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Exhaustive argmin ||y - H s||^2 over the constellation; ties go to the
/// lexicographically first candidate.
inline CVector ml_detect(const CVector& y, const CMatrix& h, unsigned m) {
    const CVector pts = constellation(m);
    const std::size_t n_t = h.cols();
    double space = 1.0;
    for (std::size_t i = 0; i < n_t; ++i) space *= static_cast<double>(pts.size());
    if (space > 1e6) throw OracleTooLargeError("ml_detect: m^n_t exceeds 1e6 candidates");
    if (y.size() != h.rows()) throw std::invalid_argument("ml_detect: dimension mismatch");

    std::vector<std::size_t> idx(n_t, 0);
    CVector cand(n_t, pts[0]);
    CVector best = cand;
    double best_metric = std::numeric_limits<double>::infinity();
    while (true) {
        for (std::size_t i = 0; i < n_t; ++i) cand[i] = pts[idx[i]];
        double metric = 0.0;
        for (std::size_t r = 0; r < h.rows(); ++r) {
            cplx acc = y[r];
            for (std::size_t c = 0; c < n_t; ++c) acc -= h(r, c) * cand[c];
            metric += std::norm(acc);
        }
        if (metric < best_metric) {
            best_metric = metric;
            best = cand;
        }
        std::size_t pos = n_t;
        while (pos > 0 && ++idx[pos - 1] == pts.size()) idx[--pos] = 0;
        if (pos == 0) break;
    }
    return best;
}

inline Receiver kbest_receiver(DetectorConfig cfg) {
    return [cfg](const CMatrix& h, const CVector& y, double noise_power) {
        Decision d = lr_kbest_receive(h, y, noise_power, cfg);
        ReceiverOutcome out;
        out.symbols = std::move(d.symbols);
        out.nodes = d.detection.total_nodes;
        for (const auto n : d.detection.nodes_per_level) out.max_level_nodes = std::max(out.max_level_nodes, n);
        out.pops_monotone = d.detection.pops_monotone;
        return out;
    };
}

inline Receiver ml_receiver(unsigned m) {
    return [m](const CMatrix& h, const CVector& y, double) { return ReceiverOutcome{ml_detect(y, h, m)}; };
}

// ---------------------------------------------------------------------------
// Link sweep

struct LinkConfig {
    DetectorConfig detector;
    std::vector<double> snr_db;
    std::size_t trials_per_snr = 1000;
    std::uint64_t seed = 1;
    std::string channel_model = "iid-rayleigh";
    bool noiseless = false;
    std::size_t threads = 1;

    void validate() const {
        detector.validate();
        if (snr_db.empty()) throw std::invalid_argument("snr list must not be empty");
        if (trials_per_snr < 1) throw std::invalid_argument("trials must be >= 1");
        if (channel_model != "iid-rayleigh") throw std::invalid_argument("unsupported channel model '" + channel_model + "'");
        if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    }

    /// N0 such that SNR = n_t E_s / N0 (E_s of the unnormalized grid).
    double noise_power(double snr) const {
        if (noiseless) return 0.0;
        return static_cast<double>(detector.n_t) * mean_symbol_energy(detector.m) / std::pow(10.0, snr / 10.0);
    }
};

struct BerPoint {
    double snr_db = 0.0;
    std::size_t trials = 0;  // counted trials (discarded ones excluded)
    std::size_t discarded = 0;
    std::size_t bits_sent = 0;
    std::size_t bit_errors = 0;
    std::size_t vector_errors = 0;
    double ber = 0.0;
    double mean_nodes = 0.0;
    std::size_t max_nodes = 0;
    std::size_t max_level_nodes = 0;
    bool pops_monotone = true;
};

struct BerReport {
    std::vector<BerPoint> points;
};

inline void write_ber_csv(std::ostream& os, const BerReport& report) {
    os << "snr_db,trials,bits,bit_errors,ber,vec_errors,mean_nodes\n";
    char buf[160];
    for (const auto& p : report.points) {
        std::snprintf(buf, sizeof buf, "%.6g,%zu,%zu,%zu,%.9e,%zu,%.6f\n", p.snr_db, p.trials, p.bits_sent,
                      p.bit_errors, p.ber, p.vector_errors, p.mean_nodes);
        os << buf;
    }
}

namespace detail {

struct TrialTally {
    bool discarded = false;
    std::size_t bit_errors = 0;
    bool vector_error = false;
    std::size_t nodes = 0;
    std::size_t max_level_nodes = 0;
    bool pops_monotone = true;
};

}  // namespace detail

/// Runs every receiver on the same trial stream; one report per receiver.
inline std::vector<BerReport> simulate(const LinkConfig& cfg, std::span<const Receiver> receivers) {
    cfg.validate();
    const DetectorConfig& det = cfg.detector;
    const std::size_t nbits = det.n_t * det.bits_per_symbol();
    const std::size_t nrx = receivers.size();
    std::vector<BerReport> reports(nrx);

    for (const double snr : cfg.snr_db) {
        const double n0 = cfg.noise_power(snr);
        // tallies[trial * nrx + receiver]
        std::vector<detail::TrialTally> tallies(cfg.trials_per_snr * nrx);

        auto run_range = [&](std::size_t begin, std::size_t end) {
            for (std::size_t t = begin; t < end; ++t) {
                Engine rng = trial_engine(cfg.seed, t);
                const Bits bits = sample_bits(rng, nbits);
                const CVector s = qam_modulate(bits, det.m);
                const CMatrix h = sample_channel(rng, det.n_r, det.n_t);
                const CVector noise = sample_noise(rng, det.n_r, n0);
                CVector y = h * s;
                for (std::size_t i = 0; i < y.size(); ++i) y[i] += noise[i];

                std::vector<detail::TrialTally> local(nrx);
                bool discard = false;
                for (std::size_t r = 0; r < nrx && !discard; ++r) {
                    try {
                        const ReceiverOutcome o = receivers[r](h, y, n0);
                        const Bits got = qam_demodulate(o.symbols, det.m);
                        auto& tally = local[r];
                        for (std::size_t i = 0; i < nbits; ++i) tally.bit_errors += (got[i] != bits[i]);
                        tally.vector_error = tally.bit_errors > 0;
                        tally.nodes = o.nodes;
                        tally.max_level_nodes = o.max_level_nodes;
                        tally.pops_monotone = o.pops_monotone;
                    } catch (const RankDeficientError&) {
                        discard = true;
                    } catch (const SingularChannelError&) {
                        discard = true;
                    }
                }
                for (std::size_t r = 0; r < nrx; ++r) {
                    local[r].discarded = discard;
                    tallies[t * nrx + r] = local[r];
                }
            }
        };

        const std::size_t threads = std::min(cfg.threads, cfg.trials_per_snr);
        if (threads <= 1) {
            run_range(0, cfg.trials_per_snr);
        } else {
            std::vector<std::thread> pool;
            const std::size_t chunk = (cfg.trials_per_snr + threads - 1) / threads;
            for (std::size_t w = 0; w < threads; ++w) {
                const std::size_t b = w * chunk, e = std::min(cfg.trials_per_snr, b + chunk);
                if (b < e) pool.emplace_back(run_range, b, e);
            }
            for (auto& th : pool) th.join();
        }

        // Reduce in trial order.
        for (std::size_t r = 0; r < nrx; ++r) {
            BerPoint p;
            p.snr_db = snr;
            std::size_t total_nodes = 0;
            for (std::size_t t = 0; t < cfg.trials_per_snr; ++t) {
                const auto& tally = tallies[t * nrx + r];
                if (tally.discarded) {
                    ++p.discarded;
                    continue;
                }
                ++p.trials;
                p.bits_sent += nbits;
                p.bit_errors += tally.bit_errors;
                p.vector_errors += tally.vector_error;
                total_nodes += tally.nodes;
                p.max_nodes = std::max(p.max_nodes, tally.nodes);
                p.max_level_nodes = std::max(p.max_level_nodes, tally.max_level_nodes);
                p.pops_monotone = p.pops_monotone && tally.pops_monotone;
            }
            p.ber = p.bits_sent ? static_cast<double>(p.bit_errors) / static_cast<double>(p.bits_sent) : 0.0;
            p.mean_nodes = p.trials ? static_cast<double>(total_nodes) / static_cast<double>(p.trials) : 0.0;
            reports[r].points.push_back(p);
        }
    }
    return reports;
}

inline BerReport run_link(const LinkConfig& cfg) {
    const Receiver rx[] = {kbest_receiver(cfg.detector)};
    return simulate(cfg, rx).front();
}

// ---------------------------------------------------------------------------
// SNR gap at a target BER

class InsufficientRangeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// SNR where the curve crosses `target_ber`, interpolating linearly in
/// log10(BER) between the first bracketing pair of points.
inline double snr_at_ber(const BerReport& report, double target_ber) {
    if (!(target_ber > 0.0 && target_ber < 1.0)) throw std::invalid_argument("target BER must lie in (0, 1)");
    const auto& pts = report.points;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double b0 = pts[i].ber, b1 = pts[i + 1].ber;
        if (!(b0 >= target_ber && target_ber >= b1)) continue;
        if (b0 == target_ber) return pts[i].snr_db;
        if (b1 == target_ber) return pts[i + 1].snr_db;
        if (b1 <= 0.0) continue;
        const double t = (std::log10(target_ber) - std::log10(b0)) / (std::log10(b1) - std::log10(b0));
        return pts[i].snr_db + t * (pts[i + 1].snr_db - pts[i].snr_db);
    }
    throw InsufficientRangeError("insufficient sweep range: BER " + std::to_string(target_ber) +
                                 " is not bracketed by the sweep");
}

struct DegradationResult {
    double gap_db = 0.0;  // test minus reference
    double snr_reference = 0.0;
    double snr_test = 0.0;
    BerReport reference;
    BerReport test;
};

/// Paired sweeps of two detector configurations on identical trial streams.
inline DegradationResult degradation(const LinkConfig& link, const DetectorConfig& reference,
                                     const DetectorConfig& test, double target_ber) {
    const Receiver rx[] = {kbest_receiver(reference), kbest_receiver(test)};
    auto reports = simulate(link, rx);
    DegradationResult out;
    out.reference = std::move(reports[0]);
    out.test = std::move(reports[1]);
    out.snr_reference = snr_at_ber(out.reference, target_ber);
    out.snr_test = snr_at_ber(out.test, target_ber);
    out.gap_db = out.snr_test - out.snr_reference;
    return out;
}

/// Floating reference vs the same detector in `fmt`.
inline DegradationResult fixed_float_degradation(const LinkConfig& link, const QFormat& fmt, double target_ber) {
    DetectorConfig flt = link.detector;
    flt.fixed.reset();
    DetectorConfig fix = link.detector;
    fix.fixed = fmt;
    return degradation(link, flt, fix, target_ber);
}

}  // namespace kbest::sim
