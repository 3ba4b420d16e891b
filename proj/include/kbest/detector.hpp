#pragma once

// Complex K-best search over the reduced lattice with on-demand child
// expansion. Each parent first evaluates `rlimit` candidates along the real
// axis (Schnorr-Euchner order, imaginary part fixed at the rounded center) and
// keeps the best one in its frontier register (the root, having a single
// parent, keeps its best min(K, rlimit) in separate registers). The level then pops the global
// minimum K times; after each pop the emptied register is refilled with the
// popped node's next sibling along the imaginary axis.
//
// Per level at most K*rlimit + K - 1 nodes are evaluated.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbest/fixedpoint.hpp"
#include "kbest/linalg.hpp"
#include "kbest/matrix.hpp"

namespace kbest {

/// Thrown when a triangular system has a zero diagonal entry.
class SingularChannelError : public std::runtime_error {
public:
    explicit SingularChannelError(std::size_t level)
        : std::runtime_error("singular channel: zero diagonal at level " + std::to_string(level)), level_(level) {}
    std::size_t level() const { return level_; }

private:
    std::size_t level_;
};

struct GaussInt {
    std::int64_t re = 0;
    std::int64_t im = 0;

    cplx to_complex() const { return {static_cast<double>(re), static_cast<double>(im)}; }
    friend auto operator<=>(const GaussInt&, const GaussInt&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const GaussInt& z) {
    return os << z.re << (z.im < 0 ? '-' : '+') << (z.im < 0 ? -z.im : z.im) << 'i';
}

struct DetectorConfig {
    std::size_t n_t = 8;
    std::size_t n_r = 8;
    unsigned m = 64;
    std::size_t k = 4;
    std::size_t rlimit = 4;
    std::optional<QFormat> fixed;  // nullopt: floating-point datapath
    double lll_delta = 0.75;
    bool regularize = true;

    std::size_t bits_per_symbol() const {
        std::size_t b = 0;
        for (unsigned v = m; v > 1; v >>= 1) ++b;
        return b;
    }
    /// sqrt(m): levels per axis.
    unsigned axis_levels() const { return 1u << (bits_per_symbol() / 2); }
    std::size_t level_node_budget() const { return k * rlimit + (k - 1); }
    std::size_t total_node_budget() const { return n_t * k * (rlimit + 1) - n_t; }

    void validate() const {
        if (k < 1) throw std::invalid_argument("k must be >= 1");
        if (rlimit < 1) throw std::invalid_argument("rlimit must be >= 1");
        if (n_t < 1) throw std::invalid_argument("n_t must be >= 1");
        if (n_t > n_r) throw std::invalid_argument("n_t must not exceed n_r");
        bool power_of_four = m >= 4;
        for (unsigned v = m; power_of_four && v > 1; v >>= 2) power_of_four = (v % 4 == 0);
        if (!power_of_four) throw std::invalid_argument("constellation order must be a power of 4 (4, 16, 64, ...)");
        if (fixed && !fixed->valid()) throw std::invalid_argument("invalid fixed-point format");
        if (!(lll_delta > 0.25 && lll_delta <= 1.0)) throw std::invalid_argument("lll_delta must lie in (0.25, 1]");
    }
};

// ---------------------------------------------------------------------------
// Schnorr-Euchner enumeration

/// index-th integer in nondecreasing distance from c: round(c), then
/// alternating steps starting towards c (towards +inf when c is an integer).
inline std::int64_t se_value(double c, std::size_t index) {
    const double z0 = std::round(c);
    const std::int64_t base = static_cast<std::int64_t>(z0);
    if (index == 0) return base;
    const std::int64_t dir = (c - z0 < 0.0) ? -1 : 1;
    const auto step = static_cast<std::int64_t>((index + 1) / 2);
    return (index % 2 == 1) ? base + dir * step : base - dir * step;
}

inline std::vector<std::int64_t> se_real_sequence(double c, std::size_t n) {
    std::vector<std::int64_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = se_value(c, i);
    return out;
}

// ---------------------------------------------------------------------------
// Search state

struct SearchNode {
    std::size_t level = 0;          // 1-based; the search runs from n_t down to 1
    std::vector<GaussInt> symbols;  // length n_t; rows level-1 .. n_t-1 are fixed
    double ped = 0.0;
    double parent_ped = 0.0;
    cplx center{};
    std::size_t real_index = 0;
    std::size_t imag_index = 0;
    std::size_t parent = 0;  // position of the parent in the previous list

    GaussInt symbol() const { return symbols[level - 1]; }
};

/// Nodes of one level, nondecreasing in ped.
using CandidateList = std::vector<SearchNode>;

enum class TraceKind { real_batch, imag_refill, select };

inline const char* to_string(TraceKind k) {
    switch (k) {
        case TraceKind::real_batch: return "real";
        case TraceKind::imag_refill: return "imag";
        case TraceKind::select: return "select";
    }
    return "?";
}

/// One evaluated node (real_batch / imag_refill) or one register pop (select).
struct TraceEvent {
    TraceKind kind;
    std::size_t level;
    std::size_t parent;
    std::size_t slot;  // frontier register (0-based)
    std::size_t real_index;
    std::size_t imag_index;
    GaussInt symbol;
    double ped;
};

struct DetectTrace {
    std::vector<TraceEvent> events;
};

inline void write_trace_csv(std::ostream& os, const DetectTrace& trace) {
    os << "level,kind,parent,slot,real_index,imag_index,symbol_re,symbol_im,ped\n";
    char buf[64];
    for (const auto& e : trace.events) {
        std::snprintf(buf, sizeof buf, "%.17g", e.ped);
        os << e.level << ',' << to_string(e.kind) << ',' << e.parent << ',' << e.slot << ',' << e.real_index << ',' << e.imag_index
           << ',' << e.symbol.re << ',' << e.symbol.im << ',' << buf << '\n';
    }
}

struct NodeCounts {
    std::vector<std::size_t> per_level;  // index level-1
    std::size_t total = 0;
};

/// Counts evaluated nodes (register pops are not evaluations).
inline NodeCounts count_expanded_nodes(const DetectTrace& trace) {
    NodeCounts out;
    for (const auto& e : trace.events) {
        if (e.kind == TraceKind::select) continue;
        if (out.per_level.size() < e.level) out.per_level.resize(e.level, 0);
        ++out.per_level[e.level - 1];
        ++out.total;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Arithmetic kernels

/// (y_rot[level] - sum_{j>level} R[level,j] prefix[j]) / R[level,level].
/// `level` is 1-based; `prefix` has length n_t.
inline cplx level_center(const CVector& y_rot, const CMatrix& r, std::span<const GaussInt> prefix, std::size_t level) {
    const std::size_t row = level - 1;
    if (r(row, row) == cplx{}) throw SingularChannelError(level);
    cplx b = y_rot[row];
    for (std::size_t j = row + 1; j < prefix.size(); ++j) b -= r(row, j) * prefix[j].to_complex();
    return b / r(row, row);
}

inline double ped_increment(double prev_ped, cplx residual) { return prev_ped + std::norm(residual); }

class FloatKernel {
public:
    FloatKernel(const CVector& y_rot, const CMatrix& r, std::size_t n_t) : y_(y_rot.begin(), y_rot.begin() + n_t) {
        if (y_rot.size() < n_t || r.rows() < n_t || r.cols() < n_t)
            throw std::invalid_argument("detector: R / y_rot smaller than n_t");
        r_ = r.block(0, 0, n_t, n_t);
        for (std::size_t i = 0; i < n_t; ++i)
            if (r_(i, i) == cplx{}) throw SingularChannelError(i + 1);
    }

    std::size_t n_t() const { return y_.size(); }

    cplx center(std::size_t level, std::span<const GaussInt> symbols) const {
        return level_center(y_, r_, symbols, level);
    }

    /// |R[l,l] (center - z)|^2
    double increment(std::size_t level, cplx center, GaussInt z) const {
        const std::size_t row = level - 1;
        return std::norm(r_(row, row) * (center - z.to_complex()));
    }

    double accumulate(double prev, double inc) const { return prev + inc; }

private:
    CVector y_;
    CMatrix r_;
};

/// Same datapath in complex fixed point. Every value a node carries (center,
/// ped) lies on the format grid, so its double form is exact.
class FixedKernel {
public:
    FixedKernel(const CVector& y_rot, const CMatrix& r, std::size_t n_t, QFormat fmt) : fmt_(fmt), n_t_(n_t) {
        if (y_rot.size() < n_t || r.rows() < n_t || r.cols() < n_t)
            throw std::invalid_argument("detector: R / y_rot smaller than n_t");
        y_.reserve(n_t);
        r_.reserve(n_t * n_t);
        inv_diag_.reserve(n_t);
        for (std::size_t i = 0; i < n_t; ++i) y_.push_back(CFix::quantize(y_rot[i], fmt));
        for (std::size_t i = 0; i < n_t; ++i)
            for (std::size_t j = 0; j < n_t; ++j) r_.push_back(CFix::quantize(r(i, j), fmt));
        for (std::size_t i = 0; i < n_t; ++i) {
            const CFix d = r_[i * n_t + i];
            if (r(i, i) == cplx{} || (d.re == 0 && d.im == 0)) throw SingularChannelError(i + 1);
            // The reciprocal is a channel-rate input to the datapath, computed
            // once in floating point.
            inv_diag_.push_back(CFix::quantize(1.0 / r(i, i), fmt));
        }
    }

    std::size_t n_t() const { return n_t_; }
    const QFormat& format() const { return fmt_; }

    cplx center(std::size_t level, std::span<const GaussInt> symbols) const {
        const std::size_t row = level - 1;
        CFix b = y_[row];
        for (std::size_t j = row + 1; j < n_t_; ++j)
            b = fx::sub(b, fx::mul_int(r_[row * n_t_ + j], symbols[j].re, symbols[j].im));
        return fx::mul(b, inv_diag_[row]).to_complex();
    }

    double increment(std::size_t level, cplx center, GaussInt z) const {
        const std::size_t row = level - 1;
        const CFix diff = fx::sub(CFix::quantize(center, fmt_), CFix::from_int(z.re, z.im, fmt_));
        const CFix e = fx::mul(r_[row * n_t_ + row], diff);
        return fx::from_raw(fx::norm(e), fmt_);
    }

    double accumulate(double prev, double inc) const {
        return fx::from_raw(fx::add_real(fx::to_raw(prev, fmt_), fx::to_raw(inc, fmt_), fmt_), fmt_);
    }

private:
    QFormat fmt_;
    std::size_t n_t_;
    std::vector<CFix> y_;
    std::vector<CFix> r_;  // n_t x n_t row-major
    std::vector<CFix> inv_diag_;
};

// ---------------------------------------------------------------------------
// Search

/// Next sibling along the imaginary axis of the node's own center.
template <class Kernel>
SearchNode se_imag_next(const SearchNode& node, const Kernel& kernel) {
    SearchNode next = node;
    next.imag_index = node.imag_index + 1;
    next.symbols[node.level - 1].im = se_value(node.center.imag(), next.imag_index);
    next.ped = kernel.accumulate(node.parent_ped, kernel.increment(node.level, node.center, next.symbol()));
    return next;
}

struct LevelResult {
    CandidateList children;
    std::size_t nodes_computed = 0;
    bool pops_monotone = true;
};

template <class Kernel>
LevelResult expand_level(const CandidateList& parents, const Kernel& kernel, const DetectorConfig& cfg,
                         std::size_t level, DetectTrace* trace = nullptr) {
    if (parents.empty()) throw std::invalid_argument("expand_level: no parents");
    LevelResult out;
    const std::size_t row = level - 1;

    auto record = [&](TraceKind kind, const SearchNode& n, std::size_t slot) {
        if (trace)
            trace->events.push_back({kind, level, n.parent, slot, n.real_index, n.imag_index, n.symbol(), n.ped});
    };

    // Frontier registers. A parent normally owns one register holding its best
    // real-axis candidate. A lone root parent instead spreads its best
    // min(K, rlimit) real-axis candidates over separate registers.
    const bool spread_root = parents.size() == 1 && cfg.k > 1;
    std::vector<SearchNode> slots;
    slots.reserve(std::max(parents.size(), cfg.k));
    for (std::size_t p = 0; p < parents.size(); ++p) {
        const SearchNode& parent = parents[p];
        SearchNode cand;
        cand.level = level;
        cand.symbols = parent.symbols;
        cand.parent_ped = parent.ped;
        cand.parent = p;
        cand.center = kernel.center(level, cand.symbols);
        cand.imag_index = 0;
        cand.symbols[row].im = se_value(cand.center.imag(), 0);

        std::vector<SearchNode> batch;
        batch.reserve(cfg.rlimit);
        for (std::size_t i = 0; i < cfg.rlimit; ++i) {
            cand.real_index = i;
            cand.symbols[row].re = se_value(cand.center.real(), i);
            cand.ped = kernel.accumulate(parent.ped, kernel.increment(level, cand.center, cand.symbol()));
            ++out.nodes_computed;
            batch.push_back(cand);
        }
        // Stable: equal peds keep SE order.
        std::stable_sort(batch.begin(), batch.end(),
                         [](const SearchNode& a, const SearchNode& b) { return a.ped < b.ped; });
        const std::size_t keep = spread_root ? std::min(cfg.k, cfg.rlimit) : 1;
        if (trace) {
            // Events in evaluation order. Each fill cycle writes one register:
            // parent p's batch goes to register p; the root's candidates are
            // spread over the K fill cycles.
            for (std::size_t i = 0; i < cfg.rlimit; ++i) {
                const auto it = std::find_if(batch.begin(), batch.end(),
                                             [&](const SearchNode& n) { return n.real_index == i; });
                const std::size_t fill = cfg.rlimit <= cfg.k ? i : i * cfg.k / cfg.rlimit;
                record(TraceKind::real_batch, *it, spread_root ? fill : p);
            }
        }
        for (std::size_t b = 0; b < keep; ++b) slots.push_back(std::move(batch[b]));
    }

    out.children.reserve(cfg.k);
    double last = 0.0;
    for (std::size_t pop = 0; pop < cfg.k; ++pop) {
        std::size_t arg = 0;
        for (std::size_t s = 1; s < slots.size(); ++s)
            if (slots[s].ped < slots[arg].ped) arg = s;
        const SearchNode& chosen = slots[arg];
        if (pop > 0 && chosen.ped < last) out.pops_monotone = false;
        last = chosen.ped;
        record(TraceKind::select, chosen, arg);
        out.children.push_back(chosen);
        if (pop + 1 < cfg.k) {
            slots[arg] = se_imag_next(chosen, kernel);
            ++out.nodes_computed;
            record(TraceKind::imag_refill, slots[arg], arg);
        }
    }
    return out;
}

struct DetectResult {
    CandidateList candidates;  // level-1 list, best first
    std::size_t total_nodes = 0;
    std::vector<std::size_t> nodes_per_level;  // index level-1
    bool pops_monotone = true;
};

template <class Kernel>
DetectResult detect_with(const Kernel& kernel, const DetectorConfig& cfg, DetectTrace* trace = nullptr) {
    const std::size_t n_t = kernel.n_t();
    DetectResult out;
    out.nodes_per_level.assign(n_t, 0);

    SearchNode root;
    root.level = n_t + 1;
    root.symbols.assign(n_t, GaussInt{});
    CandidateList list{root};
    for (std::size_t level = n_t; level >= 1; --level) {
        LevelResult lr = expand_level(list, kernel, cfg, level, trace);
        out.nodes_per_level[level - 1] = lr.nodes_computed;
        out.total_nodes += lr.nodes_computed;
        out.pops_monotone = out.pops_monotone && lr.pops_monotone;
        list = std::move(lr.children);
    }
    out.candidates = std::move(list);
    return out;
}

/// Runs the search on the triangular system (y_rot, R) in the arithmetic `cfg` selects.
inline DetectResult detect(const CVector& y_rot, const CMatrix& r, const DetectorConfig& cfg,
                           DetectTrace* trace = nullptr) {
    if (cfg.fixed) return detect_with(FixedKernel(y_rot, r, cfg.n_t, *cfg.fixed), cfg, trace);
    return detect_with(FloatKernel(y_rot, r, cfg.n_t), cfg, trace);
}

/// Recomputes a full-length node's ped from scratch in floating point:
/// sum over levels of |y_rot[l] - sum_{j>=l} R[l,j] z[j]|^2.
inline double full_residual_ped(const CVector& y_rot, const CMatrix& r, std::span<const GaussInt> z) {
    double ped = 0.0;
    for (std::size_t row = 0; row < z.size(); ++row) {
        cplx res = y_rot[row];
        for (std::size_t j = row; j < z.size(); ++j) res -= r(row, j) * z[j].to_complex();
        ped = ped_increment(ped, res);
    }
    return ped;
}

// ---------------------------------------------------------------------------
// Constellation mapping back from the reduced domain

/// Mean energy of the odd-integer grid: 2 (m - 1) / 3.
inline double mean_symbol_energy(unsigned m) { return 2.0 * (static_cast<double>(m) - 1.0) / 3.0; }

/// Nearest odd integer, clamped to [-(L-1), L-1].
inline double quantize_axis(double x, unsigned axis_levels) {
    const double lim = static_cast<double>(axis_levels) - 1.0;
    const double odd = 2.0 * std::floor(x / 2.0) + 1.0;
    return std::clamp(odd, -lim, lim);
}

inline cplx quantize_symbol(cplx s, unsigned axis_levels) {
    return {quantize_axis(s.real(), axis_levels), quantize_axis(s.imag(), axis_levels)};
}

/// s = Q(2 T z + (1+j)).
inline CVector unmap(std::span<const GaussInt> z_hat, const CMatrix& t, unsigned m) {
    if (t.cols() != z_hat.size()) throw std::invalid_argument("unmap: dimension mismatch");
    DetectorConfig probe;
    probe.m = m;
    const unsigned levels = probe.axis_levels();
    CVector z(z_hat.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = z_hat[i].to_complex();
    const CVector tz = t * z;
    CVector out(tz.size());
    for (std::size_t i = 0; i < tz.size(); ++i) out[i] = quantize_symbol(2.0 * tz[i] + cplx{1.0, 1.0}, levels);
    return out;
}

// ---------------------------------------------------------------------------
// Receiver chain

struct Preprocessed {
    CMatrix transform;  // T
    CMatrix r;          // leading n_t x n_t block of R
    CVector y_rot;      // leading n_t entries of Q^H y~
};

/// MMSE extension -> LLL -> QR -> shift/scale -> rotation.
inline Preprocessed preprocess(const CMatrix& h, const CVector& y, double noise_power, double signal_variance,
                               const DetectorConfig& cfg) {
    const ExtendedSystem ext = mmse_extend(h, y, cfg.regularize ? noise_power : 0.0, signal_variance);
    LrOutput lr = lll_reduce(ext.h_ext, cfg.lll_delta);
    const QrResult qr = qr_decompose(lr.reduced_basis);
    const std::size_t n = h.cols();
    const CMatrix q_thin = qr.q.block(0, 0, qr.q.rows(), n);
    return Preprocessed{std::move(lr.transform), qr.r.block(0, 0, n, n),
                        rotate_received(q_thin, shift_scale(ext.y_ext, ext.h_ext))};
}

struct Decision {
    CVector symbols;
    DetectResult detection;
};

/// Full hard-decision receiver: preprocessing, K-best search and unmapping.
inline Decision lr_kbest_receive(const CMatrix& h, const CVector& y, double noise_power, const DetectorConfig& cfg,
                                 DetectTrace* trace = nullptr) {
    const Preprocessed pre = preprocess(h, y, noise_power, mean_symbol_energy(cfg.m) / 2.0, cfg);
    Decision out;
    out.detection = detect(pre.y_rot, pre.r, cfg, trace);
    out.symbols = unmap(out.detection.candidates.front().symbols, pre.transform, cfg.m);
    return out;
}

}  // namespace kbest
