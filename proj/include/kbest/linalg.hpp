#pragma once

// Channel preprocessing in floating point: MMSE extension, shifting and
// scaling onto the Gaussian-integer lattice, complex LLL reduction and QR.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>

#include "kbest/matrix.hpp"

namespace kbest {

/// Thrown when a basis or channel is (numerically) rank deficient.
class RankDeficientError : public std::runtime_error {
public:
    explicit RankDeficientError(std::size_t column)
        : std::runtime_error("rank deficient: column " + std::to_string(column) +
                             " is linearly dependent on the preceding columns"),
          column_(column) {}
    std::size_t column() const { return column_; }

private:
    std::size_t column_;
};

/// Rounds both parts to the nearest integer (ties away from zero).
inline cplx gaussian_round(cplx z) { return {std::round(z.real()), std::round(z.imag())}; }

// ---------------------------------------------------------------------------
// MMSE extension and lattice shift

struct ExtendedSystem {
    CMatrix h_ext;  // (N_R + N_T) x N_T
    CVector y_ext;  // N_R + N_T
};

/// Stacks sqrt(noise_power / (2 signal_variance)) * I under H and zeros under y.
inline ExtendedSystem mmse_extend(const CMatrix& h, const CVector& y, double noise_power, double signal_variance) {
    if (y.size() != h.rows()) throw std::invalid_argument("mmse_extend: y length does not match H rows");
    if (!(signal_variance > 0.0)) throw std::invalid_argument("mmse_extend: signal_variance must be positive");
    if (noise_power < 0.0) throw std::invalid_argument("mmse_extend: noise_power must be nonnegative");
    const std::size_t nr = h.rows(), nt = h.cols();
    const double reg = std::sqrt(noise_power / (2.0 * signal_variance));
    ExtendedSystem out{CMatrix(nr + nt, nt), CVector(nr + nt)};
    for (std::size_t r = 0; r < nr; ++r)
        for (std::size_t c = 0; c < nt; ++c) out.h_ext(r, c) = h(r, c);
    for (std::size_t i = 0; i < nt; ++i) out.h_ext(nr + i, i) = reg;
    for (std::size_t r = 0; r < nr; ++r) out.y_ext[r] = y[r];
    return out;
}

/// (y_ext - H_ext (1+j) 1) / 2: maps odd-integer QAM points onto Gaussian integers.
inline CVector shift_scale(const CVector& y_ext, const CMatrix& h_ext) {
    if (y_ext.size() != h_ext.rows()) throw std::invalid_argument("shift_scale: dimension mismatch");
    const CVector offset = h_ext * CVector(h_ext.cols(), cplx{1.0, 1.0});
    CVector out(y_ext.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (y_ext[i] - offset[i]) / 2.0;
    return out;
}

// ---------------------------------------------------------------------------
// QR

struct QrResult {
    CMatrix q;  // m x m unitary
    CMatrix r;  // m x n, upper triangular, real positive diagonal
};

namespace detail {

inline cplx dot_conj(const CMatrix& q, std::size_t col, const CVector& v) {
    cplx acc{};
    for (std::size_t r = 0; r < q.rows(); ++r) acc += std::conj(q(r, col)) * v[r];
    return acc;
}

}  // namespace detail

/// Modified Gram-Schmidt with one reorthogonalization pass. The first n
/// columns of Q span A; the remaining m - n complete an orthonormal basis.
inline QrResult qr_decompose(const CMatrix& a) {
    const std::size_t m = a.rows(), n = a.cols();
    if (m < n) throw std::invalid_argument("qr_decompose: needs rows >= cols");
    QrResult out{CMatrix(m, m), CMatrix(m, n)};
    CVector v(m);

    auto orthogonalize = [&](std::size_t ncols, CVector& vec, std::size_t r_col, bool record) {
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t i = 0; i < ncols; ++i) {
                const cplx c = detail::dot_conj(out.q, i, vec);
                if (record) out.r(i, r_col) += c;
                for (std::size_t r = 0; r < m; ++r) vec[r] -= c * out.q(r, i);
            }
    };

    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t r = 0; r < m; ++r) v[r] = a(r, j);
        const double original = norm(v);
        orthogonalize(j, v, j, true);
        const double nrm = norm(v);
        if (!(nrm > 1e-12 * original) || nrm == 0.0) throw RankDeficientError(j);
        out.r(j, j) = nrm;
        for (std::size_t r = 0; r < m; ++r) out.q(r, j) = v[r] / nrm;
    }

    // Complete Q with standard basis vectors that keep a usable residual.
    std::size_t filled = n;
    for (std::size_t e = 0; e < m && filled < m; ++e) {
        std::fill(v.begin(), v.end(), cplx{});
        v[e] = 1.0;
        orthogonalize(filled, v, 0, false);
        const double nrm = norm(v);
        if (nrm < 1e-3) continue;
        for (std::size_t r = 0; r < m; ++r) out.q(r, filled) = v[r] / nrm;
        ++filled;
    }
    return out;
}

/// Q^H y: the received vector in the coordinates of the triangular system.
inline CVector rotate_received(const CMatrix& q, const CVector& y) {
    if (q.rows() != y.size()) throw std::invalid_argument("rotate_received: dimension mismatch");
    CVector out(q.cols());
    for (std::size_t c = 0; c < q.cols(); ++c) out[c] = detail::dot_conj(q, c, y);
    return out;
}

// ---------------------------------------------------------------------------
// Determinant / inverse

inline cplx determinant(CMatrix a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("determinant: matrix not square");
    const std::size_t n = a.rows();
    cplx det = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
        if (a(piv, c) == cplx{}) return 0.0;
        if (piv != c) {
            for (std::size_t k = 0; k < n; ++k) std::swap(a(piv, k), a(c, k));
            det = -det;
        }
        det *= a(c, c);
        for (std::size_t r = c + 1; r < n; ++r) {
            const cplx f = a(r, c) / a(c, c);
            for (std::size_t k = c; k < n; ++k) a(r, k) -= f * a(c, k);
        }
    }
    return det;
}

inline CMatrix inverse(const CMatrix& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("inverse: matrix not square");
    const std::size_t n = m.rows();
    CMatrix a = m;
    CMatrix inv = CMatrix::identity(n);
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
        if (a(piv, c) == cplx{}) throw RankDeficientError(c);
        for (std::size_t k = 0; k < n; ++k) {
            std::swap(a(piv, k), a(c, k));
            std::swap(inv(piv, k), inv(c, k));
        }
        const cplx p = a(c, c);
        for (std::size_t k = 0; k < n; ++k) {
            a(c, k) /= p;
            inv(c, k) /= p;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const cplx f = a(r, c);
            if (f == cplx{}) continue;
            for (std::size_t k = 0; k < n; ++k) {
                a(r, k) -= f * a(c, k);
                inv(r, k) -= f * inv(c, k);
            }
        }
    }
    return inv;
}

/// Gaussian-integer entries and |det| = 1, both within `tol`.
inline bool is_unimodular(const CMatrix& t, double tol = 1e-9) {
    if (t.rows() != t.cols()) throw std::invalid_argument("is_unimodular: matrix not square");
    for (const auto& v : t.data())
        if (std::abs(v - gaussian_round(v)) > tol) return false;
    return std::abs(std::abs(determinant(t)) - 1.0) <= tol;
}

// ---------------------------------------------------------------------------
// Complex LLL

struct LrOutput {
    CMatrix reduced_basis;  // input * transform
    CMatrix transform;      // unimodular
};

/// prod ||b_i|| / sqrt(det(B^H B)); 1 for an orthogonal basis.
inline double orthogonality_defect(const CMatrix& b) {
    const QrResult qr = qr_decompose(b);
    double ratio = 1.0;
    for (std::size_t c = 0; c < b.cols(); ++c) {
        double col = 0.0;
        for (std::size_t r = 0; r < b.rows(); ++r) col += std::norm(b(r, c));
        ratio *= std::sqrt(col) / qr.r(c, c).real();
    }
    return ratio;
}

/// Complex LLL over Gaussian integers. Size reduction leaves every
/// Gram-Schmidt coefficient with |Re|, |Im| <= 1/2, and adjacent columns satisfy
/// delta |r_{k-1,k-1}|^2 <= |r_{k,k}|^2 + |r_{k-1,k}|^2.
inline LrOutput lll_reduce(const CMatrix& basis, double delta = 0.75) {
    if (!(delta > 0.25 && delta <= 1.0)) throw std::invalid_argument("lll_reduce: delta must lie in (0.25, 1]");
    const std::size_t n = basis.cols();
    LrOutput out{basis, CMatrix::identity(n)};
    CMatrix& h = out.reduced_basis;
    CMatrix& t = out.transform;
    // Only the leading n x n block of R is touched from here on.
    CMatrix r = qr_decompose(basis).r.block(0, 0, n, n);

    auto size_reduce = [&](std::size_t k, std::size_t l) {
        const cplx q = gaussian_round(r(l, k) / r(l, l));
        if (q == cplx{}) return;
        for (std::size_t i = 0; i < h.rows(); ++i) h(i, k) -= q * h(i, l);
        for (std::size_t i = 0; i < n; ++i) t(i, k) -= q * t(i, l);
        for (std::size_t i = 0; i <= l; ++i) r(i, k) -= q * r(i, l);
    };

    constexpr std::size_t kMaxIterations = 1'000'000;
    std::size_t iterations = 0;
    std::size_t k = 1;
    while (k < n) {
        if (++iterations > kMaxIterations) throw std::runtime_error("lll_reduce: iteration limit reached");
        size_reduce(k, k - 1);
        const double lhs = delta * std::norm(r(k - 1, k - 1));
        const double rhs = std::norm(r(k, k)) + std::norm(r(k - 1, k));
        if (lhs > rhs) {
            h.swap_cols(k - 1, k);
            t.swap_cols(k - 1, k);
            r.swap_cols(k - 1, k);
            // Restore triangularity on rows k-1, k with a unitary rotation.
            const cplx a = r(k - 1, k - 1), b = r(k, k - 1);
            const double nrm = std::sqrt(std::norm(a) + std::norm(b));
            for (std::size_t c = k - 1; c < n; ++c) {
                const cplx top = r(k - 1, c), bot = r(k, c);
                r(k - 1, c) = (std::conj(a) * top + std::conj(b) * bot) / nrm;
                r(k, c) = (-b * top + a * bot) / nrm;
            }
            r(k, k - 1) = 0.0;
            k = std::max<std::size_t>(k - 1, 1);
        } else {
            for (std::size_t l = k - 1; l-- > 0;) size_reduce(k, l);
            ++k;
        }
    }
    return out;
}

}  // namespace kbest
