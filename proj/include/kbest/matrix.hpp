#pragma once

// Dense complex matrices and vectors, plus the plain-text fixture format:
//
//   rows cols
//   a+bi a+bi ...      (one row per line)
//
// Blank lines and lines starting with '#' are ignored.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kbest {

using cplx = std::complex<double>;

class CMatrix {
public:
    CMatrix() = default;
    CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
    CMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> row_major)
        : rows_(rows), cols_(cols), data_(std::move(row_major)) {
        if (data_.size() != rows_ * cols_) throw std::invalid_argument("CMatrix: entry count does not match shape");
    }
    CMatrix(std::initializer_list<std::initializer_list<cplx>> rows) {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw std::invalid_argument("CMatrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static CMatrix identity(std::size_t n) {
        CMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    const std::vector<cplx>& data() const { return data_; }

    CMatrix adjoint() const {
        CMatrix out(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
        return out;
    }

    CMatrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
        if (r0 + nr > rows_ || c0 + nc > cols_) throw std::out_of_range("CMatrix::block");
        CMatrix out(nr, nc);
        for (std::size_t r = 0; r < nr; ++r)
            for (std::size_t c = 0; c < nc; ++c) out(r, c) = (*this)(r0 + r, c0 + c);
        return out;
    }

    void swap_cols(std::size_t a, std::size_t b) {
        for (std::size_t r = 0; r < rows_; ++r) std::swap((*this)(r, a), (*this)(r, b));
    }

    friend bool operator==(const CMatrix&, const CMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

using CVector = std::vector<cplx>;

inline CMatrix operator*(const CMatrix& a, const CMatrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matrix product: inner dimensions differ");
    CMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const cplx aik = a(i, k);
            if (aik == cplx{}) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    return out;
}

inline CVector operator*(const CMatrix& a, const CVector& x) {
    if (a.cols() != x.size()) throw std::invalid_argument("matrix-vector product: dimensions differ");
    CVector out(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        cplx acc{};
        for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * x[k];
        out[i] = acc;
    }
    return out;
}

inline CMatrix operator-(const CMatrix& a, const CMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("matrix difference: shapes differ");
    CMatrix out(a.rows(), a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c) - b(r, c);
    return out;
}

/// Largest entry magnitude.
inline double max_abs(const CMatrix& a) {
    double m = 0.0;
    for (const auto& v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

inline double norm(const CVector& v) {
    double s = 0.0;
    for (const auto& x : v) s += std::norm(x);
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Text format

/// Parse failure carrying the 1-based line number of the offending line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Formats a complex entry as "a+bi" with round-trip precision.
inline std::string format_complex(cplx z) {
    char buf[64];
    const double im = z.imag();
    std::snprintf(buf, sizeof buf, "%.17g%c%.17gi", z.real(), std::signbit(im) ? '-' : '+', std::fabs(im));
    return buf;
}

/// Parses "a+bi", "a-bi", "a", or "bi". Returns false on malformed input.
inline bool parse_complex(const std::string& tok, cplx& out) {
    if (tok.empty()) return false;
    auto parse_real = [](const std::string& s, double& v) {
        if (s.empty()) return false;
        std::size_t used = 0;
        try {
            v = std::stod(s, &used);
        } catch (...) {
            return false;
        }
        return used == s.size() && std::isfinite(v);
    };
    if (tok.back() != 'i') {
        double re = 0.0;
        if (!parse_real(tok, re)) return false;
        out = {re, 0.0};
        return true;
    }
    const std::string body = tok.substr(0, tok.size() - 1);
    // Split at the last sign that is neither leading nor an exponent sign.
    std::size_t split = std::string::npos;
    for (std::size_t i = body.size(); i-- > 1;) {
        if ((body[i] == '+' || body[i] == '-') && body[i - 1] != 'e' && body[i - 1] != 'E') {
            split = i;
            break;
        }
    }
    double re = 0.0, im = 0.0;
    if (split == std::string::npos) {
        if (!parse_real(body, im)) return false;
    } else {
        if (!parse_real(body.substr(0, split), re)) return false;
        std::string imag = body.substr(split);
        if (imag == "+" || imag == "-") imag += "1";
        if (!parse_real(imag, im)) return false;
    }
    out = {re, im};
    return true;
}

inline void write_matrix(std::ostream& os, const CMatrix& m) {
    os << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) os << ' ';
            os << format_complex(m(r, c));
        }
        os << '\n';
    }
}

inline CMatrix read_matrix(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    auto next_content_line = [&](std::string& out) {
        while (std::getline(is, out)) {
            ++lineno;
            const auto first = out.find_first_not_of(" \t\r");
            if (first == std::string::npos || out[first] == '#') continue;
            return true;
        }
        return false;
    };

    if (!next_content_line(line)) throw ParseError(lineno + 1, "missing 'rows cols' header");
    std::istringstream header(line);
    long long rows = -1, cols = -1;
    std::string extra;
    if (!(header >> rows >> cols) || (header >> extra) || rows <= 0 || cols <= 0)
        throw ParseError(lineno, "header must be two positive integers 'rows cols'");

    CMatrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    for (long long r = 0; r < rows; ++r) {
        if (!next_content_line(line))
            throw ParseError(lineno + 1, "expected " + std::to_string(rows) + " rows, found " + std::to_string(r));
        std::istringstream row(line);
        std::string tok;
        long long c = 0;
        while (row >> tok) {
            if (c >= cols) throw ParseError(lineno, "too many entries (expected " + std::to_string(cols) + ")");
            cplx v;
            if (!parse_complex(tok, v)) throw ParseError(lineno, "malformed entry '" + tok + "'");
            m(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = v;
            ++c;
        }
        if (c != cols)
            throw ParseError(lineno, "expected " + std::to_string(cols) + " entries, found " + std::to_string(c));
    }
    if (next_content_line(line)) throw ParseError(lineno, "trailing content after matrix");
    return m;
}

/// A vector fixture is an n x 1 or 1 x n matrix.
inline CVector matrix_to_vector(const CMatrix& m) {
    if (m.cols() != 1 && m.rows() != 1) throw std::invalid_argument("expected a single row or column");
    return m.data();
}

}  // namespace kbest
