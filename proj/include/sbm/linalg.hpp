#pragma once
// Dense small-dimension linear algebra: general matrices, symmetric and PSD
// matrices, a cyclic Jacobi eigensolver and Loewner-order tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sbm {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kMaxSymDim = 8;
inline constexpr double kTolPsd = 1e-10;

using Vector = std::vector<double>;

/// Row-major dense matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
        : rows_(rows), cols_(cols), data_(std::move(row_major)) {
        if (data_.size() != rows * cols)
            throw Error("Matrix: data size does not match shape");
    }
    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw Error("Matrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Matrix diagonal(const Vector& d) {
        Matrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    const std::vector<double>& data() const { return data_; }

    Vector row(std::size_t i) const {
        return Vector(data_.begin() + static_cast<std::ptrdiff_t>(i * cols_),
                      data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols_));
    }
    Vector col(std::size_t j) const {
        Vector c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }

    Matrix transpose() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Matrix& operator+=(const Matrix& o) {
        check_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Matrix& operator-=(const Matrix& o) {
        check_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Matrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }

    friend Matrix operator*(const Matrix& a, const Matrix& b) {
        if (a.cols_ != b.rows_) throw Error("Matrix: product shape mismatch");
        Matrix c(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const double aik = a(i, k);
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

    friend Vector operator*(const Matrix& a, const Vector& x) {
        if (a.cols_ != x.size()) throw Error("Matrix: vector product shape mismatch");
        Vector y(a.rows_, 0.0);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < a.cols_; ++j) s += a(i, j) * x[j];
            y[i] = s;
        }
        return y;
    }

    bool operator==(const Matrix&) const = default;

private:
    void check_same_shape(const Matrix& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_) throw Error("Matrix: shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double trace(const Matrix& m) {
    double t = 0.0;
    for (std::size_t i = 0; i < std::min(m.rows(), m.cols()); ++i) t += m(i, i);
    return t;
}

inline double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data()) s += v * v;
    return std::sqrt(s);
}

inline double max_abs_entry(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data()) s = std::max(s, std::abs(v));
    return s;
}

inline double dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline Matrix outer(const Vector& a, const Vector& b) {
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
    return m;
}

/// Symmetric matrix of dimension 1..kMaxSymDim. Entries are stored exactly
/// symmetric: (i, j) and (j, i) hold the same double.
class SymMatrix {
public:
    SymMatrix() : m_(1, 1) {}
    explicit SymMatrix(std::size_t dim) : m_(dim, dim) { check_dim(dim); }

    /// Accepts a square matrix that is symmetric up to roundoff and stores the
    /// averaged entries.
    explicit SymMatrix(const Matrix& m, double rel_tol = 1e-9) : m_(m) {
        if (m.rows() != m.cols()) throw Error("SymMatrix: matrix is not square");
        check_dim(m.rows());
        const double scale = std::max(1.0, max_abs_entry(m));
        for (std::size_t i = 0; i < dim(); ++i)
            for (std::size_t j = i + 1; j < dim(); ++j) {
                if (std::abs(m(i, j) - m(j, i)) > rel_tol * scale)
                    throw Error("SymMatrix: input is not symmetric");
                const double v = 0.5 * (m(i, j) + m(j, i));
                m_(i, j) = v;
                m_(j, i) = v;
            }
    }

    SymMatrix(std::initializer_list<std::initializer_list<double>> rows)
        : SymMatrix(Matrix(rows)) {}

    static SymMatrix identity(std::size_t dim) { return SymMatrix(Matrix::identity(dim)); }
    static SymMatrix zero(std::size_t dim) { return SymMatrix(dim); }
    static SymMatrix diagonal(const Vector& d) { return SymMatrix(Matrix::diagonal(d)); }

    std::size_t dim() const { return m_.rows(); }
    double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
    void set(std::size_t i, std::size_t j, double v) {
        m_(i, j) = v;
        m_(j, i) = v;
    }
    const Matrix& matrix() const { return m_; }
    operator const Matrix&() const { return m_; }

    friend SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) {
        return SymMatrix(a.m_ + b.m_);
    }
    friend SymMatrix operator-(const SymMatrix& a, const SymMatrix& b) {
        return SymMatrix(a.m_ - b.m_);
    }
    friend SymMatrix operator*(double s, const SymMatrix& a) { return SymMatrix(s * a.m_); }
    friend SymMatrix operator*(const SymMatrix& a, double s) { return SymMatrix(s * a.m_); }

    bool operator==(const SymMatrix&) const = default;

private:
    static void check_dim(std::size_t dim) {
        if (dim < 1 || dim > kMaxSymDim)
            throw Error("SymMatrix: dimension must be in [1, " + std::to_string(kMaxSymDim) + "]");
    }

    Matrix m_;
};

/// A S A^T.
inline SymMatrix congruence(const Matrix& a, const SymMatrix& s) {
    return SymMatrix(a * s.matrix() * a.transpose());
}

/// A B A for symmetric A, B.
inline SymMatrix sandwich(const SymMatrix& a, const SymMatrix& b) {
    return SymMatrix(a.matrix() * b.matrix() * a.matrix());
}

struct EigenDecomposition {
    Vector eigenvalues;  // descending
    Matrix eigenvectors; // columns

    Matrix reconstruct() const {
        return reconstruct_with(eigenvalues);
    }
    Matrix reconstruct_with(const Vector& values) const {
        const std::size_t n = values.size();
        Matrix out(n, n);
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i) {
                const double uik = eigenvectors(i, k) * values[k];
                if (uik == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) out(i, j) += uik * eigenvectors(j, k);
            }
        return out;
    }
};

/// Cyclic Jacobi eigensolver with a fixed row-by-row sweep order. Eigenvalues
/// are returned in descending order; each eigenvector is signed so that its
/// first non-negligible component is positive.
inline EigenDecomposition eig(const SymMatrix& m) {
    const std::size_t n = m.dim();
    Matrix a = m.matrix();
    Matrix v = Matrix::identity(n);

    double total = 0.0;
    for (double x : a.data()) total += x * x;
    const double stop = total * 1e-36;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off <= stop || off == 0.0) break;

        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    EigenDecomposition out{Vector(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = order[k];
        out.eigenvalues[k] = a(src, src);
        double sign = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(v(i, src)) > 1e-12) {
                sign = v(i, src) > 0.0 ? 1.0 : -1.0;
                break;
            }
        }
        for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, k) = sign * v(i, src);
    }
    return out;
}

inline double min_eigenvalue(const SymMatrix& m) { return eig(m).eigenvalues.back(); }
inline double max_eigenvalue(const SymMatrix& m) { return eig(m).eigenvalues.front(); }

/// Positive semidefinite matrix. Eigenvalues in [-kTolPsd * scale, 0) are
/// clamped to zero; anything more negative is rejected.
class PsdMatrix {
public:
    PsdMatrix() : PsdMatrix(SymMatrix::zero(1)) {}
    explicit PsdMatrix(const SymMatrix& s) {
        EigenDecomposition e = eig(s);
        double scale = 0.0;
        for (double l : e.eigenvalues) scale = std::max(scale, std::abs(l));
        bool clamped = false;
        for (double& l : e.eigenvalues) {
            if (l < 0.0) {
                if (l < -kTolPsd * std::max(scale, 1e-300) && l < -1e-300)
                    throw Error("PsdMatrix: matrix has eigenvalue " + std::to_string(l) +
                                " below the PSD tolerance");
                l = 0.0;
                clamped = true;
            }
        }
        value_ = clamped ? SymMatrix(e.reconstruct()) : s;
        eig_ = std::move(e);
    }

    static PsdMatrix zero(std::size_t dim) { return PsdMatrix(SymMatrix::zero(dim)); }
    static PsdMatrix identity(std::size_t dim) { return PsdMatrix(SymMatrix::identity(dim)); }

    /// Projects an arbitrary symmetric matrix onto the PSD cone by clamping
    /// negative eigenvalues.
    static PsdMatrix project(const SymMatrix& s) {
        EigenDecomposition e = eig(s);
        bool clamped = false;
        for (double& l : e.eigenvalues)
            if (l < 0.0) {
                l = 0.0;
                clamped = true;
            }
        SymMatrix value = clamped ? SymMatrix(e.reconstruct()) : s;
        return PsdMatrix(std::move(value), std::move(e));
    }

    std::size_t dim() const { return value_.dim(); }
    const SymMatrix& sym() const { return value_; }
    const Matrix& matrix() const { return value_.matrix(); }
    operator const SymMatrix&() const { return value_; }
    double operator()(std::size_t i, std::size_t j) const { return value_(i, j); }
    const EigenDecomposition& eigen() const { return eig_; }
    double min_eigenvalue() const { return eig_.eigenvalues.back(); }

private:
    PsdMatrix(SymMatrix v, EigenDecomposition e) : value_(std::move(v)), eig_(std::move(e)) {}

    SymMatrix value_;
    EigenDecomposition eig_;
};

/// Unique PSD square root.
inline PsdMatrix psd_sqrt(const PsdMatrix& m) {
    const EigenDecomposition& e = m.eigen();
    Vector roots(e.eigenvalues.size());
    for (std::size_t i = 0; i < roots.size(); ++i) roots[i] = std::sqrt(std::max(0.0, e.eigenvalues[i]));
    return PsdMatrix(SymMatrix(e.reconstruct_with(roots)));
}

/// a ⪯ b up to tol: the smallest eigenvalue of b - a is at least -tol.
inline bool loewner_leq(const SymMatrix& a, const SymMatrix& b, double tol) {
    if (a.dim() != b.dim()) throw Error("loewner_leq: dimension mismatch");
    return min_eigenvalue(b - a) >= -tol;
}

inline SymMatrix inverse(const SymMatrix& m) {
    const EigenDecomposition e = eig(m);
    Vector inv(e.eigenvalues.size());
    for (std::size_t i = 0; i < inv.size(); ++i) {
        if (std::abs(e.eigenvalues[i]) < 1e-300) throw Error("inverse: singular matrix");
        inv[i] = 1.0 / e.eigenvalues[i];
    }
    return SymMatrix(e.reconstruct_with(inv));
}

inline double relative_frobenius_error(const Matrix& got, const Matrix& want) {
    const double denom = std::max(frobenius_norm(want), 1e-300);
    return frobenius_norm(got - want) / denom;
}

} // namespace sbm
