#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace qprobe {

using complex = std::complex<double>;
using CVector = std::vector<complex>;

/// Dense complex matrix, row-major. Entries are finite on construction.
class ComplexMatrix {
public:
    ComplexMatrix() = default;
    ComplexMatrix(std::size_t rows, std::size_t cols);
    ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<complex> entries);
    ComplexMatrix(std::initializer_list<std::initializer_list<complex>> rows);

    static ComplexMatrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols}; }
    static ComplexMatrix identity(std::size_t n);
    static ComplexMatrix diagonal(std::span<const double> values);
    /// Outer product |u><v|.
    static ComplexMatrix outer(std::span<const complex> u, std::span<const complex> v);
    static ComplexMatrix from_columns(std::span<const CVector> columns);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool is_square() const { return rows_ == cols_; }

    complex& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const complex& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const complex> entries() const { return data_; }
    std::span<complex> data() { return data_; }
    CVector column(std::size_t j) const;

    complex trace() const;
    /// Largest entry magnitude.
    double max_abs() const;

    ComplexMatrix& operator+=(const ComplexMatrix& other);
    ComplexMatrix& operator-=(const ComplexMatrix& other);
    ComplexMatrix& operator*=(complex s);

    friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
    friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
    friend ComplexMatrix operator*(ComplexMatrix a, complex s) { return a *= s; }
    friend ComplexMatrix operator*(complex s, ComplexMatrix a) { return a *= s; }

    bool operator==(const ComplexMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<complex> data_;
};

ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b);
CVector matvec(const ComplexMatrix& a, std::span<const complex> x);
ComplexMatrix adjoint(const ComplexMatrix& a);

/// ||a - adjoint(a)||_max
double hermiticity_defect(const ComplexMatrix& a);
/// max |a_ij - b_ij|; shapes must agree.
double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b);

complex inner(std::span<const complex> u, std::span<const complex> v);  // <u|v>
double norm(std::span<const complex> v);

struct EigenDecomposition {
    std::vector<double> eigenvalues;  // ascending
    ComplexMatrix eigenvectors;       // columns, orthonormal
};

inline constexpr double kHermitianTol = 1e-10;

/// Cyclic Jacobi eigensolver for Hermitian matrices. Each eigenvector is
/// phase-fixed so that its largest-magnitude component is real positive.
EigenDecomposition hermitian_eigen(const ComplexMatrix& a, double tol = kHermitianTol);

/// Classical Gram-Schmidt with one re-orthogonalization pass. Returns the
/// orthonormal vectors as columns, in seed order.
ComplexMatrix gram_schmidt(std::span<const CVector> seed_vectors, double rank_tol = 1e-10);

}  // namespace qprobe
