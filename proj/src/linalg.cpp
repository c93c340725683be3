#include "qprobe/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qprobe/errors.hpp"

namespace qprobe {

namespace {

void require_finite(std::span<const complex> data) {
    for (const auto& z : data) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
            throw ValidationError("ComplexMatrix: non-finite entry");
        }
    }
}

void require_same_shape(const ComplexMatrix& a, const ComplexMatrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
    }
}

}  // namespace

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols) {}

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<complex> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("ComplexMatrix: entries length " + std::to_string(data_.size()) +
                         " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
    require_finite(data_);
}

ComplexMatrix::ComplexMatrix(std::initializer_list<std::initializer_list<complex>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw ShapeError("ComplexMatrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
    require_finite(data_);
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const double> values) {
    ComplexMatrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
}

ComplexMatrix ComplexMatrix::outer(std::span<const complex> u, std::span<const complex> v) {
    ComplexMatrix m(u.size(), v.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * std::conj(v[j]);
    }
    return m;
}

ComplexMatrix ComplexMatrix::from_columns(std::span<const CVector> columns) {
    if (columns.empty()) return {};
    const std::size_t n = columns.front().size();
    ComplexMatrix m(n, columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j].size() != n) throw ShapeError("from_columns: ragged columns");
        for (std::size_t i = 0; i < n; ++i) m(i, j) = columns[j][i];
    }
    return m;
}

CVector ComplexMatrix::column(std::size_t j) const {
    CVector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
}

complex ComplexMatrix::trace() const {
    complex t = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
}

double ComplexMatrix::max_abs() const {
    double m = 0.0;
    for (const auto& z : data_) m = std::max(m, std::abs(z));
    return m;
}

ComplexMatrix& ComplexMatrix::operator+=(const ComplexMatrix& other) {
    require_same_shape(*this, other, "operator+");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
}

ComplexMatrix& ComplexMatrix::operator-=(const ComplexMatrix& other) {
    require_same_shape(*this, other, "operator-");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
    return *this;
}

ComplexMatrix& ComplexMatrix::operator*=(complex s) {
    for (auto& z : data_) z *= s;
    return *this;
}

ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    ComplexMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const complex aik = a(i, k);
            if (aik == complex{}) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

CVector matvec(const ComplexMatrix& a, std::span<const complex> x) {
    if (a.cols() != x.size()) throw ShapeError("matvec: dimension mismatch");
    CVector y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        complex s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

ComplexMatrix adjoint(const ComplexMatrix& a) {
    ComplexMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = std::conj(a(i, j));
    }
    return t;
}

double hermiticity_defect(const ComplexMatrix& a) {
    if (!a.is_square()) throw ShapeError("hermiticity_defect: matrix not square");
    double d = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = i; j < a.cols(); ++j) {
            d = std::max(d, std::abs(a(i, j) - std::conj(a(j, i))));
        }
    }
    return d;
}

double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double d = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) d = std::max(d, std::abs(a(i, j) - b(i, j)));
    }
    return d;
}

complex inner(std::span<const complex> u, std::span<const complex> v) {
    if (u.size() != v.size()) throw ShapeError("inner: length mismatch");
    complex s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += std::conj(u[i]) * v[i];
    return s;
}

double norm(std::span<const complex> v) {
    double s = 0.0;
    for (const auto& z : v) s += std::norm(z);
    return std::sqrt(s);
}

EigenDecomposition hermitian_eigen(const ComplexMatrix& input, double tol) {
    if (!input.is_square()) throw ShapeError("hermitian_eigen: matrix not square");
    const double defect = hermiticity_defect(input);
    if (defect > tol) {
        throw ValidationError("hermitian_eigen: matrix not Hermitian (defect " +
                              std::to_string(defect) + ")");
    }
    const std::size_t n = input.rows();
    ComplexMatrix a = input;
    for (std::size_t i = 0; i < n; ++i) {
        a(i, i) = a(i, i).real();
        for (std::size_t j = i + 1; j < n; ++j) {
            const complex avg = 0.5 * (a(i, j) + std::conj(a(j, i)));
            a(i, j) = avg;
            a(j, i) = std::conj(avg);
        }
    }
    ComplexMatrix v = ComplexMatrix::identity(n);

    double frob2 = 0.0;
    for (const auto& z : a.entries()) frob2 += std::norm(z);
    const double frob = std::sqrt(frob2);

    constexpr int kSweepBudget = 100;
    bool converged = frob == 0.0;
    for (int sweep = 0; sweep < kSweepBudget && !converged; ++sweep) {
        double off2 = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) off2 += std::norm(a(p, q));
        }
        if (std::sqrt(2.0 * off2) <= 1e-15 * frob) {
            converged = true;
            break;
        }
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double r = std::abs(a(p, q));
                if (r <= 1e-18 * frob) continue;
                const complex phase = a(p, q) / r;  // e^{i phi}
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double zeta = (aqq - app) / (2.0 * r);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                // U = [[c, s e^{i phi}], [-s e^{-i phi}, c]] on the (p, q) plane.
                const complex u_pq = s * phase;
                const complex u_qp = -s * std::conj(phase);
                for (std::size_t k = 0; k < n; ++k) {
                    const complex akp = a(k, p);
                    const complex akq = a(k, q);
                    a(k, p) = akp * c + akq * u_qp;
                    a(k, q) = akp * u_pq + akq * c;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const complex apk = a(p, k);
                    const complex aqk = a(q, k);
                    a(p, k) = c * apk + std::conj(u_qp) * aqk;
                    a(q, k) = std::conj(u_pq) * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = a(p, p).real();
                a(q, q) = a(q, q).real();
                for (std::size_t k = 0; k < n; ++k) {
                    const complex vkp = v(k, p);
                    const complex vkq = v(k, q);
                    v(k, p) = vkp * c + vkq * u_qp;
                    v(k, q) = vkp * u_pq + vkq * c;
                }
            }
        }
    }
    if (!converged) {
        throw NumericalError("hermitian_eigen: Jacobi sweeps did not converge within budget");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return a(i, i).real() < a(j, j).real();
    });

    EigenDecomposition out;
    out.eigenvalues.resize(n);
    out.eigenvectors = ComplexMatrix(n, n);
    for (std::size_t col = 0; col < n; ++col) {
        const std::size_t src = order[col];
        out.eigenvalues[col] = a(src, src).real();
        std::size_t big = 0;
        for (std::size_t k = 1; k < n; ++k) {
            if (std::abs(v(k, src)) > std::abs(v(big, src)) * (1.0 + 1e-12)) big = k;
        }
        const complex pivot = v(big, src);
        const complex fix = std::abs(pivot) > 0.0 ? std::conj(pivot) / std::abs(pivot) : complex{1.0};
        for (std::size_t k = 0; k < n; ++k) out.eigenvectors(k, col) = v(k, src) * fix;
        out.eigenvectors(big, col) = std::abs(pivot);
    }
    return out;
}

ComplexMatrix gram_schmidt(std::span<const CVector> seed_vectors, double rank_tol) {
    if (seed_vectors.empty()) throw ValidationError("gram_schmidt: no seed vectors");
    const std::size_t dim = seed_vectors.front().size();
    if (seed_vectors.size() > dim) {
        throw ValidationError("gram_schmidt: more seed vectors than dimensions");
    }
    std::vector<CVector> basis;
    basis.reserve(seed_vectors.size());
    for (std::size_t j = 0; j < seed_vectors.size(); ++j) {
        const CVector& seed = seed_vectors[j];
        if (seed.size() != dim) throw ShapeError("gram_schmidt: seed vectors differ in length");
        const double seed_norm = norm(seed);
        CVector w = seed;
        for (int pass = 0; pass < 2; ++pass) {
            std::vector<complex> coeff(basis.size());
            for (std::size_t i = 0; i < basis.size(); ++i) coeff[i] = inner(basis[i], w);
            for (std::size_t i = 0; i < basis.size(); ++i) {
                for (std::size_t k = 0; k < dim; ++k) w[k] -= coeff[i] * basis[i][k];
            }
        }
        const double wn = norm(w);
        if (seed_norm == 0.0 || wn <= rank_tol * seed_norm) {
            throw ValidationError("gram_schmidt: seed vector " + std::to_string(j) +
                                  " is linearly dependent on its predecessors");
        }
        for (auto& z : w) z /= wn;
        basis.push_back(std::move(w));
    }
    return ComplexMatrix::from_columns(basis);
}

}  // namespace qprobe
