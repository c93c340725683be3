#include "qprobe/lindblad.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qprobe/errors.hpp"

namespace qprobe {

complex ThreeLevelParams::alpha() const {
    // +0.0 imaginary part keeps sqrt of a negative real on the +i side.
    return std::sqrt(complex{alpha_squared(), 0.0});
}

void ThreeLevelParams::validate() const {
    if (!std::isfinite(g) || !std::isfinite(delta) || !std::isfinite(gamma_e)) {
        throw ValidationError("ThreeLevelParams: non-finite parameter");
    }
    if (gamma_e < 0.0) throw ValidationError("ThreeLevelParams: gamma_e must be >= 0");
}

DensityMatrix::DensityMatrix(ComplexMatrix mat, std::vector<std::string> labels, DensityTolerances tol)
    : mat_(std::move(mat)), labels_(std::move(labels)) {
    if (!mat_.is_square() || mat_.rows() == 0) {
        throw ShapeError("DensityMatrix: matrix must be square and non-empty");
    }
    if (!labels_.empty() && labels_.size() != mat_.rows()) {
        throw ShapeError("DensityMatrix: label count does not match dimension");
    }
    const double herm = hermiticity_defect(mat_);
    if (herm > tol.hermitian) {
        throw ValidationError("DensityMatrix: not Hermitian (defect " + std::to_string(herm) + ")");
    }
    const double tr = mat_.trace().real();
    if (std::abs(tr - 1.0) > tol.trace) {
        std::ostringstream os;
        os.precision(17);
        os << "DensityMatrix: trace " << tr << " != 1";
        throw ValidationError(os.str());
    }
    const auto eig = hermitian_eigen(mat_, tol.hermitian);
    if (eig.eigenvalues.front() < -tol.positivity) {
        throw ValidationError("DensityMatrix: negative eigenvalue " +
                              std::to_string(eig.eigenvalues.front()));
    }
}

DensityMatrix DensityMatrix::pure(std::span<const complex> psi, std::vector<std::string> labels) {
    return DensityMatrix(ComplexMatrix::outer(psi, psi), std::move(labels));
}

DensityMatrix DensityMatrix::basis_state(std::size_t dim, std::size_t k, std::vector<std::string> labels) {
    if (k >= dim) throw ValidationError("basis_state: index out of range");
    ComplexMatrix m(dim, dim);
    m(k, k) = 1.0;
    return DensityMatrix(std::move(m), std::move(labels));
}

std::vector<std::string> three_level_labels() { return {"e", "f", "s"}; }

TimeGrid::TimeGrid(double t_start, double t_end, std::size_t n_points)
    : t_start_(t_start), t_end_(t_end), n_points_(n_points) {
    if (!(t_end > t_start)) throw ValidationError("TimeGrid: t_end must exceed t_start");
    if (n_points < 2) throw ValidationError("TimeGrid: need at least 2 points");
}

double TimeGrid::operator[](std::size_t i) const {
    if (i + 1 == n_points_) return t_end_;
    return t_start_ + spacing() * static_cast<double>(i);
}

std::vector<double> TimeGrid::points() const {
    std::vector<double> t(n_points_);
    for (std::size_t i = 0; i < n_points_; ++i) t[i] = (*this)[i];
    return t;
}

ComplexMatrix build_hamiltonian(const ThreeLevelParams& p) {
    ComplexMatrix h(3, 3);
    h(kE, kF) = p.g;
    h(kF, kE) = p.g;
    h(kF, kF) = p.delta;
    h(kE, kE) = -p.delta;
    return h;
}

ComplexMatrix jump_operator(const ThreeLevelParams& p) {
    if (p.gamma_e < 0.0) throw ValidationError("jump_operator: negative decay rate");
    ComplexMatrix l(3, 3);
    l(kS, kE) = std::sqrt(p.gamma_e);
    return l;
}

ComplexMatrix gksl_rhs(const ComplexMatrix& rho, const ComplexMatrix& h,
                       std::span<const ComplexMatrix> jumps) {
    const std::size_t n = rho.rows();
    if (!rho.is_square() || h.rows() != n || h.cols() != n) {
        throw ShapeError("gksl_rhs: rho and H must be square and of equal dimension");
    }
    const complex minus_i{0.0, -1.0};
    ComplexMatrix out = (matmul(h, rho) - matmul(rho, h)) * minus_i;
    for (const auto& l : jumps) {
        if (l.rows() != n || l.cols() != n) throw ShapeError("gksl_rhs: jump operator dimension mismatch");
        const ComplexMatrix ld = adjoint(l);
        const ComplexMatrix ldl = matmul(ld, l);
        out += matmul(matmul(l, rho), ld);
        out -= (matmul(ldl, rho) + matmul(rho, ldl)) * complex{0.5};
    }
    return out;
}

ComplexMatrix gksl_rhs(const DensityMatrix& rho, const ComplexMatrix& h,
                       std::span<const ComplexMatrix> jumps) {
    return gksl_rhs(rho.mat(), h, jumps);
}

namespace {

// rhs = -i (K rho - rho K^+) + sum L rho L^+ with K = H - i/2 sum L^+ L,
// evaluated into preallocated storage.
class GkslStepper {
public:
    GkslStepper(const ComplexMatrix& h, std::span<const ComplexMatrix> jumps) : n_(h.rows()), k_(h) {
        for (const auto& l : jumps) {
            k_ -= matmul(adjoint(l), l) * complex{0.0, 0.5};
            std::vector<Entry> nz;
            for (std::size_t i = 0; i < n_; ++i) {
                for (std::size_t j = 0; j < n_; ++j) {
                    if (l(i, j) != complex{}) nz.push_back({i, j, l(i, j)});
                }
            }
            jumps_.push_back(std::move(nz));
        }
        kdag_ = adjoint(k_);
        for (auto* m : {&k1_, &k2_, &k3_, &k4_, &tmp_}) *m = ComplexMatrix(n_, n_);
    }

    void rhs(const ComplexMatrix& rho, ComplexMatrix& out) const {
        const complex minus_i{0.0, -1.0};
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                complex s = 0.0;
                for (std::size_t m = 0; m < n_; ++m) s += k_(i, m) * rho(m, j) - rho(i, m) * kdag_(m, j);
                out(i, j) = minus_i * s;
            }
        }
        for (const auto& nz : jumps_) {
            for (const auto& a : nz) {
                for (const auto& b : nz) {
                    out(a.i, b.i) += a.v * rho(a.j, b.j) * std::conj(b.v);
                }
            }
        }
    }

    void step(ComplexMatrix& rho, double h) {
        auto axpy = [](const ComplexMatrix& x, const ComplexMatrix& k, double c, ComplexMatrix& y) {
            auto xs = x.entries();
            auto ks = k.entries();
            auto ys = y.data();
            for (std::size_t q = 0; q < ys.size(); ++q) ys[q] = xs[q] + c * ks[q];
        };
        rhs(rho, k1_);
        axpy(rho, k1_, 0.5 * h, tmp_);
        rhs(tmp_, k2_);
        axpy(rho, k2_, 0.5 * h, tmp_);
        rhs(tmp_, k3_);
        axpy(rho, k3_, h, tmp_);
        rhs(tmp_, k4_);
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                rho(i, j) += (h / 6.0) * (k1_(i, j) + 2.0 * k2_(i, j) + 2.0 * k3_(i, j) + k4_(i, j));
            }
        }
    }

private:
    struct Entry {
        std::size_t i;
        std::size_t j;
        complex v;
    };
    std::size_t n_;
    ComplexMatrix k_;
    ComplexMatrix kdag_;
    std::vector<std::vector<Entry>> jumps_;
    ComplexMatrix k1_, k2_, k3_, k4_, tmp_;
};

int steps_for(double span, double dt) {
    return std::max(1, static_cast<int>(std::ceil(span / dt - 1e-9)));
}

}  // namespace

std::vector<DensityMatrix> evolve_gksl(const ComplexMatrix& h, std::span<const ComplexMatrix> jumps,
                                       const DensityMatrix& rho0, const TimeGrid& grid, double dt) {
    const std::size_t n = rho0.dim();
    if (h.rows() != n || h.cols() != n) throw ShapeError("evolve_gksl: H dimension mismatch");
    for (const auto& l : jumps) {
        if (l.rows() != n || l.cols() != n) throw ShapeError("evolve_gksl: jump dimension mismatch");
    }
    if (!(dt > 0.0) || dt > grid.spacing() * (1.0 + 1e-12)) {
        throw ValidationError("evolve_gksl: dt must be positive and not exceed the grid spacing");
    }
    if (grid.t_start() < 0.0) throw ValidationError("evolve_gksl: grid must start at t >= 0");

    GkslStepper stepper(h, jumps);
    ComplexMatrix rho = rho0.mat();
    const DensityTolerances sample_tol{1e-10, 1e-8, 1e-8};

    if (grid.t_start() > 0.0) {
        const int m = steps_for(grid.t_start(), dt);
        for (int k = 0; k < m; ++k) stepper.step(rho, grid.t_start() / m);
    }

    std::vector<DensityMatrix> out;
    out.reserve(grid.size());
    double t_prev = grid.t_start();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double t = grid[i];
        if (i > 0) {
            const int m = steps_for(t - t_prev, dt);
            const double h_step = (t - t_prev) / m;
            for (int k = 0; k < m; ++k) stepper.step(rho, h_step);
        }
        t_prev = t;
        const double drift = std::abs(rho.trace().real() - 1.0);
        if (!(drift <= 1e-6)) {
            std::ostringstream os;
            os << "evolve_gksl: trace drift " << drift << " at t = " << t << " fs";
            throw NumericalError(os.str());
        }
        out.emplace_back(i == 0 && grid.t_start() == 0.0 ? rho0.mat() : rho, rho0.labels(), sample_tol);
    }
    return out;
}

std::vector<DensityMatrix> evolve_gksl(const ThreeLevelParams& p, const DensityMatrix& rho0,
                                       const TimeGrid& grid, double dt) {
    p.validate();
    if (rho0.dim() != 3) throw ShapeError("evolve_gksl: three-level model needs a 3x3 initial state");
    const ComplexMatrix jumps[] = {jump_operator(p)};
    return evolve_gksl(build_hamiltonian(p), jumps, rho0, grid, dt);
}

namespace {

// Entire functions of w = theta^2:
//   c(w) = cos(theta), s(w) = sin(theta)/theta,
//   d(w) = (theta cos(theta) - sin(theta)) / theta^3 = 2 ds/dw.
// For w < 0 these continue to cosh/sinh of sqrt(-w).
struct EvenTrig {
    double c;
    double s;
    double d;
};

EvenTrig even_trig(double w) {
    if (std::abs(w) < 0.5) {
        // Taylor series; terms fall off like |w|^k / (2k)!.
        double c = 0.0, s = 0.0, d = 0.0;
        double wk = 1.0;        // (-w)^k
        double fact2k = 1.0;    // (2k)!
        for (int k = 0; k < 14; ++k) {
            const double fact2k1 = fact2k * (2 * k + 1);
            c += wk / fact2k;
            s += wk / fact2k1;
            wk *= -w;
            fact2k = fact2k1 * (2 * k + 2);
        }
        // d = sum_{k>=1} (-1)^k w^{k-1} 2k / (2k+1)!
        double wpow = 1.0;  // w^{k-1}
        double fact = 6.0;  // (2k+1)! at k = 1
        for (int k = 1; k < 14; ++k) {
            const double sign = (k % 2 == 1) ? -1.0 : 1.0;
            d += sign * wpow * (2.0 * k) / fact;
            wpow *= w;
            fact *= (2.0 * k + 2.0) * (2.0 * k + 3.0);
        }
        return {c, s, d};
    }
    if (w > 0.0) {
        const double th = std::sqrt(w);
        const double cs = std::cos(th), sn = std::sin(th);
        return {cs, sn / th, (th * cs - sn) / (th * th * th)};
    }
    const double x = std::sqrt(-w);
    const double ch = std::cosh(x), sh = std::sinh(x);
    return {ch, sh / x, -(x * ch - sh) / (x * x * x)};
}

}  // namespace

ResonantAmplitudes resonant_amplitudes(const ThreeLevelParams& p, double t) {
    p.validate();
    const double g = p.g, gam = p.gamma_e;
    const double w = p.alpha_squared() * t * t / 16.0;
    const EvenTrig f = even_trig(w);
    const double t2 = t * t;
    ResonantAmplitudes r;
    r.envelope2 = std::exp(-0.5 * gam * t);
    r.a = f.c + 0.25 * gam * t * f.s;
    r.b = g * t * f.s;
    r.da_dg = -g * t2 * f.s + 0.25 * gam * t * g * t2 * f.d;
    r.db_dg = t * f.s + g * g * t2 * t * f.d;
    return r;
}

DensityMatrix analytic_rho(const ThreeLevelParams& p, double t) {
    p.validate();
    if (p.delta != 0.0) {
        throw UnsupportedConfiguration(
            "analytic_rho: closed form holds only for zero detuning; use evolve_gksl for delta != 0");
    }
    if (t < 0.0) throw ValidationError("analytic_rho: t must be >= 0");
    const ResonantAmplitudes r = resonant_amplitudes(p, t);
    const double ee = r.envelope2 * r.b * r.b;
    const double ff = r.envelope2 * r.a * r.a;
    const double fe = r.envelope2 * r.a * r.b;  // rho_fe = i * fe
    ComplexMatrix m(3, 3);
    m(kE, kE) = ee;
    m(kF, kF) = ff;
    m(kF, kE) = complex{0.0, fe};
    m(kE, kF) = complex{0.0, -fe};
    m(kS, kS) = 1.0 - ee - ff;
    return DensityMatrix(std::move(m), three_level_labels());
}

}  // namespace qprobe
