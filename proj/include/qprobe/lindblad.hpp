#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qprobe/linalg.hpp"

namespace qprobe {

// Internal units: time in fs, rates and energies-over-hbar in fs^-1.
inline constexpr double kHbarEvFs = 0.6582119569;

inline double ev_to_ifs(double ev) { return ev / kHbarEvFs; }
inline double ifs_to_ev(double ifs) { return ifs * kHbarEvFs; }

/// Basis order for the three-level probe: |e>, |f>, |s>.
enum Level : std::size_t { kE = 0, kF = 1, kS = 2 };

struct ThreeLevelParams {
    double g = 0.0;        // coupling, fs^-1
    double delta = 0.0;    // detuning, fs^-1
    double gamma_e = 0.0;  // decay rate of |e>, fs^-1

    /// sqrt(16 g^2 - gamma_e^2), principal branch (imaginary when overdamped).
    complex alpha() const;
    /// 16 g^2 - gamma_e^2
    double alpha_squared() const { return 16.0 * g * g - gamma_e * gamma_e; }
    void validate() const;

    static ThreeLevelParams from_ev(double g_ev, double delta_ev, double gamma_e_ev) {
        return {ev_to_ifs(g_ev), ev_to_ifs(delta_ev), ev_to_ifs(gamma_e_ev)};
    }
};

struct DensityTolerances {
    double hermitian = 1e-10;
    double trace = 1e-10;
    double positivity = 1e-9;
};

/// A validated density matrix: Hermitian, unit trace, positive semidefinite
/// (each within the given tolerances).
class DensityMatrix {
public:
    explicit DensityMatrix(ComplexMatrix mat, std::vector<std::string> labels = {},
                           DensityTolerances tol = {});

    static DensityMatrix pure(std::span<const complex> psi, std::vector<std::string> labels = {});
    static DensityMatrix basis_state(std::size_t dim, std::size_t k, std::vector<std::string> labels = {});

    const ComplexMatrix& mat() const { return mat_; }
    const std::vector<std::string>& labels() const { return labels_; }
    std::size_t dim() const { return mat_.rows(); }
    complex operator()(std::size_t i, std::size_t j) const { return mat_(i, j); }
    double population(std::size_t k) const { return mat_(k, k).real(); }

private:
    ComplexMatrix mat_;
    std::vector<std::string> labels_;
};

std::vector<std::string> three_level_labels();

class TimeGrid {
public:
    TimeGrid(double t_start, double t_end, std::size_t n_points);

    double t_start() const { return t_start_; }
    double t_end() const { return t_end_; }
    std::size_t size() const { return n_points_; }
    double spacing() const { return (t_end_ - t_start_) / static_cast<double>(n_points_ - 1); }
    double operator[](std::size_t i) const;
    std::vector<double> points() const;

private:
    double t_start_;
    double t_end_;
    std::size_t n_points_;
};

ComplexMatrix build_hamiltonian(const ThreeLevelParams& p);
ComplexMatrix jump_operator(const ThreeLevelParams& p);

/// GKSL right-hand side: -i[H, rho] + sum_k (L rho L^+ - 1/2 {L^+ L, rho}).
ComplexMatrix gksl_rhs(const ComplexMatrix& rho, const ComplexMatrix& h,
                       std::span<const ComplexMatrix> jumps);
ComplexMatrix gksl_rhs(const DensityMatrix& rho, const ComplexMatrix& h,
                       std::span<const ComplexMatrix> jumps);

inline constexpr double kDefaultDt = 0.01;  // fs

/// Fixed-step RK4 integration of the GKSL equation; rho0 is the state at
/// t = 0 and the trajectory is sampled at every grid point.
std::vector<DensityMatrix> evolve_gksl(const ComplexMatrix& h, std::span<const ComplexMatrix> jumps,
                                       const DensityMatrix& rho0, const TimeGrid& grid,
                                       double dt = kDefaultDt);
std::vector<DensityMatrix> evolve_gksl(const ThreeLevelParams& p, const DensityMatrix& rho0,
                                       const TimeGrid& grid, double dt = kDefaultDt);

/// Resonant closed-form solution from |f>: psi_f = E a, psi_e = -i E b with
/// E = exp(-gamma_e t / 4). Derivatives are with respect to g.
struct ResonantAmplitudes {
    double envelope2;  // E^2 = exp(-gamma_e t / 2)
    double a;
    double b;
    double da_dg;
    double db_dg;
};

ResonantAmplitudes resonant_amplitudes(const ThreeLevelParams& p, double t);

/// Closed-form rho(t) for Delta = 0 and initial state |f><f|.
DensityMatrix analytic_rho(const ThreeLevelParams& p, double t);

}  // namespace qprobe
