#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "qprobe/lindblad.hpp"
#include "qprobe/linalg.hpp"
#include "qprobe/qfi.hpp"

namespace qprobe {

using Vec2 = std::array<complex, 2>;

/// Below this |alpha| (fs^-1) the eigenvector expansion is replaced by direct
/// RK4 propagation of the 2-vector.
inline constexpr double kDegeneracyThreshold = 1e-6;

/// 2x2 effective Hamiltonian over (e, f): [[Delta - i gamma_e/2, g], [g, Delta]].
ComplexMatrix build_heff(const ThreeLevelParams& p);

/// Closed-form eigenpairs, lambda_{1,2} = Delta + (-i gamma_e -+ alpha)/4, with
/// psi_k = (1/sqrt 2) ((-i gamma_e -+ alpha)/(4g), 1).
struct NonHermitianEigensystem {
    complex lambda1;
    complex lambda2;
    Vec2 psi1;
    Vec2 psi2;
    complex b;  // mixing coefficient of the |f> initial state
};

NonHermitianEigensystem eigensystem(const ThreeLevelParams& p);

/// States evolved under H_eff from |e> and |f>; not normalized (loss).
Vec2 psi_e(const ThreeLevelParams& p, double t);
Vec2 psi_f(const ThreeLevelParams& p, double t);

/// |psi><psi| with the lost norm appended as the sink population.
DensityMatrix lift_to_3x3(const Vec2& psi);

/// QFI for g from psi_f: the pure-state formula applied to the unnormalized
/// state, the mixed formula on |psi><psi|, and the mixed formula on the lift.
double qfi_nh_pure(const ThreeLevelParams& p, double t, double rel_step = 1e-5);
double qfi_nh_mixed2(const ThreeLevelParams& p, double t, double rel_step = 1e-5);
double qfi_nh_mixed3(const ThreeLevelParams& p, double t, double rel_step = 1e-5);

enum class NProbeInitial { f1, chi1, e_plus_chi1 };

std::string to_string(NProbeInitial s);
NProbeInitial nprobe_initial_from_string(const std::string& name);

/// N probes f_1..f_N coupled to a lossy common level e.
struct NProbeModel {
    std::size_t n_probes = 1;
    double g = 0.0;        // fs^-1
    double gamma_e = 0.0;  // fs^-1
    NProbeInitial initial_state = NProbeInitial::f1;

    void validate() const;
};

/// (N+1)x(N+1) star Hamiltonian over (e, f_1, ..., f_N) with -i gamma_e/2 at (e, e).
ComplexMatrix build_nprobe_hamiltonian(const NProbeModel& m);

/// Unitary with columns e, chi_1 = sum_i f_i / sqrt N, chi_2, ..., chi_N.
ComplexMatrix chi_basis(std::size_t n);

/// psi(0) over (e, f_1, ..., f_N).
CVector nprobe_initial_state(const NProbeModel& m);

/// RK4 propagation of the (N+1)-vector, sampled on the grid.
std::vector<CVector> propagate_nprobe(const NProbeModel& m, const TimeGrid& grid, double dt = kDefaultDt);

/// (N+2)-dimensional density matrices: |psi><psi| plus the sink entry.
std::vector<DensityMatrix> evolve_nprobe(const NProbeModel& m, const TimeGrid& grid, double dt = kDefaultDt);

/// Mixed-state QFI of |psi><psi| (+) (1 - <psi|psi>) given d psi. Equal to
/// qfi_mixed on the lifted matrix, without the eigendecomposition.
double qfi_lifted(std::span<const complex> psi, std::span<const complex> dpsi, double tol = kEigenPairCutoff);

/// F(t) for g by central differences in g.
QfiSeries qfi_nprobe(const NProbeModel& m, const TimeGrid& grid, double rel_step = 1e-5,
                     double window_threshold = kDefaultWindowThreshold);

struct ScalingFit {
    std::vector<std::size_t> n_values;
    std::vector<double> max_qfi;
    std::vector<double> peak_times;
    double exponent = 0.0;
    double exponent_stderr = 0.0;
};

/// y = prefactor * x^exponent by least squares on (log x, log y).
struct PowerLaw {
    double prefactor;
    double exponent;
    double exponent_stderr;
};
PowerLaw fit_power_law(std::span<const double> x, std::span<const double> y);

/// Peak QFI for every N in ns (strictly increasing, at least 4 values) and the
/// power-law exponent over all of them.
ScalingFit max_qfi_scaling(std::span<const std::size_t> ns, const NProbeModel& m_template, const TimeGrid& grid);

}  // namespace qprobe
