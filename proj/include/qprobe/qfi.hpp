#pragma once

#include <span>
#include <string>
#include <vector>

#include "qprobe/lindblad.hpp"
#include "qprobe/linalg.hpp"

namespace qprobe {

enum class Parameter { g, delta };

std::string to_string(Parameter p);
Parameter parameter_from_string(const std::string& name);

struct ParamDerivativeSpec {
    enum class Method { analytic, central_difference };
    Method method = Method::analytic;
    double step = 1e-5;  // relative step for central differences

    void validate() const;
};

/// Where rho(t) comes from: the resonant closed form or the RK4 integrator.
enum class RhoSource { analytic, integrator };

struct Window {
    double lo;
    double hi;
};

inline constexpr double kDefaultWindowThreshold = 0.7;
inline constexpr double kEigenPairCutoff = 1e-12;  // relative to trace(rho)

struct QfiSeries {
    std::vector<double> times;   // fs
    std::vector<double> values;  // fs^2 for rate parameters
    Parameter parameter = Parameter::g;
    double peak_time = 0.0;
    double peak_value = 0.0;
    Window window{0.0, 0.0};
};

/// Symmetric logarithmic derivative in the computational basis. Eigenpairs
/// with lambda_a + lambda_b <= tol * trace(rho) are left out.
ComplexMatrix sld(const ComplexMatrix& rho, const ComplexMatrix& drho, double tol = kEigenPairCutoff);
ComplexMatrix sld(const DensityMatrix& rho, const ComplexMatrix& drho, double tol = kEigenPairCutoff);

/// Mixed-state QFI. rho only has to be Hermitian and positive semidefinite;
/// sub-normalized matrices are accepted.
double qfi_mixed(const ComplexMatrix& rho, const ComplexMatrix& drho, double tol = kEigenPairCutoff);
double qfi_mixed(const DensityMatrix& rho, const ComplexMatrix& drho, double tol = kEigenPairCutoff);

enum class NormCheck { checked, unchecked };

/// Pure-state QFI 4 Re[<dpsi|dpsi> - <dpsi|psi><psi|dpsi>]. The formula
/// assumes a normalized state; NormCheck::unchecked evaluates it anyway.
double qfi_pure(std::span<const complex> psi, std::span<const complex> dpsi,
                NormCheck check = NormCheck::checked);

/// d rho / d x of the three-level probe started in |f><f|.
ComplexMatrix d_rho(const ThreeLevelParams& p, double t, Parameter wrt, const ParamDerivativeSpec& spec,
                    RhoSource source);

/// Absolute finite-difference step for parameter x at relative step h.
double finite_difference_step(const ThreeLevelParams& p, Parameter wrt, double h);
ThreeLevelParams shifted(ThreeLevelParams p, Parameter wrt, double dx);

/// F(t) on the grid. The closed form is used when Delta = 0, wrt = g and the
/// initial state is |f><f|; anything else goes through the integrator with
/// central differences.
QfiSeries qfi_series(const ThreeLevelParams& p, const DensityMatrix& rho0, const TimeGrid& grid, Parameter wrt,
                     const ParamDerivativeSpec& spec = {}, double window_threshold = kDefaultWindowThreshold);

/// Assembles a series from sampled values: grid argmax refined by a parabola
/// through its neighbours, plus the window at the given threshold.
QfiSeries make_series(std::vector<double> times, std::vector<double> values, Parameter parameter,
                      double window_threshold = kDefaultWindowThreshold);

/// Maximal contiguous grid interval around the peak with F >= fraction * peak,
/// widened to the grid cell holding the refined peak time if needed.
Window find_optimal_window(const QfiSeries& series, double threshold_fraction);

}  // namespace qprobe
