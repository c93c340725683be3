#include "qprobe/qfi.hpp"

#include <algorithm>
#include <cmath>

#include "qprobe/errors.hpp"
#include "qprobe/parallel.hpp"

namespace qprobe {

std::string to_string(Parameter p) { return p == Parameter::g ? "g" : "delta"; }

Parameter parameter_from_string(const std::string& name) {
    if (name == "g") return Parameter::g;
    if (name == "delta") return Parameter::delta;
    throw ValidationError("unknown parameter '" + name + "' (expected g or delta)");
}

void ParamDerivativeSpec::validate() const {
    if (method == Method::central_difference && !(step > 0.0)) {
        throw ValidationError("ParamDerivativeSpec: central-difference step must be positive");
    }
}

namespace {

struct SpectralData {
    std::vector<double> lambda;
    ComplexMatrix v;  // eigenvectors of rho
    ComplexMatrix d;  // drho in the eigenbasis of rho
    double cutoff;
};

SpectralData spectral(const ComplexMatrix& rho, const ComplexMatrix& drho, double tol) {
    if (!rho.is_square() || drho.rows() != rho.rows() || drho.cols() != rho.cols()) {
        throw ShapeError("qfi: rho and drho must be square and of equal dimension");
    }
    const double defect = hermiticity_defect(drho);
    if (defect > 1e-8 * std::max(1.0, drho.max_abs())) {
        throw ValidationError("qfi: drho is not Hermitian (defect " + std::to_string(defect) + ")");
    }
    auto eig = hermitian_eigen(rho);
    const auto& v = eig.eigenvectors;
    ComplexMatrix d = matmul(matmul(adjoint(v), drho), v);
    return {std::move(eig.eigenvalues), std::move(eig.eigenvectors), std::move(d), tol * rho.trace().real()};
}

}  // namespace

ComplexMatrix sld(const ComplexMatrix& rho, const ComplexMatrix& drho, double tol) {
    const SpectralData s = spectral(rho, drho, tol);
    const std::size_t n = rho.rows();
    ComplexMatrix l_eig(n, n);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            const double sum = s.lambda[a] + s.lambda[b];
            if (sum > s.cutoff) l_eig(a, b) = 2.0 * s.d(a, b) / sum;
        }
    }
    ComplexMatrix l = matmul(matmul(s.v, l_eig), adjoint(s.v));
    // enforce exact Hermiticity
    for (std::size_t i = 0; i < n; ++i) {
        l(i, i) = l(i, i).real();
        for (std::size_t j = i + 1; j < n; ++j) {
            const complex avg = 0.5 * (l(i, j) + std::conj(l(j, i)));
            l(i, j) = avg;
            l(j, i) = std::conj(avg);
        }
    }
    return l;
}

ComplexMatrix sld(const DensityMatrix& rho, const ComplexMatrix& drho, double tol) {
    return sld(rho.mat(), drho, tol);
}

double qfi_mixed(const ComplexMatrix& rho, const ComplexMatrix& drho, double tol) {
    const SpectralData s = spectral(rho, drho, tol);
    double f = 0.0;
    const std::size_t n = rho.rows();
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            const double sum = s.lambda[a] + s.lambda[b];
            if (sum > s.cutoff) f += 2.0 * std::norm(s.d(a, b)) / sum;
        }
    }
    return f;
}

double qfi_mixed(const DensityMatrix& rho, const ComplexMatrix& drho, double tol) {
    return qfi_mixed(rho.mat(), drho, tol);
}

double qfi_pure(std::span<const complex> psi, std::span<const complex> dpsi, NormCheck check) {
    if (psi.size() != dpsi.size()) throw ShapeError("qfi_pure: psi and dpsi differ in length");
    if (check == NormCheck::checked && std::abs(norm(psi) - 1.0) > 1e-10) {
        throw ValidationError(
            "qfi_pure: state is not normalized; the pure-state formula requires conserved probability "
            "(use qfi_mixed for lossy states)");
    }
    const complex overlap = inner(dpsi, psi);
    return 4.0 * (inner(dpsi, dpsi) - overlap * std::conj(overlap)).real();
}

double finite_difference_step(const ThreeLevelParams& p, Parameter wrt, double h) {
    const double x = wrt == Parameter::g ? p.g : p.delta;
    if (x != 0.0) return h * std::abs(x);
    // zero-valued parameter: fall back to the model's rate scale
    const double scale = std::max({std::abs(p.g), std::abs(p.delta), p.gamma_e});
    return h * (scale > 0.0 ? scale : 1.0);
}

ThreeLevelParams shifted(ThreeLevelParams p, Parameter wrt, double dx) {
    (wrt == Parameter::g ? p.g : p.delta) += dx;
    return p;
}

namespace {

ComplexMatrix hermitian_part(const ComplexMatrix& m) {
    return (m + adjoint(m)) * complex{0.5};
}

ComplexMatrix analytic_drho_dg(const ThreeLevelParams& p, double t) {
    const ResonantAmplitudes r = resonant_amplitudes(p, t);
    const double e2 = r.envelope2;
    ComplexMatrix d(3, 3);
    const double dee = e2 * 2.0 * r.b * r.db_dg;
    const double dff = e2 * 2.0 * r.a * r.da_dg;
    const double dfe = e2 * (r.da_dg * r.b + r.a * r.db_dg);
    d(kE, kE) = dee;
    d(kF, kF) = dff;
    d(kS, kS) = -(dee + dff);
    d(kF, kE) = complex{0.0, dfe};
    d(kE, kF) = complex{0.0, -dfe};
    return d;
}

ComplexMatrix integrated_rho(const ThreeLevelParams& p, double t) {
    const auto rho0 = DensityMatrix::basis_state(3, kF);
    if (t == 0.0) return rho0.mat();
    const TimeGrid grid(0.0, t, 2);
    return evolve_gksl(p, rho0, grid, std::min(kDefaultDt, t)).back().mat();
}

bool is_f_state(const DensityMatrix& rho0) {
    return rho0.dim() == 3 && max_abs_diff(rho0.mat(), DensityMatrix::basis_state(3, kF).mat()) == 0.0;
}

}  // namespace

ComplexMatrix d_rho(const ThreeLevelParams& p, double t, Parameter wrt, const ParamDerivativeSpec& spec,
                    RhoSource source) {
    p.validate();
    spec.validate();
    if (t < 0.0) throw ValidationError("d_rho: t must be >= 0");
    using Method = ParamDerivativeSpec::Method;
    if (source == RhoSource::analytic) {
        if (p.delta != 0.0 || wrt != Parameter::g) {
            throw UnsupportedConfiguration(
                "d_rho: the closed-form source supports only Delta = 0 and derivatives with respect to g");
        }
        if (spec.method == Method::analytic) return analytic_drho_dg(p, t);
        const double dx = finite_difference_step(p, wrt, spec.step);
        const ComplexMatrix plus = analytic_rho(shifted(p, wrt, dx), t).mat();
        const ComplexMatrix minus = analytic_rho(shifted(p, wrt, -dx), t).mat();
        return hermitian_part((plus - minus) * complex{1.0 / (2.0 * dx)});
    }
    if (spec.method == Method::analytic) {
        throw UnsupportedConfiguration("d_rho: integrator source requires central differences");
    }
    const double dx = finite_difference_step(p, wrt, spec.step);
    const ComplexMatrix plus = integrated_rho(shifted(p, wrt, dx), t);
    const ComplexMatrix minus = integrated_rho(shifted(p, wrt, -dx), t);
    return hermitian_part((plus - minus) * complex{1.0 / (2.0 * dx)});
}

QfiSeries make_series(std::vector<double> times, std::vector<double> values, Parameter parameter,
                      double window_threshold) {
    if (times.empty() || times.size() != values.size()) {
        throw ValidationError("make_series: times and values must be non-empty and of equal length");
    }
    QfiSeries s;
    s.times = std::move(times);
    s.values = std::move(values);
    s.parameter = parameter;
    const std::size_t n = s.values.size();
    const std::size_t i = static_cast<std::size_t>(
        std::max_element(s.values.begin(), s.values.end()) - s.values.begin());
    s.peak_value = s.values[i];
    s.peak_time = s.times[i];
    if (i > 0 && i + 1 < n) {
        const double y0 = s.values[i - 1], y1 = s.values[i], y2 = s.values[i + 1];
        const double curvature = y0 - 2.0 * y1 + y2;
        if (curvature < 0.0) {
            const double h_left = s.times[i] - s.times[i - 1];
            const double h_right = s.times[i + 1] - s.times[i];
            const double h = 0.5 * (h_left + h_right);
            const double offset = 0.5 * h * (y0 - y2) / curvature;
            s.peak_time = s.times[i] + std::clamp(offset, -h_left, h_right);
        }
    }
    s.window = find_optimal_window(s, window_threshold);
    return s;
}

Window find_optimal_window(const QfiSeries& series, double threshold_fraction) {
    if (series.values.empty()) throw ValidationError("find_optimal_window: empty series");
    if (!(threshold_fraction > 0.0 && threshold_fraction < 1.0)) {
        throw ValidationError("find_optimal_window: threshold_fraction must lie in (0, 1)");
    }
    const auto& v = series.values;
    const auto& t = series.times;
    const std::size_t peak = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
    const double level = threshold_fraction * series.peak_value;
    std::size_t lo = peak, hi = peak;
    while (lo > 0 && v[lo - 1] >= level) --lo;
    while (hi + 1 < v.size() && v[hi + 1] >= level) ++hi;
    if (series.peak_time < t[lo] && lo > 0) --lo;
    if (series.peak_time > t[hi] && hi + 1 < v.size()) ++hi;
    return {t[lo], t[hi]};
}

QfiSeries qfi_series(const ThreeLevelParams& p, const DensityMatrix& rho0, const TimeGrid& grid, Parameter wrt,
                     const ParamDerivativeSpec& spec, double window_threshold) {
    p.validate();
    spec.validate();
    using Method = ParamDerivativeSpec::Method;
    const std::vector<double> times = grid.points();
    std::vector<double> values(times.size());

    const bool closed_form = p.delta == 0.0 && wrt == Parameter::g && is_f_state(rho0);
    if (closed_form) {
        parallel_for(times.size(), [&](std::size_t i) {
            const double t = times[i];
            values[i] = qfi_mixed(analytic_rho(p, t), d_rho(p, t, wrt, spec, RhoSource::analytic));
        });
    } else {
        const double h = spec.method == Method::central_difference ? spec.step : ParamDerivativeSpec{}.step;
        const double dx = finite_difference_step(p, wrt, h);
        const auto base = evolve_gksl(p, rho0, grid);
        const auto plus = evolve_gksl(shifted(p, wrt, dx), rho0, grid);
        const auto minus = evolve_gksl(shifted(p, wrt, -dx), rho0, grid);
        parallel_for(times.size(), [&](std::size_t i) {
            const ComplexMatrix d = hermitian_part((plus[i].mat() - minus[i].mat()) * complex{1.0 / (2.0 * dx)});
            values[i] = qfi_mixed(base[i], d);
        });
    }
    return make_series(times, std::move(values), wrt, window_threshold);
}

}  // namespace qprobe
