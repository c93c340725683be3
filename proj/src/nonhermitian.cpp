#include "qprobe/nonhermitian.hpp"

#include <cmath>
#include <numeric>

#include "qprobe/errors.hpp"
#include "qprobe/parallel.hpp"

namespace qprobe {

namespace {

const complex I{0.0, 1.0};
const double kSqrt2 = std::sqrt(2.0);

// Direct RK4 for i d psi/dt = H_eff psi, used where the eigenbasis degenerates.
Vec2 propagate_heff(const ThreeLevelParams& p, Vec2 psi, double t) {
    if (t == 0.0) return psi;
    const auto steps = static_cast<std::size_t>(std::ceil(t / kDefaultDt));
    const double h = t / static_cast<double>(steps);
    const complex hee{p.delta, -0.5 * p.gamma_e};
    auto rhs = [&](const Vec2& v) -> Vec2 {
        return {-I * (hee * v[0] + p.g * v[1]), -I * (p.g * v[0] + p.delta * v[1])};
    };
    auto axpy = [](const Vec2& v, complex a, const Vec2& k) -> Vec2 { return {v[0] + a * k[0], v[1] + a * k[1]}; };
    for (std::size_t n = 0; n < steps; ++n) {
        const Vec2 k1 = rhs(psi);
        const Vec2 k2 = rhs(axpy(psi, 0.5 * h, k1));
        const Vec2 k3 = rhs(axpy(psi, 0.5 * h, k2));
        const Vec2 k4 = rhs(axpy(psi, h, k3));
        for (int i = 0; i < 2; ++i) psi[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return psi;
}

bool near_degenerate(const ThreeLevelParams& p) {
    return p.g == 0.0 || std::abs(p.alpha()) < kDegeneracyThreshold;
}

Vec2 combine(complex c1, const Vec2& v1, complex c2, const Vec2& v2) {
    return {c1 * v1[0] + c2 * v2[0], c1 * v1[1] + c2 * v2[1]};
}

ComplexMatrix lifted_matrix(const Vec2& psi) {
    ComplexMatrix m(3, 3);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) m(i, j) = psi[i] * std::conj(psi[j]);
    }
    m(kS, kS) = 1.0 - std::norm(psi[0]) - std::norm(psi[1]);
    return m;
}

ComplexMatrix outer2(const Vec2& psi) {
    ComplexMatrix m(2, 2);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) m(i, j) = psi[i] * std::conj(psi[j]);
    }
    return m;
}

struct FdPair {
    Vec2 psi;
    Vec2 plus;
    Vec2 minus;
    double dg;
};

FdPair fd_states(const ThreeLevelParams& p, double t, double rel_step) {
    if (!(rel_step > 0.0)) throw ValidationError("finite-difference step must be positive");
    const double dg = finite_difference_step(p, Parameter::g, rel_step);
    return {psi_f(p, t), psi_f(shifted(p, Parameter::g, dg), t), psi_f(shifted(p, Parameter::g, -dg), t), dg};
}

}  // namespace

ComplexMatrix build_heff(const ThreeLevelParams& p) {
    p.validate();
    return ComplexMatrix{{complex{p.delta, -0.5 * p.gamma_e}, p.g}, {p.g, p.delta}};
}

NonHermitianEigensystem eigensystem(const ThreeLevelParams& p) {
    p.validate();
    if (p.g == 0.0) throw ValidationError("eigensystem: g must be nonzero");
    const complex alpha = p.alpha();
    const complex ig{0.0, p.gamma_e};
    NonHermitianEigensystem es;
    es.lambda1 = p.delta + (-ig - alpha) / 4.0;
    es.lambda2 = p.delta + (-ig + alpha) / 4.0;
    es.psi1 = {(-ig - alpha) / (4.0 * p.g) / kSqrt2, 1.0 / kSqrt2};
    es.psi2 = {(-ig + alpha) / (4.0 * p.g) / kSqrt2, 1.0 / kSqrt2};
    es.b = (alpha * alpha - 8.0 * p.g * p.g + ig * alpha) / (8.0 * p.g * p.g);
    return es;
}

Vec2 psi_e(const ThreeLevelParams& p, double t) {
    p.validate();
    if (near_degenerate(p)) return propagate_heff(p, {1.0, 0.0}, t);
    const auto es = eigensystem(p);
    const complex c = -2.0 * kSqrt2 * p.g / p.alpha();
    return combine(c * std::exp(-I * es.lambda1 * t), es.psi1, -c * std::exp(-I * es.lambda2 * t), es.psi2);
}

Vec2 psi_f(const ThreeLevelParams& p, double t) {
    p.validate();
    if (near_degenerate(p)) return propagate_heff(p, {0.0, 1.0}, t);
    const auto es = eigensystem(p);
    const complex alpha = p.alpha();
    const complex c = 8.0 * kSqrt2 * p.g * p.g / (alpha * alpha + complex{0.0, p.gamma_e} * alpha);
    return combine(c * std::exp(-I * es.lambda1 * t), es.psi1, c * es.b * std::exp(-I * es.lambda2 * t), es.psi2);
}

DensityMatrix lift_to_3x3(const Vec2& psi) {
    const double n2 = std::norm(psi[0]) + std::norm(psi[1]);
    if (!std::isfinite(n2) || n2 > 1.0 + 1e-9) {
        throw ValidationError("lift_to_3x3: state norm exceeds 1");
    }
    return DensityMatrix(lifted_matrix(psi), three_level_labels());
}

double qfi_nh_pure(const ThreeLevelParams& p, double t, double rel_step) {
    const FdPair s = fd_states(p, t, rel_step);
    const Vec2 d = combine(1.0 / (2.0 * s.dg), s.plus, -1.0 / (2.0 * s.dg), s.minus);
    return qfi_pure(s.psi, d, NormCheck::unchecked);
}

double qfi_nh_mixed2(const ThreeLevelParams& p, double t, double rel_step) {
    const FdPair s = fd_states(p, t, rel_step);
    const ComplexMatrix d = (outer2(s.plus) - outer2(s.minus)) * complex{1.0 / (2.0 * s.dg)};
    return qfi_mixed(outer2(s.psi), d);
}

double qfi_nh_mixed3(const ThreeLevelParams& p, double t, double rel_step) {
    const FdPair s = fd_states(p, t, rel_step);
    const ComplexMatrix d = (lifted_matrix(s.plus) - lifted_matrix(s.minus)) * complex{1.0 / (2.0 * s.dg)};
    return qfi_mixed(lift_to_3x3(s.psi), d);
}

std::string to_string(NProbeInitial s) {
    switch (s) {
        case NProbeInitial::f1: return "f1";
        case NProbeInitial::chi1: return "chi1";
        case NProbeInitial::e_plus_chi1: return "e_plus_chi1";
    }
    return "?";
}

NProbeInitial nprobe_initial_from_string(const std::string& name) {
    if (name == "f1") return NProbeInitial::f1;
    if (name == "chi1") return NProbeInitial::chi1;
    if (name == "e_plus_chi1") return NProbeInitial::e_plus_chi1;
    throw ValidationError("unknown initial state '" + name + "' (expected f1, chi1 or e_plus_chi1)");
}

void NProbeModel::validate() const {
    if (n_probes < 1) throw ValidationError("NProbeModel: n_probes must be >= 1");
    if (!std::isfinite(g)) throw ValidationError("NProbeModel: g must be finite");
    if (!std::isfinite(gamma_e) || gamma_e < 0.0) throw ValidationError("NProbeModel: gamma_e must be >= 0");
}

ComplexMatrix build_nprobe_hamiltonian(const NProbeModel& m) {
    m.validate();
    const std::size_t n = m.n_probes + 1;
    ComplexMatrix h(n, n);
    h(0, 0) = complex{0.0, -0.5 * m.gamma_e};
    for (std::size_t i = 1; i < n; ++i) {
        h(0, i) = m.g;
        h(i, 0) = m.g;
    }
    return h;
}

ComplexMatrix chi_basis(std::size_t n) {
    if (n < 1) throw ValidationError("chi_basis: n must be >= 1");
    const std::size_t dim = n + 1;
    std::vector<CVector> seeds(dim, CVector(dim));
    seeds[0][0] = 1.0;
    for (std::size_t i = 1; i < dim; ++i) seeds[1][i] = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t k = 2; k < dim; ++k) seeds[k][k] = 1.0;
    return gram_schmidt(seeds);
}

CVector nprobe_initial_state(const NProbeModel& m) {
    m.validate();
    const std::size_t dim = m.n_probes + 1;
    CVector psi(dim);
    switch (m.initial_state) {
        case NProbeInitial::f1:
            psi[1] = 1.0;
            break;
        case NProbeInitial::chi1:
            for (std::size_t i = 1; i < dim; ++i) psi[i] = 1.0 / std::sqrt(static_cast<double>(m.n_probes));
            break;
        case NProbeInitial::e_plus_chi1:
            // a_e = 1/sqrt(N+1) on e and sqrt(N/(N+1)) on chi_1
            for (std::size_t i = 0; i < dim; ++i) psi[i] = 1.0 / std::sqrt(static_cast<double>(dim));
            break;
    }
    return psi;
}

std::vector<CVector> propagate_nprobe(const NProbeModel& m, const TimeGrid& grid, double dt) {
    m.validate();
    if (!(dt > 0.0)) throw ValidationError("propagate_nprobe: dt must be positive");
    if (grid.t_start() < 0.0) throw ValidationError("propagate_nprobe: grid must start at t >= 0");
    const std::size_t dim = m.n_probes + 1;
    const complex hee{0.0, -0.5 * m.gamma_e};

    // -i H psi for the star Hamiltonian
    auto rhs = [&](const CVector& v, CVector& out) {
        complex sum = 0.0;
        for (std::size_t i = 1; i < dim; ++i) sum += v[i];
        out[0] = -I * (hee * v[0] + m.g * sum);
        const complex fe = -I * m.g * v[0];
        for (std::size_t i = 1; i < dim; ++i) out[i] = fe;
    };
    CVector psi = nprobe_initial_state(m);
    CVector k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
    auto step = [&](double h) {
        rhs(psi, k1);
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = psi[i] + 0.5 * h * k1[i];
        rhs(tmp, k2);
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = psi[i] + 0.5 * h * k2[i];
        rhs(tmp, k3);
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = psi[i] + h * k3[i];
        rhs(tmp, k4);
        for (std::size_t i = 0; i < dim; ++i) psi[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    };
    auto advance = [&](double span) {
        if (span <= 0.0) return;
        const auto n = static_cast<std::size_t>(std::ceil(span / dt - 1e-9));
        const double h = span / static_cast<double>(n);
        for (std::size_t s = 0; s < n; ++s) step(h);
    };

    std::vector<CVector> out;
    out.reserve(grid.size());
    double t = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        advance(grid[k] - t);
        t = grid[k];
        double nrm = 0.0;
        for (const complex& z : psi) nrm += std::norm(z);
        if (!std::isfinite(nrm) || nrm > 1.0 + 1e-9) {
            throw NumericalError("propagate_nprobe: norm " + std::to_string(nrm) + " exceeds 1 at t = " +
                                 std::to_string(t) + " fs");
        }
        out.push_back(psi);
    }
    return out;
}

std::vector<DensityMatrix> evolve_nprobe(const NProbeModel& m, const TimeGrid& grid, double dt) {
    const auto states = propagate_nprobe(m, grid, dt);
    const std::size_t dim = m.n_probes + 2;
    std::vector<std::string> labels{"e"};
    for (std::size_t i = 1; i <= m.n_probes; ++i) labels.push_back("f" + std::to_string(i));
    labels.push_back("s");

    std::vector<DensityMatrix> out;
    out.reserve(states.size());
    for (const CVector& psi : states) {
        ComplexMatrix rho(dim, dim);
        double nrm = 0.0;
        for (std::size_t i = 0; i + 1 < dim; ++i) {
            nrm += std::norm(psi[i]);
            for (std::size_t j = 0; j + 1 < dim; ++j) rho(i, j) = psi[i] * std::conj(psi[j]);
        }
        rho(dim - 1, dim - 1) = 1.0 - nrm;
        out.emplace_back(std::move(rho), labels);
    }
    return out;
}

double qfi_lifted(std::span<const complex> psi, std::span<const complex> dpsi, double tol) {
    if (psi.size() != dpsi.size()) throw ShapeError("qfi_lifted: psi and dpsi differ in length");
    const double n = std::real(inner(psi, psi));
    const double s = 1.0 - n;
    const complex ip = inner(psi, dpsi);
    const double dd = std::real(inner(dpsi, dpsi));
    const double dn = 2.0 * ip.real();  // d<psi|psi>; the sink moves by -dn
    const double cutoff = tol;          // the lifted matrix has unit trace

    double f = 0.0;
    if (2.0 * n > cutoff) f += dn * dn / n;
    if (n > cutoff) f += 4.0 * (dd - std::norm(ip) / n);
    if (2.0 * s > cutoff) f += dn * dn / s;
    return f;
}

QfiSeries qfi_nprobe(const NProbeModel& m, const TimeGrid& grid, double rel_step, double window_threshold) {
    m.validate();
    if (!(rel_step > 0.0)) throw ValidationError("qfi_nprobe: step must be positive");
    const double dg = finite_difference_step({m.g, 0.0, m.gamma_e}, Parameter::g, rel_step);
    NProbeModel plus = m, minus = m;
    plus.g += dg;
    minus.g -= dg;
    const auto base = propagate_nprobe(m, grid);
    const auto up = propagate_nprobe(plus, grid);
    const auto down = propagate_nprobe(minus, grid);

    std::vector<double> values(grid.size());
    CVector d(m.n_probes + 1);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = (up[k][i] - down[k][i]) / (2.0 * dg);
        values[k] = qfi_lifted(base[k], d);
    }
    return make_series(grid.points(), std::move(values), Parameter::g, window_threshold);
}

PowerLaw fit_power_law(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) throw ValidationError("fit_power_law: need at least two (x, y) pairs");
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ValidationError("fit_power_law: values must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0) throw ValidationError("fit_power_law: x values are all equal");
    const double b = sxy / sxx;
    const double a = my - b * mx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ly[i] - a - b * lx[i];
        ssr += r * r;
    }
    const double se = n > 2 ? std::sqrt(ssr / static_cast<double>(n - 2) / sxx) : 0.0;
    return {std::exp(a), b, se};
}

ScalingFit max_qfi_scaling(std::span<const std::size_t> ns, const NProbeModel& m_template, const TimeGrid& grid) {
    if (ns.size() < 4) throw ValidationError("max_qfi_scaling: need at least 4 values of N");
    for (std::size_t i = 0; i < ns.size(); ++i) {
        if (ns[i] < 1 || (i > 0 && ns[i] <= ns[i - 1])) {
            throw ValidationError("max_qfi_scaling: N values must be >= 1 and strictly increasing");
        }
    }
    ScalingFit fit;
    fit.n_values.assign(ns.begin(), ns.end());
    fit.max_qfi.resize(ns.size());
    fit.peak_times.resize(ns.size());
    parallel_for(ns.size(), [&](std::size_t i) {
        NProbeModel m = m_template;
        m.n_probes = ns[i];
        const QfiSeries s = qfi_nprobe(m, grid);
        fit.max_qfi[i] = s.peak_value;
        fit.peak_times[i] = s.peak_time;
    });
    std::vector<double> x(ns.begin(), ns.end());
    const PowerLaw law = fit_power_law(x, fit.max_qfi);
    fit.exponent = law.exponent;
    fit.exponent_stderr = law.exponent_stderr;
    return fit;
}

}  // namespace qprobe
