#include "qprobe/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qprobe/errors.hpp"
#include "qprobe/parallel.hpp"

namespace qprobe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double ratio_or_inf(double num, double den) {
    if (den == 0.0) return kInf;
    return num / std::abs(den);
}

double rmse_of(std::span<const double> xs, double truth) {
    double s = 0.0;
    std::size_t n = 0;
    for (double x : xs) {
        if (std::isnan(x)) continue;
        s += (x - truth) * (x - truth);
        ++n;
    }
    return n ? std::sqrt(s / static_cast<double>(n)) : std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> frequencies(std::span<const std::uint64_t> counts, std::uint64_t n_shot) {
    std::vector<double> f(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) f[i] = static_cast<double>(counts[i]) / static_cast<double>(n_shot);
    return f;
}

std::vector<double> observe(const EstimationConfig& cfg, std::span<const double> times, std::uint64_t n_shot,
                            SplitMix64& rng) {
    const ThreeLevelParams p = cfg.params();
    if (cfg.noiseless) {
        std::vector<double> f(times.size());
        for (std::size_t i = 0; i < times.size(); ++i) f[i] = probability_f(p, times[i]);
        return f;
    }
    return frequencies(simulate_counts(p, times, n_shot, rng), n_shot);
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n == 1) return {0.5 * (lo + hi)};
    return TimeGrid(lo, hi, n).points();
}

}  // namespace

ErrorPropagationSeries error_propagation(const ThreeLevelParams& p, const TimeGrid& grid, Parameter wrt) {
    p.validate();
    const auto rho_f = DensityMatrix::basis_state(3, kF, three_level_labels());
    const std::vector<double> times = grid.points();
    std::vector<double> rho_ff(times.size()), slope(times.size());

    if (p.delta == 0.0 && wrt == Parameter::g) {
        for (std::size_t i = 0; i < times.size(); ++i) {
            const ResonantAmplitudes r = resonant_amplitudes(p, times[i]);
            rho_ff[i] = r.envelope2 * r.a * r.a;
            slope[i] = 2.0 * r.envelope2 * r.a * r.da_dg;
        }
    } else {
        const double dx = finite_difference_step(p, wrt, ParamDerivativeSpec{}.step);
        const auto base = evolve_gksl(p, rho_f, grid);
        const auto plus = evolve_gksl(shifted(p, wrt, dx), rho_f, grid);
        const auto minus = evolve_gksl(shifted(p, wrt, -dx), rho_f, grid);
        for (std::size_t i = 0; i < times.size(); ++i) {
            rho_ff[i] = base[i].population(kF);
            slope[i] = (plus[i].population(kF) - minus[i].population(kF)) / (2.0 * dx);
        }
    }

    const QfiSeries f = qfi_series(p, rho_f, grid, wrt);
    ErrorPropagationSeries out;
    out.times = times;
    out.parameter = wrt;
    out.delta_param.resize(times.size());
    out.inv_sqrt_f.resize(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double var = std::max(0.0, rho_ff[i] * (1.0 - rho_ff[i]));
        out.delta_param[i] = ratio_or_inf(std::sqrt(var), slope[i]);
        out.inv_sqrt_f[i] = f.values[i] > 0.0 ? 1.0 / std::sqrt(f.values[i]) : kInf;
    }
    return out;
}

std::size_t argmin_finite(std::span<const double> values) {
    std::size_t best = values.size();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) continue;
        if (best == values.size() || values[i] < values[best]) best = i;
    }
    return best;
}

double closed_form_delta_g_ep(double gamma_e, double t) {
    if (!(t > 0.0)) throw ValidationError("closed_form_delta_g_ep: t must be positive");
    if (!(gamma_e > 0.0)) throw ValidationError("closed_form_delta_g_ep: gamma_e must be positive");
    const ResonantAmplitudes r = resonant_amplitudes({gamma_e / 4.0, 0.0, gamma_e}, t);
    const double pf = r.envelope2 * r.a * r.a;
    return ratio_or_inf(std::sqrt(std::max(0.0, pf * (1.0 - pf))), 2.0 * r.envelope2 * r.a * r.da_dg);
}

double probability_f(const ThreeLevelParams& p, double t) {
    if (p.delta != 0.0) throw UnsupportedConfiguration("probability_f: the closed form needs Delta = 0");
    const ResonantAmplitudes r = resonant_amplitudes(p, t);
    return r.envelope2 * r.a * r.a;
}

std::vector<std::uint64_t> simulate_counts(const ThreeLevelParams& p, std::span<const double> times,
                                           std::uint64_t n_shot, SplitMix64& rng) {
    p.validate();
    std::vector<std::uint64_t> counts(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) counts[i] = binomial(rng, n_shot, probability_f(p, times[i]));
    return counts;
}

FitResult fit_g(std::span<const double> times, std::span<const double> freqs, const ThreeLevelParams& p_fixed,
                FitBounds bounds) {
    if (times.empty()) throw ValidationError("fit_g: no measurement times");
    if (times.size() != freqs.size()) throw ShapeError("fit_g: times and freqs differ in length");
    for (double f : freqs) {
        if (!(f >= 0.0 && f <= 1.0)) throw ValidationError("fit_g: frequencies must lie in [0, 1]");
    }
    if (!(std::isfinite(bounds.lo) && std::isfinite(bounds.hi) && bounds.lo >= 0.0 && bounds.lo < bounds.hi)) {
        throw ValidationError("fit_g: bounds must satisfy 0 <= lo < hi");
    }
    if (p_fixed.delta != 0.0) throw UnsupportedConfiguration("fit_g: the model needs Delta = 0");

    ThreeLevelParams p = p_fixed;
    auto sse = [&](double g) {
        p.g = g;
        double s = 0.0;
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double r = freqs[i] - probability_f(p, times[i]);
            s += r * r;
        }
        if (!std::isfinite(s)) throw FitError("fit_g: non-finite residual at g = " + std::to_string(g));
        return s;
    };

    const double tol = 1e-9 * (p_fixed.gamma_e > 0.0 ? p_fixed.gamma_e : bounds.hi - bounds.lo);
    constexpr std::size_t kScan = 200;
    std::vector<double> xs(kScan), ys(kScan);
    for (std::size_t i = 0; i < kScan; ++i) {
        xs[i] = bounds.lo + (bounds.hi - bounds.lo) * static_cast<double>(i) / static_cast<double>(kScan - 1);
        ys[i] = sse(xs[i]);
    }
    std::vector<std::size_t> minima;
    for (std::size_t i = 0; i < kScan; ++i) {
        const bool left = i == 0 || ys[i] <= ys[i - 1];
        const bool right = i + 1 == kScan || ys[i] <= ys[i + 1];
        if (left && right) minima.push_back(i);
    }
    std::sort(minima.begin(), minima.end(), [&](std::size_t a, std::size_t b) { return ys[a] < ys[b]; });
    if (minima.size() > 3) minima.resize(3);

    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    FitResult best{xs[minima.front()], ys[minima.front()], false};
    for (std::size_t i : minima) {
        double a = xs[i == 0 ? 0 : i - 1];
        double b = xs[std::min(i + 1, kScan - 1)];
        double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
        double f1 = sse(x1), f2 = sse(x2);
        while (b - a > tol) {
            if (f1 <= f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - inv_phi * (b - a);
                f1 = sse(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + inv_phi * (b - a);
                f2 = sse(x2);
            }
        }
        double x = f1 <= f2 ? x1 : x2;
        double fx = std::min(f1, f2);
        // parabola through the final bracket
        const double fa = sse(a), fb = sse(b), m = 0.5 * (a + b), fm = sse(m);
        const double den = (fa - 2.0 * fm + fb);
        if (den > 0.0) {
            const double xv = m + 0.25 * (b - a) * (fa - fb) / den;
            if (xv > a && xv < b) {
                const double fv = sse(xv);
                if (fv < fx) x = xv, fx = fv;
            }
        }
        if (fm < fx) x = m, fx = fm;
        if (fx < best.sse || (fx == best.sse && x < best.g_hat)) best = {x, fx, false};
    }
    best.converged = best.g_hat - bounds.lo > tol && bounds.hi - best.g_hat > tol;
    return best;
}

FitBounds EstimationConfig::bounds() const {
    if (fit_bounds) return *fit_bounds;
    return {0.01 * gamma_e, 2.0 * gamma_e};
}

std::vector<double> EstimationConfig::measurement_times() const {
    if (!window) return times;
    return linspace(window->lo, window->hi, times.size());
}

void EstimationConfig::validate() const {
    params().validate();
    if (times.empty()) throw ValidationError("estimation: at least one measurement time is required");
    for (double t : times) {
        if (!std::isfinite(t) || t < 0.0) throw ValidationError("estimation: measurement times must be >= 0");
    }
    if (n_shot < 1) throw ValidationError("estimation: n_shot must be >= 1");
    if (n_experiments < 1) throw ValidationError("estimation: n_experiments must be >= 1");
    if (!fit_bounds && !(gamma_e > 0.0)) {
        throw ValidationError("estimation: default fit bounds need gamma_e > 0; give explicit bounds");
    }
    const FitBounds b = bounds();
    if (!(b.lo < b.hi) || true_g < b.lo || true_g > b.hi) {
        throw ValidationError("estimation: fit bounds must be ordered and contain true_g");
    }
    if (window && !(window->lo >= 0.0 && window->lo < window->hi && std::isfinite(window->hi))) {
        throw ValidationError("estimation: window must satisfy 0 <= lo < hi");
    }
}

EstimationResult run_experiments(const EstimationConfig& cfg) {
    cfg.validate();
    const ThreeLevelParams p = cfg.params();
    const std::vector<double> times = cfg.measurement_times();
    const std::size_t m = cfg.n_experiments;
    std::vector<double> g_hats(m);
    std::vector<char> ok(m);
    parallel_for(m, [&](std::size_t i) {
        SplitMix64 rng(cfg.seed + i);
        const FitResult fit = fit_g(times, observe(cfg, times, cfg.n_shot, rng), p, cfg.bounds());
        g_hats[i] = fit.g_hat;
        ok[i] = fit.converged;
    });
    EstimationResult r;
    r.g_hats = std::move(g_hats);
    r.converged.assign(ok.begin(), ok.end());
    r.n_converged = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 1));
    r.rmse = rmse_of(r.g_hats, cfg.true_g);
    return r;
}

ShotStudy run_shot_study(const EstimationConfig& cfg, std::span<const std::uint64_t> n_shot_list) {
    cfg.validate();
    if (n_shot_list.empty()) throw ValidationError("run_shot_study: empty n_shot list");
    ShotStudy study;
    for (std::uint64_t n : n_shot_list) {
        EstimationConfig c = cfg;
        c.n_shot = n;
        const EstimationResult r = run_experiments(c);
        study.rows.push_back({n, r.rmse, r.n_converged});
    }
    double log_a = 0.0;
    std::vector<double> x, y;
    for (const auto& row : study.rows) {
        x.push_back(static_cast<double>(row.n_shot));
        y.push_back(row.rmse);
        log_a += std::log(row.rmse) + 0.5 * std::log(static_cast<double>(row.n_shot));
    }
    study.constrained_a = std::exp(log_a / static_cast<double>(study.rows.size()));
    if (study.rows.size() >= 2) study.fit = fit_power_law(x, y);
    return study;
}

double resource_ratio(const ShotStudy& first, const ShotStudy& second) {
    const double r = first.constrained_a / second.constrained_a;
    return r * r;
}

ProtocolReport two_stage_protocol(const EstimationConfig& cfg, std::uint64_t coarse_shots, std::uint64_t fine_shots,
                                  double threshold_fraction) {
    cfg.validate();
    if (coarse_shots < 1 || fine_shots < 1) throw ValidationError("protocol: shot counts must be >= 1");
    const ThreeLevelParams truth = cfg.params();
    ProtocolReport rep;

    rep.stage1_times = cfg.times;
    SplitMix64 rng1 = SplitMix64::stream(cfg.seed, 0);
    rep.stage1_freqs = observe(cfg, rep.stage1_times, coarse_shots, rng1);
    const FitResult s1 = fit_g(rep.stage1_times, rep.stage1_freqs, truth, cfg.bounds());
    rep.g0 = s1.g_hat;
    if (!s1.converged) {
        throw FitError("protocol: stage-1 estimate g0 = " + std::to_string(s1.g_hat) +
                       " fs^-1 sits on a fit bound; increase coarse shots or widen the bounds");
    }

    const auto [t_lo, t_hi] = std::minmax_element(cfg.times.begin(), cfg.times.end());
    if (!(*t_hi > *t_lo)) throw ValidationError("protocol: stage-1 times must span an interval");
    const auto rho_f = DensityMatrix::basis_state(3, kF, three_level_labels());
    const QfiSeries f = qfi_series({rep.g0, 0.0, cfg.gamma_e}, rho_f, TimeGrid(*t_lo, *t_hi, 501), Parameter::g, {},
                                   threshold_fraction);
    rep.peak_time = f.peak_time;
    rep.window = f.window;

    rep.stage2_times = linspace(rep.window.lo, rep.window.hi, cfg.times.size());
    SplitMix64 rng2 = SplitMix64::stream(cfg.seed, 1);
    rep.stage2_freqs = observe(cfg, rep.stage2_times, fine_shots, rng2);
    const FitResult s2 = fit_g(rep.stage2_times, rep.stage2_freqs, truth, cfg.bounds());
    rep.g_hat = s2.g_hat;
    rep.stage2_converged = s2.converged;
    rep.total_shots = (coarse_shots + fine_shots) * cfg.times.size();
    return rep;
}

ProtocolStudy run_protocol_study(const EstimationConfig& cfg, std::uint64_t coarse_shots, std::uint64_t fine_shots,
                                 double threshold_fraction) {
    cfg.validate();
    const std::size_t m = cfg.n_experiments;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    ProtocolStudy st;
    st.g0s.assign(m, nan);
    st.g_hats.assign(m, nan);
    st.windows.assign(m, Window{nan, nan});
    parallel_for(m, [&](std::size_t i) {
        EstimationConfig c = cfg;
        c.seed = cfg.seed + i;
        try {
            const ProtocolReport r = two_stage_protocol(c, coarse_shots, fine_shots, threshold_fraction);
            st.g0s[i] = r.g0;
            st.g_hats[i] = r.g_hat;
            st.windows[i] = r.window;
        } catch (const FitError&) {
            // aborted repeat: stays NaN
        }
    });
    st.n_aborted = static_cast<std::size_t>(std::count_if(st.g_hats.begin(), st.g_hats.end(),
                                                          [](double x) { return std::isnan(x); }));
    st.rmse_stage1 = rmse_of(st.g0s, cfg.true_g);
    st.rmse_stage2 = rmse_of(st.g_hats, cfg.true_g);
    return st;
}

}  // namespace qprobe
