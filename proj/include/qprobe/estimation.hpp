#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qprobe/lindblad.hpp"
#include "qprobe/nonhermitian.hpp"
#include "qprobe/qfi.hpp"
#include "qprobe/rng.hpp"

namespace qprobe {

/// delta x(t) = sqrt(rho_ff (1 - rho_ff)) / |d rho_ff / dx| for the readout
/// |f><f|, next to 1/sqrt(F). Points with a vanishing derivative (or F = 0)
/// hold +infinity.
struct ErrorPropagationSeries {
    std::vector<double> times;
    std::vector<double> delta_param;
    std::vector<double> inv_sqrt_f;
    Parameter parameter = Parameter::g;
};

ErrorPropagationSeries error_propagation(const ThreeLevelParams& p, const TimeGrid& grid, Parameter wrt);

/// Index of the smallest finite entry; values.size() if there is none.
std::size_t argmin_finite(std::span<const double> values);

/// delta g at the exceptional point g = gamma_e / 4 from the closed-form
/// populations and their analytic g-derivative.
double closed_form_delta_g_ep(double gamma_e, double t);

/// P_f(t) = rho_ff(t) from the resonant closed form (Delta must be 0).
double probability_f(const ThreeLevelParams& p, double t);

/// One binomial draw of the |f> count per time.
std::vector<std::uint64_t> simulate_counts(const ThreeLevelParams& p, std::span<const double> times,
                                           std::uint64_t n_shot, SplitMix64& rng);

struct FitBounds {
    double lo;
    double hi;
};

struct FitResult {
    double g_hat = 0.0;
    double sse = 0.0;
    bool converged = false;  // false when the minimizer sits on a bound
};

/// Least-squares fit of g to observed frequencies of |f>; gamma_e comes from
/// p_fixed, p_fixed.g is ignored. Coarse scan, golden-section search from the
/// three best local minima, then one parabolic step; the bracket is shrunk to
/// below 1e-9 gamma_e.
FitResult fit_g(std::span<const double> times, std::span<const double> freqs, const ThreeLevelParams& p_fixed,
                FitBounds bounds);

struct EstimationConfig {
    double true_g = 0.0;   // fs^-1
    double gamma_e = 0.0;  // fs^-1
    std::vector<double> times;  // full-range measurement times, fs
    std::uint64_t n_shot = 1000;
    std::size_t n_experiments = 100;
    std::uint64_t seed = 0;
    std::optional<FitBounds> fit_bounds;  // default [0.01 gamma_e, 2 gamma_e]
    std::optional<Window> window;         // measure inside this range instead
    bool noiseless = false;               // fit P_f(t) itself instead of sampled frequencies

    FitBounds bounds() const;
    /// times, or as many evenly spaced times spanning the window.
    std::vector<double> measurement_times() const;
    ThreeLevelParams params() const { return {true_g, 0.0, gamma_e}; }
    void validate() const;
};

struct EstimationResult {
    std::vector<double> g_hats;
    std::vector<bool> converged;
    double rmse = 0.0;
    std::size_t n_converged = 0;
};

/// M independent seeded experiments (seed + index), each fitted on its own.
EstimationResult run_experiments(const EstimationConfig& cfg);

struct ShotStudyRow {
    std::uint64_t n_shot;
    double rmse;
    std::size_t n_converged;
};

struct ShotStudy {
    std::vector<ShotStudyRow> rows;
    PowerLaw fit{};           // rmse = a n_shot^b
    double constrained_a = 0;  // rmse = a / sqrt(n_shot)
};

ShotStudy run_shot_study(const EstimationConfig& cfg, std::span<const std::uint64_t> n_shot_list);

/// Shots the first study needs to match the second one's error,
/// (a_first / a_second)^2 from the a / sqrt(n) fits.
double resource_ratio(const ShotStudy& first, const ShotStudy& second);

struct ProtocolReport {
    double g0 = 0.0;
    double g_hat = 0.0;
    bool stage2_converged = false;
    double peak_time = 0.0;
    Window window{0.0, 0.0};
    std::uint64_t total_shots = 0;
    std::vector<double> stage1_times, stage1_freqs;
    std::vector<double> stage2_times, stage2_freqs;
};

/// Stage 1 fits the full-range times at coarse_shots, stage 2 refits inside
/// the QFI window computed at the stage-1 estimate with fine_shots. Throws
/// FitError if stage 1 ends on a bound.
ProtocolReport two_stage_protocol(const EstimationConfig& cfg, std::uint64_t coarse_shots, std::uint64_t fine_shots,
                                  double threshold_fraction = kDefaultWindowThreshold);

struct ProtocolStudy {
    std::vector<double> g0s;
    std::vector<double> g_hats;
    std::vector<Window> windows;
    double rmse_stage1 = 0.0;
    double rmse_stage2 = 0.0;
    std::size_t n_aborted = 0;  // repeats whose stage 1 hit a bound
};

/// cfg.n_experiments protocol runs with seeds seed + index.
ProtocolStudy run_protocol_study(const EstimationConfig& cfg, std::uint64_t coarse_shots, std::uint64_t fine_shots,
                                 double threshold_fraction = kDefaultWindowThreshold);

}  // namespace qprobe
