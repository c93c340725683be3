#include <doctest.h>

#include <cmath>
#include <random>

#include "qprobe/errors.hpp"
#include "qprobe/lindblad.hpp"
#include "test_support.hpp"

using namespace qprobe;
using qprobe::testing::fig1_params;

namespace {

const complex I{0.0, 1.0};

// Eq. 11 exactly as printed, with complex alpha. Oracle only; it loses
// precision near alpha = 0.
ComplexMatrix eq11_literal(const ThreeLevelParams& p, double t) {
    const complex al = p.alpha();
    const double g = p.g, gam = p.gamma_e;
    const complex pre = std::exp(-gam * t / 2.0) / (al * al);
    const complex c = std::cos(al * t / 2.0), s = std::sin(al * t / 2.0);
    const complex sq = std::sin(al * t / 4.0);
    ComplexMatrix m(3, 3);
    m(kF, kF) = pre * (8.0 * g * g + (8.0 * g * g - gam * gam) * c + gam * al * s);
    m(kE, kE) = pre * 16.0 * g * g * sq * sq;
    m(kS, kS) = 1.0 - pre * (16.0 * g * g - gam * gam * c + gam * al * s);
    m(kF, kE) = 2.0 * I * g * pre * (gam - gam * c + al * s);
    m(kE, kF) = std::conj(m(kF, kE));
    return m;
}

ThreeLevelParams with_alpha_squared(double gamma_e, double alpha2) {
    return {std::sqrt((gamma_e * gamma_e + alpha2) / 16.0), 0.0, gamma_e};
}

}  // namespace

TEST_CASE("unit conversion and Hamiltonian") {
    CHECK(build_hamiltonian({0.0, 0.0, 0.3}).max_abs() == 0.0);

    const double gamma_e = ev_to_ifs(0.150);
    const ComplexMatrix h = build_hamiltonian({gamma_e / 4.0, ev_to_ifs(0.02), gamma_e});
    CHECK(h(kE, kF).real() == doctest::Approx(0.150 / (4.0 * 0.6582119569)).epsilon(1e-14));
    CHECK(h(kE, kF).real() == doctest::Approx(0.056972).epsilon(1e-5));
    CHECK(h(kF, kE) == h(kE, kF));
    CHECK(h(kF, kF).real() == doctest::Approx(0.030385).epsilon(1e-5));
    CHECK(h(kE, kE).real() == doctest::Approx(-0.030385).epsilon(1e-5));
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(h(kS, k) == complex{});
        CHECK(h(k, kS) == complex{});
    }
}

TEST_CASE("jump operator") {
    CHECK(jump_operator({0.1, 0.0, 0.0}).max_abs() == 0.0);
    const ComplexMatrix l = jump_operator({0.1, 0.0, 0.25});
    CHECK(l(kS, kE) == complex{0.5});
    CHECK(l.max_abs() == 0.5);
    const ComplexMatrix ldl = matmul(adjoint(l), l);
    ComplexMatrix expected(3, 3);
    expected(kE, kE) = 0.25;
    CHECK(max_abs_diff(ldl, expected) < 1e-16);
    CHECK_THROWS_AS(jump_operator({0.1, 0.0, -1.0}), ValidationError);
}

TEST_CASE("gksl_rhs") {
    const ThreeLevelParams p{0.07, 0.0, 0.2};
    const ComplexMatrix h = build_hamiltonian(p);
    const ComplexMatrix jumps[] = {jump_operator(p)};

    SUBCASE("sink is a fixed point") {
        const auto rho = DensityMatrix::basis_state(3, kS);
        CHECK(gksl_rhs(rho, h, jumps).max_abs() < 1e-16);
    }
    SUBCASE("trace preservation") {
        std::mt19937_64 rng(3);
        for (int k = 0; k < 20; ++k) {
            const DensityMatrix rho(qprobe::testing::random_density(rng, 3, 1 + k % 3));
            const ThreeLevelParams q{0.1 * (k + 1), 0.03 * k, 0.05 * k};
            const ComplexMatrix js[] = {jump_operator(q)};
            CHECK(std::abs(gksl_rhs(rho, build_hamiltonian(q), js).trace()) < 1e-12);
        }
    }
    SUBCASE("commutator from |f><f|") {
        const auto rho = DensityMatrix::basis_state(3, kF);
        const ComplexMatrix no_jumps[] = {ComplexMatrix(3, 3)};
        const ComplexMatrix r = gksl_rhs(rho, h, no_jumps);
        ComplexMatrix expected(3, 3);
        expected(kE, kF) = -I * p.g;
        expected(kF, kE) = I * p.g;
        CHECK(max_abs_diff(r, expected) < 1e-16);
        // |f><f| has no |e> population, so the dissipator does not contribute either
        CHECK(max_abs_diff(gksl_rhs(rho, h, jumps), expected) < 1e-16);
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(gksl_rhs(ComplexMatrix::identity(2), h, jumps), ShapeError);
    }
}

TEST_CASE("analytic_rho") {
    SUBCASE("t = 0") {
        const auto rho = analytic_rho(fig1_params(), 0.0);
        CHECK(rho.population(kF) == 1.0);
        CHECK(max_abs_diff(rho.mat(), DensityMatrix::basis_state(3, kF).mat()) == 0.0);
    }
    SUBCASE("exceptional point limit") {
        const auto p = fig1_params();
        const double gam = p.gamma_e;
        for (double t : {0.5, 10.0, 40.0, 100.0}) {
            const double u = gam * t;
            const auto rho = analytic_rho(p, t);
            CHECK(rho.population(kF) ==
                  doctest::Approx(std::exp(-u / 2) * (1 + u / 4) * (1 + u / 4)).epsilon(1e-13));
            CHECK(rho.population(kE) == doctest::Approx(std::exp(-u / 2) * p.g * p.g * t * t).epsilon(1e-13));
        }
    }
    SUBCASE("lossless Rabi") {
        const ThreeLevelParams p{0.09, 0.0, 0.0};
        for (double t = 0.0; t <= 100.0; t += 3.7) {
            const auto rho = analytic_rho(p, t);
            CHECK(std::abs(rho.population(kE) - std::pow(std::sin(p.g * t), 2)) < 1e-13);
            CHECK(std::abs(rho.population(kS)) < 1e-13);
        }
    }
    SUBCASE("matches the literal closed form away from the exceptional point") {
        const double gam = 0.2;
        for (double ratio : {0.05, 0.15, 0.2, 0.3, 0.5, 1.0, 2.0}) {
            const ThreeLevelParams p{ratio * gam, 0.0, gam};
            for (double t = 0.0; t <= 100.0; t += 2.5) {
                CHECK(max_abs_diff(analytic_rho(p, t).mat(), eq11_literal(p, t)) < 1e-11);
            }
        }
    }
    SUBCASE("nonzero detuning is rejected") {
        CHECK_THROWS_AS(analytic_rho({0.05, 0.01, 0.2}, 1.0), UnsupportedConfiguration);
    }
}

TEST_CASE("analytic_rho is continuous through the exceptional point") {
    const double gam = ev_to_ifs(0.150);
    for (double t : {1.0, 20.0, 40.0, 75.0, 100.0}) {
        const double u = gam * t;
        const double env = std::exp(-u / 2);
        for (double a2 : {1e-12, -1e-12, 0.0}) {
            const ThreeLevelParams p = with_alpha_squared(gam, a2);
            const auto rho = analytic_rho(p, t);
            // series limit of Eq. 11
            CHECK(std::abs(rho.population(kF) - env * (1 + u / 4) * (1 + u / 4)) < 1e-8);
            CHECK(std::abs(rho.population(kE) - env * p.g * p.g * t * t) < 1e-8);
            CHECK(std::abs(rho(kF, kE) - I * p.g * t * env * (1 + u / 4)) < 1e-8);
            CHECK(std::abs(rho.population(kS) - (1 - env * ((1 + u / 4) * (1 + u / 4) + p.g * p.g * t * t))) < 1e-8);
        }
    }
}

TEST_CASE("evolve_gksl") {
    SUBCASE("lossless Rabi") {
        const ThreeLevelParams p{0.08, 0.0, 0.0};
        const TimeGrid grid(0.0, 100.0, 201);
        const auto traj = evolve_gksl(p, DensityMatrix::basis_state(3, kF), grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            CHECK(std::abs(traj[i].population(kE) - std::pow(std::sin(p.g * grid[i]), 2)) < 1e-8);
        }
    }
    SUBCASE("matches the closed form on Fig. 1 parameters") {
        const auto p = fig1_params();
        const TimeGrid grid(0.0, 100.0, 101);
        const auto traj = evolve_gksl(p, DensityMatrix::basis_state(3, kF), grid);
        CHECK(max_abs_diff(traj[0].mat(), DensityMatrix::basis_state(3, kF).mat()) == 0.0);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            CHECK(max_abs_diff(traj[i].mat(), analytic_rho(p, grid[i]).mat()) < 1e-8);
        }
        for (std::size_t i = 1; i < grid.size(); ++i) {
            CHECK(traj[i].population(kS) >= traj[i - 1].population(kS) - 1e-10);
        }
    }
    SUBCASE("grid that starts late") {
        const auto p = fig1_params();
        const TimeGrid grid(20.0, 60.0, 5);
        const auto traj = evolve_gksl(p, DensityMatrix::basis_state(3, kF), grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            CHECK(max_abs_diff(traj[i].mat(), analytic_rho(p, grid[i]).mat()) < 1e-9);
        }
    }
    SUBCASE("detuned trajectories stay valid density matrices") {
        const ThreeLevelParams p{0.057, ev_to_ifs(0.02), ev_to_ifs(0.150)};
        const auto traj = evolve_gksl(p, DensityMatrix::basis_state(3, kF), TimeGrid(0.0, 100.0, 51));
        for (const auto& rho : traj) {
            CHECK(std::abs(rho.mat().trace().real() - 1.0) < 1e-8);
            CHECK(hermiticity_defect(rho.mat()) < 1e-12);
        }
    }
    SUBCASE("contract violations") {
        const auto p = fig1_params();
        CHECK_THROWS_AS(evolve_gksl(p, DensityMatrix::basis_state(3, kF), TimeGrid(0.0, 1.0, 11), 0.5),
                        ValidationError);
        CHECK_THROWS_AS(evolve_gksl(p, DensityMatrix::basis_state(2, 0), TimeGrid(0.0, 1.0, 11)), ShapeError);
    }
}

TEST_CASE("value types validate") {
    CHECK_THROWS_AS(TimeGrid(1.0, 1.0, 5), ValidationError);
    CHECK_THROWS_AS(TimeGrid(0.0, 1.0, 1), ValidationError);
    CHECK(TimeGrid(0.0, 100.0, 50)[49] == 100.0);

    ComplexMatrix bad_trace = ComplexMatrix::identity(2);
    CHECK_THROWS_AS(DensityMatrix{bad_trace}, ValidationError);
    const ComplexMatrix negative{{1.5, 0.0}, {0.0, -0.5}};
    CHECK_THROWS_AS(DensityMatrix{negative}, ValidationError);
    const ComplexMatrix non_herm{{0.5, 0.1}, {0.0, 0.5}};
    CHECK_THROWS_AS(DensityMatrix{non_herm}, ValidationError);

    const ThreeLevelParams p{0.1, 0.0, 0.2};
    const complex al = p.alpha();
    CHECK(std::abs(al * al + p.gamma_e * p.gamma_e - 16 * p.g * p.g) < 1e-15);
    const ThreeLevelParams over{0.01, 0.0, 0.2};
    CHECK(over.alpha().real() == 0.0);
    CHECK(over.alpha().imag() > 0.0);
    CHECK_THROWS_AS((ThreeLevelParams{0.1, 0.0, -0.1}.validate()), ValidationError);
}
