#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "qprobe/errors.hpp"
#include "qprobe/lindblad.hpp"

using namespace qprobe;
using namespace qprobe::cli;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "qprobe");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

CsvTable table_of(const Run& r) {
    std::istringstream in(r.out);
    return read_csv(in);
}

std::size_t column(const CsvTable& t, const std::string& name) {
    for (std::size_t j = 0; j < t.header.size(); ++j) {
        if (t.header[j] == name) return j;
    }
    FAIL("missing column " << name);
    return 0;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("qprobe_test_" + name);
}

}  // namespace

TEST_CASE("number rendering round-trips") {
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(INFINITY) == "inf");
    CHECK(format_number(-INFINITY) == "-inf");
    CHECK(format_number(0.0) == "0");
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng) * std::pow(10.0, i % 40 - 20);
        CHECK(std::strtod(format_number(x).c_str(), nullptr) == x);
    }

    CsvTable t;
    t.comments = {"hello"};
    t.header = {"a", "b"};
    t.add_row({1.0 / 3.0, INFINITY});
    std::ostringstream os;
    write_csv(os, t);
    CHECK(os.str() == "# hello\na,b\n0.33333333333333331,inf\n");
    std::istringstream is(os.str());
    const CsvTable back = read_csv(is);
    CHECK(back.header == t.header);
    CHECK(back.rows[0][0] == 1.0 / 3.0);
    CHECK(std::isinf(back.rows[0][1]));

    CHECK_THROWS_AS(t.add_row({1.0}), ShapeError);
    CsvTable dup;
    dup.header = {"x", "x"};
    std::ostringstream sink;
    CHECK_THROWS_AS(write_csv(sink, dup), ValidationError);
}

TEST_CASE("config text") {
    const auto v = parse_config_text("# comment\n  g_ratio = 0.3  # trailing\n\nn_times=11\n");
    CHECK(v.size() == 2);
    CHECK(v.at("g_ratio") == "0.3");
    CHECK(v.at("n_times") == "11");
    CHECK_THROWS_AS(parse_config_text("g_ratio 0.3\n"), ValidationError);
    CHECK_THROWS_AS(parse_config_text("a = 1\na = 2\n"), ValidationError);
    CHECK_THROWS_AS(parse_config_text("= 2\n"), ValidationError);
}

TEST_CASE("config resolution") {
    SUBCASE("defaults") {
        const RunConfig c = resolve_config("qfi", {}, {});
        CHECK(c.text("g_ratio") == "0.25");
        CHECK(c.rate("gamma_e") == doctest::Approx(ev_to_ifs(0.150)));
        CHECK(c.rate("g") == doctest::Approx(0.25 * ev_to_ifs(0.150)));
        CHECK(c.number("threshold") == 0.7);
    }
    SUBCASE("flags override the file, one unit per quantity") {
        const RunConfig c = resolve_config("qfi", {{"g_ev", "0.05"}, {"n_times", "11"}}, {{"g_ratio", "0.5"}});
        CHECK_FALSE(c.has("g_ev"));
        CHECK(c.rate("g") == doctest::Approx(0.5 * ev_to_ifs(0.150)));
        CHECK(c.count("n_times") == 11);
        const RunConfig d = resolve_config("qfi", {{"g_ifs", "0.05"}}, {});
        CHECK(d.rate("g") == 0.05);
        CHECK_FALSE(d.has("g_ratio"));
    }
    SUBCASE("violations") {
        CHECK_THROWS_AS(resolve_config("qfi", {{"speed", "1"}}, {}), ValidationError);
        CHECK_THROWS_AS(resolve_config("qfi", {}, {{"seed", "1"}}), ValidationError);
        CHECK_THROWS_AS(resolve_config("qfi", {{"g_ev", "0.1"}, {"g_ifs", "0.1"}}, {}), ValidationError);
        CHECK_THROWS_AS(resolve_config("nprobe", {{"delta_ev", "0.1"}}, {}), ValidationError);
        CHECK_THROWS_AS(resolve_config("plot", {}, {}), ValidationError);
        const RunConfig c = resolve_config("qfi", {{"n_times", "ten"}, {"t_end_fs", "1e999"}}, {});
        CHECK_THROWS_AS(c.count("n_times"), ValidationError);
        CHECK_THROWS_AS(c.number("t_end_fs"), ValidationError);
    }
}

TEST_CASE("evolve command") {
    const Run rk4 = invoke({"evolve", "--n_times", "101"});
    REQUIRE(rk4.code == 0);
    const CsvTable a = table_of(rk4);
    CHECK(a.header == std::vector<std::string>{"t_fs", "rho_ee", "rho_ff", "rho_ss", "re_rho_fe", "im_rho_fe"});
    CHECK(a.rows.size() == 101);
    CHECK(a.rows[0][column(a, "rho_ff")] == 1.0);
    CHECK(a.comments.front() == "qprobe evolve");

    const Run an = invoke({"evolve", "--n_times", "101", "--method", "analytic"});
    REQUIRE(an.code == 0);
    const CsvTable b = table_of(an);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        for (std::size_t j = 1; j < a.header.size(); ++j) CHECK(std::abs(a.rows[i][j] - b.rows[i][j]) < 1e-7);
    }

    const Run detuned = invoke({"evolve", "--delta_ev", "0.01", "--method", "analytic"});
    CHECK(detuned.code == 2);
    CHECK(detuned.err.find("detuning") != std::string::npos);
    CHECK(detuned.out.empty());

    CHECK(invoke({"evolve", "--method", "euler"}).code == 2);
}

TEST_CASE("qfi command") {
    const Run lossless = invoke({"qfi", "--gamma_e_ifs", "0", "--g_ifs", "0.05", "--n_times", "101"});
    REQUIRE(lossless.code == 0);
    const CsvTable t = table_of(lossless);
    for (std::size_t i = 1; i < t.rows.size(); ++i) {
        const double time = t.rows[i][0];
        CHECK(t.rows[i][1] == doctest::Approx(4.0 * time * time).epsilon(1e-6));
    }
    CHECK(std::isinf(t.rows[0][2]));

    const Run fig1 = invoke({"qfi"});
    REQUIRE(fig1.code == 0);
    for (const auto& row : table_of(fig1).rows) CHECK(row[1] >= 0.0);
    double peak = 0.0;
    REQUIRE(std::sscanf(fig1.err.c_str(), "qfi (g): peak_time = %lf", &peak) == 1);
    CHECK(peak == doctest::Approx(40.0).epsilon(5.0 / 40.0));

    const Run detuning = invoke({"qfi", "--parameter", "delta", "--delta_ev", "0.02", "--n_times", "51"});
    CHECK(detuning.code == 0);
    CHECK(invoke({"qfi", "--parameter", "gamma"}).code == 2);
    CHECK(invoke({"qfi", "--threshold", "1.5"}).code == 2);
}

TEST_CASE("nprobe command") {
    const Run r = invoke({"nprobe", "--n_min", "1", "--n_max", "4", "--n_times", "201"});
    REQUIRE(r.code == 0);
    const CsvTable t = table_of(r);
    CHECK(t.header == std::vector<std::string>{"N", "max_F", "t_peak"});
    CHECK(t.rows.size() == 4);
    CHECK(r.err.find("max F ~ N^") != std::string::npos);

    const Run q = invoke({"qfi", "--n_times", "201"});
    double peak_f = 0.0, peak_t = 0.0;
    REQUIRE(std::sscanf(q.err.c_str(), "qfi (g): peak_time = %lf fs, peak_F = %lf", &peak_t, &peak_f) == 2);
    CHECK(t.rows[0][1] == doctest::Approx(peak_f).epsilon(1e-5));
    CHECK(t.rows[0][2] == doctest::Approx(peak_t).epsilon(1e-5));

    CHECK(invoke({"nprobe", "--n_min", "1", "--n_max", "2"}).code == 2);
    CHECK(invoke({"nprobe", "--initial", "ghz"}).code == 2);
}

TEST_CASE("errorprop command") {
    const Run r = invoke({"errorprop", "--n_times", "50"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("\n0,inf,inf\n") != std::string::npos);
    const CsvTable t = table_of(r);
    for (const auto& row : t.rows) {
        if (std::isfinite(row[1]) && std::isfinite(row[2])) CHECK(row[1] >= row[2] - 1e-9);
    }
    const Run d = invoke({"errorprop", "--parameter", "delta", "--delta_ev", "0.02", "--n_times", "50"});
    CHECK(d.code == 0);
}

TEST_CASE("estimate command") {
    const std::vector<std::string> args{"estimate", "--n_shots", "100,400,1600", "--n_experiments", "30"};
    const Run a = invoke(args);
    REQUIRE(a.code == 0);
    const Run b = invoke(args);
    CHECK(a.out == b.out);
    const CsvTable t = table_of(a);
    CHECK(t.header == std::vector<std::string>{"n_shot", "rmse_full", "rmse_window"});
    CHECK(t.rows.size() == 3);
    for (const auto& row : t.rows) CHECK(row[2] < row[1]);
    CHECK(a.err.find("resource ratio") != std::string::npos);

    auto reseeded = args;
    reseeded.insert(reseeded.end(), {"--seed", "7"});
    CHECK(invoke(reseeded).out != a.out);
    CHECK(invoke({"estimate", "--n_shots", "100,x"}).code == 2);
}

TEST_CASE("protocol command") {
    const Run r = invoke({"protocol", "--n_experiments", "5"});
    REQUIRE(r.code == 0);
    const CsvTable t = table_of(r);
    CHECK(t.header == std::vector<std::string>{"stage", "t_fs", "freq", "p_model"});
    CHECK(t.rows.size() == 100);
    CHECK(r.err.find("stage 2 g_hat") != std::string::npos);
    CHECK(r.err.find("over 5 repeats") != std::string::npos);
}

TEST_CASE("files, help and exit codes") {
    const auto cfg_path = temp_file("run.cfg");
    const auto out_path = temp_file("out.csv");
    {
        std::ofstream cfg(cfg_path);
        cfg << "# Fig. 1 dynamics\ng_ratio = 0.25\ngamma_e_ev = 0.150\nn_times = 21\n";
    }
    const Run to_file = invoke({"evolve", "--config", cfg_path.string(), "--n_times", "11", "-o", out_path.string()});
    REQUIRE(to_file.code == 0);
    CHECK(to_file.out.empty());
    std::ifstream in(out_path);
    const CsvTable t = read_csv(in);
    CHECK(t.rows.size() == 11);  // flag beats file
    CHECK(std::find(t.comments.begin(), t.comments.end(), "n_times = 11") != t.comments.end());
    CHECK(invoke({"evolve", "--config", cfg_path.string(), "--n_times", "11"}).out.size() > 0);

    {
        std::ofstream cfg(cfg_path);
        cfg << "g_ratio = 0.25\ncolour = blue\n";
    }
    const Run unknown = invoke({"evolve", "--config", cfg_path.string()});
    CHECK(unknown.code == 2);
    CHECK(unknown.err.find("colour") != std::string::npos);
    CHECK(invoke({"evolve", "--config", temp_file("missing.cfg").string()}).code == 2);

    CHECK(invoke({"--help"}).code == 0);
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"evolve", "--bogus", "1"}).code == 2);
    // an unstable step size blows up the integrator
    CHECK(invoke({"evolve", "--gamma_e_ifs", "1000", "--g_ifs", "0.05", "--n_times", "11"}).code == 1);

    std::filesystem::remove(cfg_path);
    std::filesystem::remove(out_path);
}
