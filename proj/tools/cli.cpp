#include "cli.hpp"

#include <CLI11.hpp>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "qprobe/errors.hpp"
#include "qprobe/estimation.hpp"
#include "qprobe/lindblad.hpp"
#include "qprobe/nonhermitian.hpp"
#include "qprobe/qfi.hpp"

namespace qprobe::cli {

namespace {

struct KeySpec {
    std::string name;
    std::string default_value;
    std::string help;
};

struct CommandSpec {
    std::string name;
    std::string description;
    std::vector<std::string> physical;  // rate groups: gamma_e, g, delta
    std::vector<KeySpec> keys;
};

const std::map<std::string, std::vector<std::string>> kUnitKeys = {
    {"gamma_e", {"gamma_e_ev", "gamma_e_ifs"}},
    {"g", {"g_ev", "g_ifs", "g_ratio"}},
    {"delta", {"delta_ev", "delta_ifs"}},
};

const std::map<std::string, KeySpec> kPhysicalDefaults = {
    {"gamma_e", {"gamma_e_ev", "0.150", "decay rate of |e> (hbar gamma_e in eV, or fs^-1)"}},
    {"g", {"g_ratio", "0.25", "coupling (eV, fs^-1, or g_ratio = g / gamma_e)"}},
    {"delta", {"delta_ev", "0", "detuning (eV or fs^-1)"}},
};

std::vector<KeySpec> time_keys(const std::string& n_times) {
    return {{"t_start_fs", "0", "first time, fs"},
            {"t_end_fs", "100", "last time, fs"},
            {"n_times", n_times, "number of evenly spaced times"}};
}

std::vector<KeySpec> join(std::vector<KeySpec> a, const std::vector<KeySpec>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

const std::vector<CommandSpec>& commands() {
    static const std::vector<CommandSpec> specs = {
        {"evolve", "density-matrix populations and coherence from |f>", {"gamma_e", "g", "delta"},
         join(time_keys("501"), {{"method", "rk4", "analytic (Delta = 0 only) or rk4"},
                                 {"dt_fs", "0.01", "RK4 step, fs"}})},
        {"qfi", "time-dependent quantum Fisher information", {"gamma_e", "g", "delta"},
         join(time_keys("501"), {{"parameter", "g", "g or delta"},
                                 {"threshold", "0.7", "window threshold as a fraction of the peak"}})},
        {"nprobe", "peak QFI against the number of probes", {"gamma_e", "g"},
         join(time_keys("501"), {{"initial", "f1", "f1, chi1 or e_plus_chi1"},
                                 {"n_min", "1", "smallest N"},
                                 {"n_max", "25", "largest N"}})},
        {"errorprop", "propagation-of-error precision next to 1/sqrt(F)", {"gamma_e", "g", "delta"},
         join(time_keys("500"), {{"parameter", "g", "g or delta"}})},
        {"estimate", "shot-noise Monte Carlo: rmse of fitted g, full range vs window", {"gamma_e", "g"},
         join(time_keys("50"), {{"n_shots", "50,100,200,500,1000,2000,5000", "comma-separated shot counts"},
                                {"n_experiments", "100", "experiments per shot count"},
                                {"seed", "12345", "base seed; experiment i uses seed + i"},
                                {"window_lo_fs", "20", "window start, fs"},
                                {"window_hi_fs", "60", "window end, fs"}})},
        {"protocol", "two-stage estimation: coarse full-range fit, then a fine fit in the QFI window",
         {"gamma_e", "g"},
         join(time_keys("50"), {{"coarse_shots", "200", "shots per time in stage 1"},
                                {"fine_shots", "2000", "shots per time in stage 2"},
                                {"threshold", "0.7", "window threshold as a fraction of the peak"},
                                {"seed", "12345", "seed"},
                                {"n_experiments", "1", "protocol repeats (seed + i) for the rmse report"}})},
    };
    return specs;
}

const CommandSpec& command_spec(const std::string& name) {
    for (const auto& c : commands()) {
        if (c.name == name) return c;
    }
    throw ValidationError("unknown command '" + name + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Which rate group a key belongs to, or "" for ordinary keys.
std::string group_of(const std::string& key) {
    for (const auto& [base, keys] : kUnitKeys) {
        for (const auto& k : keys) {
            if (k == key) return base;
        }
    }
    return "";
}

void merge_layer(const CommandSpec& spec, std::map<std::string, std::string>& merged,
                 const std::map<std::string, std::string>& layer, const std::string& source) {
    std::set<std::string> allowed;
    for (const auto& k : spec.keys) allowed.insert(k.name);
    for (const auto& base : spec.physical) {
        for (const auto& k : kUnitKeys.at(base)) allowed.insert(k);
    }
    std::map<std::string, std::vector<std::string>> groups_seen;
    for (const auto& [key, value] : layer) {
        if (!allowed.count(key)) {
            throw ValidationError(source + ": unknown key '" + key + "' for command " + spec.name);
        }
        const std::string base = group_of(key);
        if (!base.empty()) groups_seen[base].push_back(key);
    }
    for (const auto& [base, keys] : groups_seen) {
        if (keys.size() > 1) {
            throw ValidationError(source + ": " + base + " given in more than one unit (" + keys[0] + ", " + keys[1] +
                                  ")");
        }
        for (const auto& k : kUnitKeys.at(base)) merged.erase(k);
    }
    for (const auto& [key, value] : layer) merged[key] = value;
}

ThreeLevelParams three_level(const RunConfig& cfg) {
    ThreeLevelParams p{cfg.rate("g"), cfg.has("delta_ev") || cfg.has("delta_ifs") ? cfg.rate("delta") : 0.0,
                       cfg.rate("gamma_e")};
    p.validate();
    return p;
}

TimeGrid time_grid(const RunConfig& cfg) {
    return TimeGrid(cfg.number("t_start_fs"), cfg.number("t_end_fs"), cfg.count("n_times"));
}

std::string fmt(const char* pattern, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, x);
    return buf;
}

std::string describe_window(const Window& w) { return "(" + fmt("%.6g", w.lo) + ", " + fmt("%.6g", w.hi) + ") fs"; }

CommandOutput cmd_evolve(const RunConfig& cfg) {
    const ThreeLevelParams p = three_level(cfg);
    const TimeGrid grid = time_grid(cfg);
    const std::string method = cfg.text("method");
    std::vector<ComplexMatrix> rhos;
    if (method == "analytic") {
        for (double t : grid.points()) rhos.push_back(analytic_rho(p, t).mat());
    } else if (method == "rk4") {
        const auto rho0 = DensityMatrix::basis_state(3, kF, three_level_labels());
        for (const auto& r : evolve_gksl(p, rho0, grid, cfg.number("dt_fs"))) rhos.push_back(r.mat());
    } else {
        throw ValidationError("method must be 'analytic' or 'rk4', got '" + method + "'");
    }
    CommandOutput out;
    out.table.header = {"t_fs", "rho_ee", "rho_ff", "rho_ss", "re_rho_fe", "im_rho_fe"};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const ComplexMatrix& r = rhos[i];
        out.table.add_row({grid[i], r(kE, kE).real(), r(kF, kF).real(), r(kS, kS).real(), r(kF, kE).real(),
                           r(kF, kE).imag()});
    }
    const ComplexMatrix& last = rhos.back();
    out.summary = "evolve (" + method + "): at t = " + fmt("%.6g", grid.t_end()) + " fs rho_ee = " +
                  fmt("%.6g", last(kE, kE).real()) + ", rho_ff = " + fmt("%.6g", last(kF, kF).real()) +
                  ", rho_ss = " + fmt("%.6g", last(kS, kS).real());
    return out;
}

CommandOutput cmd_qfi(const RunConfig& cfg) {
    const ThreeLevelParams p = three_level(cfg);
    const Parameter wrt = parameter_from_string(cfg.text("parameter"));
    const auto rho0 = DensityMatrix::basis_state(3, kF, three_level_labels());
    const QfiSeries s = qfi_series(p, rho0, time_grid(cfg), wrt, {}, cfg.number("threshold"));
    CommandOutput out;
    out.table.header = {"t_fs", "F", "inv_sqrt_F"};
    for (std::size_t i = 0; i < s.times.size(); ++i) {
        const double f = s.values[i];
        out.table.add_row({s.times[i], f, f > 0.0 ? 1.0 / std::sqrt(f) : INFINITY});
    }
    out.summary = "qfi (" + to_string(wrt) + "): peak_time = " + fmt("%.6g", s.peak_time) +
                  " fs, peak_F = " + fmt("%.6g", s.peak_value) + ", window = " + describe_window(s.window);
    return out;
}

CommandOutput cmd_nprobe(const RunConfig& cfg) {
    NProbeModel m;
    m.g = cfg.rate("g");
    m.gamma_e = cfg.rate("gamma_e");
    m.initial_state = nprobe_initial_from_string(cfg.text("initial"));
    const std::size_t lo = cfg.count("n_min"), hi = cfg.count("n_max");
    if (lo < 1 || hi < lo) throw ValidationError("need 1 <= n_min <= n_max");
    std::vector<std::size_t> ns;
    for (std::size_t n = lo; n <= hi; ++n) ns.push_back(n);
    const ScalingFit fit = max_qfi_scaling(ns, m, time_grid(cfg));
    CommandOutput out;
    out.table.header = {"N", "max_F", "t_peak"};
    for (std::size_t i = 0; i < ns.size(); ++i) {
        out.table.add_row({static_cast<double>(ns[i]), fit.max_qfi[i], fit.peak_times[i]});
    }
    out.summary = "nprobe (" + to_string(m.initial_state) + "): max F ~ N^" + fmt("%.4f", fit.exponent) + " +- " +
                  fmt("%.4f", fit.exponent_stderr) + " over N = " + std::to_string(lo) + ".." + std::to_string(hi);
    return out;
}

CommandOutput cmd_errorprop(const RunConfig& cfg) {
    const ThreeLevelParams p = three_level(cfg);
    const Parameter wrt = parameter_from_string(cfg.text("parameter"));
    const ErrorPropagationSeries e = error_propagation(p, time_grid(cfg), wrt);
    CommandOutput out;
    out.table.header = {"t_fs", "delta_param", "inv_sqrt_F"};
    for (std::size_t i = 0; i < e.times.size(); ++i) out.table.add_row({e.times[i], e.delta_param[i], e.inv_sqrt_f[i]});
    const std::size_t a = argmin_finite(e.delta_param), b = argmin_finite(e.inv_sqrt_f);
    if (a < e.times.size() && b < e.times.size()) {
        out.summary = "errorprop (" + to_string(wrt) + "): min delta at t = " + fmt("%.6g", e.times[a]) +
                      " fs, max F at t = " + fmt("%.6g", e.times[b]) + " fs, delta * sqrt(F) there = " +
                      fmt("%.6g", e.delta_param[b] / e.inv_sqrt_f[b]);
    } else {
        out.summary = "errorprop (" + to_string(wrt) + "): no finite values";
    }
    return out;
}

EstimationConfig estimation_config(const RunConfig& cfg) {
    EstimationConfig e;
    e.true_g = cfg.rate("g");
    e.gamma_e = cfg.rate("gamma_e");
    e.times = time_grid(cfg).points();
    e.n_experiments = cfg.count("n_experiments");
    e.seed = cfg.count("seed");
    return e;
}

CommandOutput cmd_estimate(const RunConfig& cfg) {
    EstimationConfig full = estimation_config(cfg);
    EstimationConfig win = full;
    win.window = Window{cfg.number("window_lo_fs"), cfg.number("window_hi_fs")};
    std::vector<std::uint64_t> shots;
    for (std::size_t n : cfg.count_list("n_shots")) shots.push_back(n);
    const ShotStudy a = run_shot_study(full, shots);
    const ShotStudy b = run_shot_study(win, shots);
    CommandOutput out;
    out.table.header = {"n_shot", "rmse_full", "rmse_window"};
    for (std::size_t i = 0; i < shots.size(); ++i) {
        out.table.add_row({static_cast<double>(shots[i]), a.rows[i].rmse, b.rows[i].rmse});
    }
    auto line = [](const std::string& name, const ShotStudy& s) {
        return name + ": rmse = " + fmt("%.6g", s.fit.prefactor) + " n^" + fmt("%.4f", s.fit.exponent) +
               " (+- " + fmt("%.4f", s.fit.exponent_stderr) + "), a/sqrt(n) fit a = " + fmt("%.6g", s.constrained_a);
    };
    out.summary = line("full range", a) + "\n" + line("window " + describe_window(*win.window), b) +
                  "\nresource ratio (full / window shots at equal error) = " + fmt("%.4g", resource_ratio(a, b));
    return out;
}

CommandOutput cmd_protocol(const RunConfig& cfg) {
    const EstimationConfig e = estimation_config(cfg);
    const std::uint64_t coarse = cfg.count("coarse_shots"), fine = cfg.count("fine_shots");
    const double thr = cfg.number("threshold");
    const ProtocolReport r = two_stage_protocol(e, coarse, fine, thr);

    CommandOutput out;
    out.table.header = {"stage", "t_fs", "freq", "p_model"};
    const ThreeLevelParams p0{r.g0, 0.0, e.gamma_e}, p1{r.g_hat, 0.0, e.gamma_e};
    for (std::size_t i = 0; i < r.stage1_times.size(); ++i) {
        out.table.add_row({1.0, r.stage1_times[i], r.stage1_freqs[i], probability_f(p0, r.stage1_times[i])});
    }
    for (std::size_t i = 0; i < r.stage2_times.size(); ++i) {
        out.table.add_row({2.0, r.stage2_times[i], r.stage2_freqs[i], probability_f(p1, r.stage2_times[i])});
    }
    std::ostringstream s;
    s << "protocol: stage 1 g0 = " << fmt("%.9g", r.g0) << " fs^-1 (error " << fmt("%.3g", r.g0 - e.true_g)
      << "), QFI peak at " << fmt("%.6g", r.peak_time) << " fs, window " << describe_window(r.window) << "\n"
      << "protocol: stage 2 g_hat = " << fmt("%.9g", r.g_hat) << " fs^-1 (error " << fmt("%.3g", r.g_hat - e.true_g)
      << (r.stage2_converged ? "" : ", on a fit bound") << "), total shots = " << r.total_shots;
    if (e.n_experiments > 1) {
        const ProtocolStudy st = run_protocol_study(e, coarse, fine, thr);
        s << "\nprotocol: over " << e.n_experiments << " repeats rmse stage 1 = " << fmt("%.4g", st.rmse_stage1)
          << ", stage 2 = " << fmt("%.4g", st.rmse_stage2) << ", aborted = " << st.n_aborted;
    }
    out.summary = s.str();
    return out;
}

}  // namespace

void CsvTable::add_row(std::vector<double> row) {
    if (row.size() != header.size()) throw ShapeError("CsvTable: row width differs from header");
    rows.push_back(std::move(row));
}

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_csv(std::ostream& out, const CsvTable& table) {
    std::set<std::string> names(table.header.begin(), table.header.end());
    if (names.size() != table.header.size()) throw ValidationError("CsvTable: duplicate column names");
    for (const auto& c : table.comments) out << "# " << c << '\n';
    for (std::size_t j = 0; j < table.header.size(); ++j) out << (j ? "," : "") << table.header[j];
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << format_number(row[j]);
        out << '\n';
    }
}

CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0) {
            t.comments.push_back(line.substr(2));
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (!have_header) {
            t.header = cells;
            have_header = true;
            continue;
        }
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(std::strtod(c.c_str(), nullptr));
        t.add_row(std::move(row));
    }
    return t;
}

std::string RunConfig::text(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ValidationError("missing setting '" + key + "'");
    return it->second;
}

double RunConfig::number(const std::string& key) const {
    const std::string s = text(key);
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(x)) {
        throw ValidationError(key + ": '" + s + "' is not a finite number");
    }
    return x;
}

std::size_t RunConfig::count(const std::string& key) const {
    const std::string s = text(key);
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || s[0] == '-' || *end != '\0' || errno == ERANGE) {
        throw ValidationError(key + ": '" + s + "' is not a non-negative integer");
    }
    return static_cast<std::size_t>(v);
}

std::vector<std::size_t> RunConfig::count_list(const std::string& key) const {
    std::vector<std::size_t> out;
    std::stringstream ss(text(key));
    for (std::string item; std::getline(ss, item, ',');) {
        RunConfig one(command_, {{key, trim(item)}});
        out.push_back(one.count(key));
    }
    if (out.empty()) throw ValidationError(key + ": empty list");
    return out;
}

double RunConfig::rate(const std::string& base) const {
    if (has(base + "_ev")) return ev_to_ifs(number(base + "_ev"));
    if (has(base + "_ifs")) return number(base + "_ifs");
    if (base == "g" && has("g_ratio")) return number("g_ratio") * rate("gamma_e");
    throw ValidationError("missing setting for " + base);
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> values;
    std::stringstream ss(text);
    std::size_t lineno = 0;
    for (std::string line; std::getline(ss, line);) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ValidationError("config line " + std::to_string(lineno) + ": empty key");
        if (!values.emplace(key, value).second) {
            throw ValidationError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
    }
    return values;
}

RunConfig resolve_config(const std::string& command, const std::map<std::string, std::string>& file_values,
                         const std::map<std::string, std::string>& flag_values) {
    const CommandSpec& spec = command_spec(command);
    std::map<std::string, std::string> merged;
    for (const auto& k : spec.keys) merged[k.name] = k.default_value;
    for (const auto& base : spec.physical) {
        const KeySpec& d = kPhysicalDefaults.at(base);
        merged[d.name] = d.default_value;
    }
    merge_layer(spec, merged, file_values, "config file");
    merge_layer(spec, merged, flag_values, "command line");
    return RunConfig(command, std::move(merged));
}

CommandOutput run_command(const RunConfig& cfg) {
    const std::string& c = cfg.command();
    CommandOutput out;
    if (c == "evolve") out = cmd_evolve(cfg);
    else if (c == "qfi") out = cmd_qfi(cfg);
    else if (c == "nprobe") out = cmd_nprobe(cfg);
    else if (c == "errorprop") out = cmd_errorprop(cfg);
    else if (c == "estimate") out = cmd_estimate(cfg);
    else if (c == "protocol") out = cmd_protocol(cfg);
    else throw ValidationError("unknown command '" + c + "'");

    out.table.comments.insert(out.table.comments.begin(), "qprobe " + c);
    for (const auto& [k, v] : cfg.values()) out.table.comments.push_back(k + " = " + v);
    return out;
}

std::vector<std::string> command_names() {
    std::vector<std::string> names;
    for (const auto& c : commands()) names.push_back(c.name);
    return names;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Lossy quantum probe simulations: dynamics, quantum Fisher information and estimation studies"};
    app.require_subcommand(1, 1);
    std::string config_path, output_path;
    std::map<std::string, std::string> flags;

    for (const auto& spec : commands()) {
        CLI::App* sub = app.add_subcommand(spec.name, spec.description);
        sub->add_option("--config", config_path, "key = value configuration file");
        sub->add_option("-o,--output", output_path, "CSV destination (default: standard output)");
        auto add_key = [&](const std::string& key, const std::string& help) {
            sub->add_option_function<std::string>(
                "--" + key, [&flags, key](const std::string& v) { flags[key] = v; }, help);
        };
        for (const auto& base : spec.physical) {
            for (const auto& key : kUnitKeys.at(base)) add_key(key, kPhysicalDefaults.at(base).help);
        }
        for (const auto& k : spec.keys) add_key(k.name, k.help + " [default " + k.default_value + "]");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        const std::string command = app.get_subcommands().front()->get_name();
        std::map<std::string, std::string> file_values;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ValidationError("cannot read config file '" + config_path + "'");
            std::stringstream buf;
            buf << in.rdbuf();
            file_values = parse_config_text(buf.str());
        }
        const RunConfig cfg = resolve_config(command, file_values, flags);
        const CommandOutput result = run_command(cfg);
        if (output_path.empty()) {
            write_csv(out, result.table);
        } else {
            std::ofstream file(output_path, std::ios::binary);
            if (!file) throw ValidationError("cannot write '" + output_path + "'");
            write_csv(file, result.table);
        }
        err << result.summary << '\n';
        return 0;
    } catch (const ContractError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace qprobe::cli
