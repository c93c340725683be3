#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace qprobe::cli {

/// Numeric table written as CSV: '#' comment lines, one header row, then
/// rows rendered with 17 significant digits.
struct CsvTable {
    std::vector<std::string> comments;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    void add_row(std::vector<double> row);
};

std::string format_number(double x);
void write_csv(std::ostream& out, const CsvTable& table);
CsvTable read_csv(std::istream& in);

/// Resolved key = value settings for one command.
class RunConfig {
public:
    RunConfig(std::string command, std::map<std::string, std::string> values)
        : command_(std::move(command)), values_(std::move(values)) {}

    const std::string& command() const { return command_; }
    const std::map<std::string, std::string>& values() const { return values_; }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::string text(const std::string& key) const;
    double number(const std::string& key) const;
    std::size_t count(const std::string& key) const;
    std::vector<std::size_t> count_list(const std::string& key) const;
    /// A rate or energy in fs^-1 from whichever of base_ev / base_ifs is set
    /// (g also accepts g_ratio, a multiple of gamma_e).
    double rate(const std::string& base) const;

private:
    std::string command_;
    std::map<std::string, std::string> values_;
};

/// Flat key = value text with '#' comments.
std::map<std::string, std::string> parse_config_text(const std::string& text);

/// Merges defaults, file values and flag values (later wins) for a command
/// and checks that every key is known and each physical quantity is given in
/// exactly one unit.
RunConfig resolve_config(const std::string& command, const std::map<std::string, std::string>& file_values,
                         const std::map<std::string, std::string>& flag_values);

struct CommandOutput {
    CsvTable table;
    std::string summary;
};

CommandOutput run_command(const RunConfig& cfg);

std::vector<std::string> command_names();

/// Full command-line entry point; returns the process exit code
/// (0 success, 1 numerical failure, 2 configuration or contract violation).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qprobe::cli
