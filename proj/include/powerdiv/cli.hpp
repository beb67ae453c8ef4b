#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "powerdiv/case_io.hpp"
#include "powerdiv/error.hpp"

namespace powerdiv::cli {

enum class OutputFormat { Table, Csv, Json };

/// Parsed command line. Exactly one subcommand is set.
struct RunConfig {
    std::string case_path;
    CaseFormat format = CaseFormat::Native;
    std::string subcommand;
    OutputFormat output = OutputFormat::Table;
    std::string output_path;  // empty: stdout
    std::uint64_t seed = 1;
    std::optional<double> base_mva;  // display conversion only

    // sensitivity / divider / allocate
    std::string line;  // "m,n" in file bus numbering
    bool all = false;  // sensitivity --all, allocate --all-lines
    bool table = false;
    std::string tier = "exact";
    std::string target = "p";

    // inject-fit
    std::string targets_path;
    std::string loss_model = "lossy";
    bool verify = false;

    // experiment
    int trials = 5000;
    int bins = 50;
    unsigned threads = 1;
};

/// 0 ok, 2 usage, 3 parse, 4 convergence, 5 refused analysis, 6 rank/singularity, 7 i/o.
int exit_code(ErrorKind kind);

/// Runs one subcommand, writing the report to `out` (or the configured file).
/// Throws powerdiv::Error.
void dispatch(const RunConfig& config, std::ostream& out);

/// Parses argv, dispatches and maps failures to exit codes. Diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace powerdiv::cli
