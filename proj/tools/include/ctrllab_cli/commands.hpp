#pragma once

#include "ctrllab_cli/config.hpp"

#include "ctrllab/control.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace ctrllab::cli {

struct CommandOptions {
    int threads = 1;
    std::string out_dir; // overrides the configured output_dir when set
};

// Files written by a command, each with a JSON sidecar.
struct CommandResult {
    std::vector<std::string> files;
    nlohmann::json summary;
};

const std::vector<std::string>& command_names();

CommandResult cmd_spectrum(const RunConfig& c, const CommandOptions& o);
CommandResult cmd_minimal_time(const RunConfig& c, const CommandOptions& o);
CommandResult cmd_gram_scan(const RunConfig& c, const CommandOptions& o);
CommandResult cmd_control(const RunConfig& c, const CommandOptions& o);
CommandResult cmd_simulate(const RunConfig& c, const CommandOptions& o);
CommandResult cmd_observability(const RunConfig& c, const CommandOptions& o);
CommandResult run_command(const std::string& name, const RunConfig& c, const CommandOptions& o);

// Write through a temporary file in the same directory, then rename.
void write_atomic(const std::string& path, const std::string& content);

nlohmann::json control_to_json(const ControlSignal& u);
// Samples from the CSV; metadata and the exp-sum from the sidecar when it exists.
ControlSignal load_control(const std::string& csv_path);

// Map an exception to an exit status and a one-line diagnostic.
int report_error(std::ostream& err, const std::exception& e);

} // namespace ctrllab::cli
