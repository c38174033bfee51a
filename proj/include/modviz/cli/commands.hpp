#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "modviz/common/errors.hpp"
#include "modviz/common/kv_text.hpp"

namespace modviz::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,       // bad flags, config values or indices
  kExitIo = 3,          // unreadable/unwritable files, corrupt containers
  kExitDivergence = 4,  // non-finite loss or objective
  kExitMismatch = 5,    // explanation method does not fit the model
};

/// Missing or inconsistent configuration; maps to exit 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Explanation method incompatible with the checkpoint; maps to exit 5.
class MismatchError : public Error {
 public:
  using Error::Error;
};

/// Subcommands that can be driven from a resolved config.
const std::vector<std::string>& command_names();

/// Runs one subcommand from its fully resolved configuration, writing its
/// run manifest next to the primary output and a key: value summary to
/// `out`. Throws the toolkit's exceptions; see exit_code_for.
void run_command(const std::string& command, const KeyValues& cfg, std::ostream& out, std::ostream& err);

/// Path of the run manifest for a primary output path.
std::string run_manifest_path(const std::string& primary_output);

/// Exit code for an exception thrown by run_command.
int exit_code_for(const std::exception& e);

/// Full command line entry point (argv[0] is ignored).
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace modviz::cli
