#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "run_config.hpp"

namespace torifano::cli {

enum ExitCode : int {
  kOk = 0,
  kValidationFailure = 2,
  kRuntimeFailure = 3,
  kConfigError = 4,
};

struct Options {
  std::uint64_t seed = 0;
  std::optional<std::string> resume;  // snapshot path
  bool out_given = false;
};

int cmd_validate(const RunConfig& c, const Options& o, std::ostream& out);
int cmd_flow(const RunConfig& c, const Options& o, std::ostream& out);
int cmd_functionals(const RunConfig& c, const Options& o, std::ostream& out);
int cmd_transform(const RunConfig& c, const Options& o, std::ostream& out);

/// Maps a library error to an exit code.
int exit_code_for(const Error& e);
std::string describe(const Error& e);

}  // namespace torifano::cli
