#pragma once

namespace elstm::cli {

enum ExitCode : int {
  kSuccess = 0,
  kValidationFailure = 1,
  kNumericFailure = 2,
  kAcceptanceFailure = 3,
};

// Parses arguments, runs the selected verb and maps errors to exit codes.
int run(int argc, char** argv);

}  // namespace elstm::cli
