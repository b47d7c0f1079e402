// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace mcdn::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kDataError = 3,
  kCheckpointError = 4,
  kGradcheckFailed = 5,
};

/// Entry point for the `mcdn` tool: train, eval, predict, segment, gradcheck.
/// Diagnostics go to `err`; results without an --output path go to `out`.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace mcdn::cli
