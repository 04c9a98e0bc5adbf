#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bsda::cli {

/// Process exit codes, one per error family.
enum Exit : int {
  kOk = 0,
  kUsage = 1,
  kIo = 2,
  kBadMask = 3,
  kConfig = 4,
  kCheckpoint = 5,
  kVerification = 6,
};

/// Runs the `bsda` command line with args excluding the program name.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace bsda::cli
