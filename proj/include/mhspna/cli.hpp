#pragma once

#include <string>
#include <vector>

namespace mhspna::cli {

/// Runs the `mhspna` command line. Returns 0 on success, 1 on bad data and
/// 2 on I/O or usage errors.
int run(int argc, char** argv);
int run(std::vector<std::string> args);

}  // namespace mhspna::cli
