#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace h0meta {

/// Entry point of the h0meta command line tool. `args` excludes the program name.
///
///   fit <dataset> [--config FILE] [--out DIR] [--seed N] [--error-model M]
///                 [--h0-update K] [--conservative-se]
///   simulate [--spec FILE] [--out DIR] [--seed N]
///   ppc <dataset> <chains-dir> [--error-model M] [--seed N] [--max-draws N]
///   summarize <chains-dir>
///
/// Returns 0 iff every requested artifact was written.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace h0meta
