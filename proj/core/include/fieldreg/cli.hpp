#pragma once

#include <string>
#include <vector>

namespace fieldreg::cli {

/// Batch front-end. Subcommands: simulate-field, estimate, eta,
/// check-condition, clt-study, bias-study, denoise.
/// Exit codes: 0 success, 1 I/O failure, 2 usage or numeric violation.
/// Errors go to stderr prefixed "error:".
int run(const std::vector<std::string>& args);

}  // namespace fieldreg::cli
