#pragma once

#include <iostream>

namespace funrl::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kServiceError = 3, kNumericError = 4 };

/// Evaluator bearer token for `clean` against an HTTP evaluator.
inline constexpr const char* kAuthTokenEnv = "FUNRL_EVALUATOR_TOKEN";

int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace funrl::cli
