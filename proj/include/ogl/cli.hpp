#pragma once

namespace ogl::cli {

/// Exit codes: 0 success, 1 invalid input, 2 numerical failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitNumerical = 2;

/// Entry point of the `ogl` command-line tool.
int dispatch(int argc, char** argv);

}  // namespace ogl::cli
