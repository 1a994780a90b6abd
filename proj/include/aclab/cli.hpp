#pragma once

namespace aclab {

/// Exit codes: 0 success, 1 invalid input or usage, 2 stability or assumption failure.
int cli_main(int argc, char** argv);

}  // namespace aclab
