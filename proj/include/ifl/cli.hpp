// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit codes are a stable contract:
//   0 success, 1 property/assertion failure, 2 invalid input, 3 IO error.
#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ifl {
struct TrainingTrajectory;
}

namespace ifl::cli {

int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args); ///< args without the program name

/// Single-trajectory analysis shared by `train` summaries and the
/// `analyze` command: stability metrics, rho endpoints and monotonicity
/// flags, quartile Dice-loss comparison, first-decile gradient cosine.
nlohmann::json analyze_trajectory(const TrainingTrajectory& traj);

} // namespace ifl::cli
