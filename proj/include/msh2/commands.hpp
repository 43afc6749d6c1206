#pragma once

#include "msh2/problem.hpp"

#include <functional>
#include <iosfwd>

namespace msh2 {

// Exit codes: 0 ok, 1 numeric failure, 2 input error, 3 infeasible.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNumeric = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitInfeasible = 3;

struct CommandOptions {
    bool json_output = false;
    std::string out_path;
    std::optional<std::uint64_t> seed;
    int threads = 1;
};

std::string format12(double v);

int cmd_validate(const std::string& problem_path, const CommandOptions& opts, std::ostream& os);
int cmd_synthesize(const std::string& problem_path, const CommandOptions& opts, std::ostream& os);
int cmd_analyze(const std::string& problem_path, const std::string& controller_path,
                const CommandOptions& opts, std::ostream& os);
int cmd_simulate(const std::string& problem_path, const std::string& controller_path,
                 const CommandOptions& opts, std::ostream& os);
int cmd_sweep(const std::string& problem_path, const CommandOptions& opts, std::ostream& os);

/// Maps exceptions to exit codes (input 2, infeasible 3, numeric 1).
int run_guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace msh2
