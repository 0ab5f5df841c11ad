#ifndef HARDCL_COMMANDS_HPP
#define HARDCL_COMMANDS_HPP

#include <cstdint>
#include <optional>
#include <string>

namespace hardcl {

struct CommandOptions {
    std::string config_path; // empty: built-in defaults
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed; // overrides every config seed
    int threads = 1;
};

// Exit codes: 0 success, 1 check failure, 2 input/config error,
// 3 numerical abort. Input and numerical failures are reported by
// throwing; the returned code distinguishes success from check failure.
int cmd_verify(const CommandOptions& opt);
int cmd_train(const CommandOptions& opt);
int cmd_compare(const CommandOptions& opt);
int cmd_make_data(const CommandOptions& opt);

} // namespace hardcl

#endif
