#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace wafertex {

struct CommandArgs {
    std::string name;  // gen | enhance | muse | fuse | eval-seg | eval-det | gradcheck | count
    std::filesystem::path config;              // optional key=value file
    std::vector<std::string> overrides;        // "key=value", applied after the file
    std::filesystem::path out_dir;
    std::vector<std::filesystem::path> inputs;
    std::size_t threads = 1;
};

// Runs one subcommand; results go to files under out_dir only. Throws
// std::invalid_argument / std::domain_error on bad input and IoError on
// file-system or format failures.
void run_command(const CommandArgs& args);

// 0 success, 1 validation failure, 2 I/O failure.
int exit_code_for_current_exception() noexcept;

}  // namespace wafertex
