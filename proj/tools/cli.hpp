#pragma once

#include <string>
#include <vector>

namespace hazesplat::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kInvariant = 3 };

// Each command takes its arguments without the program and subcommand names.
int cmd_gen(const std::vector<std::string>& args);
int cmd_haze(const std::vector<std::string>& args);
int cmd_dehaze(const std::vector<std::string>& args);
int cmd_normalize(const std::vector<std::string>& args);
int cmd_train(const std::vector<std::string>& args);
int cmd_render(const std::vector<std::string>& args);
int cmd_eval(const std::vector<std::string>& args);
int cmd_ablate(const std::vector<std::string>& args);

int run(int argc, char** argv);

}  // namespace hazesplat::cli
