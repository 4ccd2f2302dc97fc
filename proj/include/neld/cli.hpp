#pragma once

#include <ostream>
#include <string>

#include "neld/config.hpp"

namespace neld {

enum ExitCode : int { kExitOk = 0, kExitVerifyFailed = 1, kExitUsage = 2, kExitBlowup = 3 };

int cmd_run(const RunConfig& cfg, unsigned threads, std::ostream& out, std::ostream& err);
int cmd_verify(const std::string& suite, unsigned threads, std::ostream& out, std::ostream& err);
/// Reads summary.tsv and profile.tsv from `dir`; writes report.tsv and
/// report_long.tsv to `out_dir` (defaults to `dir`).
int cmd_report(const std::string& dir, const std::string& out_dir, std::ostream& out, std::ostream& err);

/// Full command line: `neld run|verify|report ...`.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace neld
