#pragma once

/** \file cli.hpp
 *  \brief The `bmx` command line: index, search, eval, sweep and augment.
 *
 * Exit codes: 0 success, 1 usage or configuration error, 2 data error,
 * 3 partial failure (some queries failed).
 */

#include "bmx/augmentation.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace bmx {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitPartial = 3;

struct CliContext {
    /// When set, `augment` uses this transport instead of HTTP or --stub.
    ChatTransport* transport = nullptr;
};

/// Runs one command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const CliContext& context = {});

} // namespace bmx
