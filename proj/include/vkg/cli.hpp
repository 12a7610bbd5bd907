// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver. Every subcommand writes into --run-dir: the resolved
// config (config.json), a manifest with the input corpus hash, and its
// reports. Reports carry no timestamps so reruns are byte-identical.
#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>

namespace vkg::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,     // unknown command or bad flags
  kConfig = 2,    // config parse or validation failure
  kIo = 3,        // unreadable input, unwritable output, malformed file
  kData = 4,      // data or model invariant violation (includes failed gradcheck)
  kInternal = 5,  // anything else
};

// (prefix_length n, clip_length k) rows of the projector ablation.
inline constexpr std::array<std::pair<std::size_t, std::size_t>, 4> kProjectorGrid{
    {{64, 64}, {128, 64}, {64, 128}, {128, 128}}};

// Generation budgets of the length ablation.
inline constexpr std::array<std::size_t, 4> kLengthBudgets{200, 256, 300, 512};

// Hash git assigns to a blob with this content: sha1("blob <len>\0" + content).
std::string git_blob_sha1(std::string_view content);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vkg::cli
