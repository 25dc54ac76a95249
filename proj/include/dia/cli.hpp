/*
 * Copyright 2026 The dianet Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Command-line front end: train | eval | params | gradcheck | analyze | sweep.
//
// Exit codes: 0 success, 1 failed check, 2 configuration or usage error,
// 3 numerical explosion, 4 I/O error.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dia/backbone.hpp"

namespace dia::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitExplosion = 3;
inline constexpr int kExitIo = 4;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Closed-form attention weights (biases omitted) of one stage: cells*10N^2/r
/// for DIA-LSTM, 8N^2 for the standard LSTM, blocks*2N^2/r for SE, 0 without
/// attention. nullopt when r does not divide N.
std::optional<std::size_t> expected_stage_attention(const NetworkConfig& config, std::size_t stage);

/// The `params` table.
std::string params_table(const NetworkConfig& config, bool* all_match = nullptr);

}  // namespace dia::cli
