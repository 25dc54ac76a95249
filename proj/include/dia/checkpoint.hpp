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

// Versioned binary container for model state and captured traces.
//
//   "DIA1"                              4-byte magic
//   u32 entry_count
//   manifest, entry_count times:
//     u32 id_length, id bytes (UTF-8)
//     u8  dtype (0 = f64, 1 = f32, 2 = u8)
//     u32 rank, rank x u64 extents
//   payloads in manifest order, raw little-endian
//
// All integers are little-endian.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dia/backbone.hpp"
#include "dia/tensor.hpp"

namespace dia {

enum class DType : std::uint8_t { F64 = 0, F32 = 1, U8 = 2 };

struct CheckpointEntry {
  std::string id;
  DType dtype = DType::F64;
  Shape shape;
  std::vector<double> values;  // F64 / F32 payloads
  std::string bytes;           // U8 payload
};

class Checkpoint {
 public:
  void add_tensor(const std::string& id, const Tensor& t, DType dtype = DType::F64);
  void add_values(const std::string& id, Shape shape, std::vector<double> values,
                  DType dtype = DType::F64);
  void add_text(const std::string& id, const std::string& text);

  const CheckpointEntry* find(const std::string& id) const;
  const CheckpointEntry& at(const std::string& id) const;
  std::string text(const std::string& id) const;
  const std::vector<CheckpointEntry>& entries() const { return entries_; }

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

 private:
  std::vector<CheckpointEntry> entries_;
};

/// Parameters and buffers of a network, keyed by their ids.
void write_model_state(const Network& net, Checkpoint& ckpt);
/// Copies matching entries into the network; every parameter and buffer must
/// be present with the same shape.
void read_model_state(const Checkpoint& ckpt, Network& net);

}  // namespace dia
