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

#include "dia/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dia/errors.hpp"

namespace dia {

namespace {

constexpr char kMagic[4] = {'D', 'I', 'A', '1'};

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get_le() {
    need(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw IoError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::size_t element_size(DType d) {
  switch (d) {
    case DType::F64: return 8;
    case DType::F32: return 4;
    case DType::U8: return 1;
  }
  return 0;
}

}  // namespace

void Checkpoint::add_tensor(const std::string& id, const Tensor& t, DType dtype) {
  add_values(id, t.shape(), std::vector<double>(t.data().begin(), t.data().end()), dtype);
}

void Checkpoint::add_values(const std::string& id, Shape shape, std::vector<double> values, DType dtype) {
  if (dtype == DType::U8) throw UsageError("add_values: use add_text for byte payloads");
  if (values.size() != shape_numel(shape)) {
    throw ShapeError("checkpoint entry " + id + ": " + std::to_string(values.size()) +
                     " values for shape " + shape_to_string(shape));
  }
  if (find(id)) throw UsageError("duplicate checkpoint id " + id);
  entries_.push_back({id, dtype, std::move(shape), std::move(values), {}});
}

void Checkpoint::add_text(const std::string& id, const std::string& text) {
  if (find(id)) throw UsageError("duplicate checkpoint id " + id);
  entries_.push_back({id, DType::U8, {text.size()}, {}, text});
}

const CheckpointEntry* Checkpoint::find(const std::string& id) const {
  for (const auto& e : entries_) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

const CheckpointEntry& Checkpoint::at(const std::string& id) const {
  const auto* e = find(id);
  if (!e) throw IoError("checkpoint has no entry " + id);
  return *e;
}

std::string Checkpoint::text(const std::string& id) const {
  const auto& e = at(id);
  if (e.dtype != DType::U8) throw IoError("checkpoint entry " + id + " is not text");
  return e.bytes;
}

std::string Checkpoint::serialize() const {
  std::string out(kMagic, kMagic + 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.id.size()));
    out += e.id;
    out.push_back(static_cast<char>(e.dtype));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
    for (auto extent : e.shape) put_le<std::uint64_t>(out, extent);
  }
  for (const auto& e : entries_) {
    switch (e.dtype) {
      case DType::F64:
        for (double v : e.values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
        break;
      case DType::F32:
        for (double v : e.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        break;
      case DType::U8: out += e.bytes; break;
    }
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  Reader in(bytes);
  if (in.get_bytes(4) != std::string(kMagic, kMagic + 4)) throw IoError("not a DIA1 checkpoint (bad magic)");
  const auto count = in.get_le<std::uint32_t>();
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.id = in.get_bytes(in.get_le<std::uint32_t>());
    const auto dtype = in.get_le<std::uint8_t>();
    if (dtype > 2) throw IoError("checkpoint entry " + e.id + ": unknown dtype " + std::to_string(dtype));
    e.dtype = static_cast<DType>(dtype);
    const auto rank = in.get_le<std::uint32_t>();
    for (std::uint32_t r = 0; r < rank; ++r) e.shape.push_back(in.get_le<std::uint64_t>());
    ckpt.entries_.push_back(std::move(e));
  }
  for (auto& e : ckpt.entries_) {
    const std::size_t n = shape_numel(e.shape);
    switch (e.dtype) {
      case DType::F64:
        e.values.resize(n);
        for (auto& v : e.values) v = std::bit_cast<double>(in.get_le<std::uint64_t>());
        break;
      case DType::F32:
        e.values.resize(n);
        for (auto& v : e.values) v = std::bit_cast<float>(in.get_le<std::uint32_t>());
        break;
      case DType::U8: e.bytes = in.get_bytes(n * element_size(e.dtype)); break;
    }
  }
  if (!in.at_end()) throw IoError("checkpoint has trailing bytes");
  return ckpt;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

void write_model_state(const Network& net, Checkpoint& ckpt) {
  for (const auto& p : net.parameters()) ckpt.add_tensor("param." + p.id, p.value);
  for (const auto& b : net.buffers()) ckpt.add_tensor("buffer." + b.id, b.value);
}

void read_model_state(const Checkpoint& ckpt, Network& net) {
  const auto copy = [&](const std::string& id, Tensor t) {
    const auto& e = ckpt.at(id);
    if (e.shape != t.shape()) {
      throw IoError("checkpoint entry " + id + " has shape " + shape_to_string(e.shape) +
                    ", model expects " + shape_to_string(t.shape()));
    }
    std::copy(e.values.begin(), e.values.end(), t.data().begin());
  };
  for (const auto& p : net.parameters()) copy("param." + p.id, p.value);
  for (const auto& b : net.buffers()) copy("buffer." + b.id, b.value);
}

}  // namespace dia
