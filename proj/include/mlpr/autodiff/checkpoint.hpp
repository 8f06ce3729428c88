#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mlpr/autodiff/parameter.hpp"
#include "mlpr/autodiff/tensor.hpp"

namespace mlpr::ad {

// Binary checkpoint, little-endian:
//   "MLPR" | version u32 | count u32 |
//   count x (name_len u16 | name | rank u8 | dims u64[rank] | data f64[...])
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

std::vector<char> encode_checkpoint(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_checkpoint(const std::vector<char>& bytes);

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

// Snapshot of every parameter and buffer in store order.
std::vector<NamedTensor> snapshot(const ParameterStore& store);
// Copies values by name. Every stored parameter must be present with a
// matching shape; extra checkpoint entries are returned to the caller.
std::vector<NamedTensor> restore(ParameterStore& store, const std::vector<NamedTensor>& tensors);

}  // namespace mlpr::ad
