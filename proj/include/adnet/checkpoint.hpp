#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "adnet/tensor.hpp"

namespace adnet {

// Ordered collection of named tensors; order is preserved on disk.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Binary tensor blob, little-endian:
//   magic "ADNETCK1" (8 bytes), version u32, tensor count u32, then per
//   tensor: name length u16, UTF-8 name, rank u8, dims u64 each, values f64
//   each. Values round-trip bit-exactly.
void write_tensor_blob(std::ostream& os, const NamedTensors& tensors);
NamedTensors read_tensor_blob(std::istream& is);

void write_tensor_file(const std::string& path, const NamedTensors& tensors);
NamedTensors read_tensor_file(const std::string& path);

const Tensor* find_tensor(const NamedTensors& tensors, const std::string& name);

}  // namespace adnet
