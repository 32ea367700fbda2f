#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "vsr/tensor.hpp"

namespace vsr {

// VSRT record layout (all integers little-endian):
//   "VSRT" | u8 version=1 | u8 dtype (0=f32, 1=f64) | u8 ndim (1..6) | ndim x u32 extents | payload
inline constexpr std::uint8_t kTensorFormatVersion = 1;
inline constexpr int kMaxTensorDims = 6;

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Checkpoint: u32 count, then count x (u16 name length | UTF-8 name | VSRT record).
void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

}  // namespace vsr
