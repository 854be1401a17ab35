#pragma once

#include <iosfwd>
#include <string>

#include "oetr/tensor.hpp"

// Binary tensor container shared by every file surface that carries raw
// tensors (depth maps, datasets, checkpoints).
//
// Layout, little-endian throughout:
//   bytes 0..3   magic "OETR"
//   bytes 4..5   format version, u16 (currently 1)
//   byte  6      dtype code, u8: 0 = f32, 1 = f64
//   byte  7      rank, u8
//   then rank x u64 extents, then raw row-major data.
namespace oetr::io {

inline constexpr std::uint16_t kTensorFormatVersion = 1;

enum class Dtype : std::uint8_t { f32 = 0, f64 = 1 };

void write_tensor(std::ostream& os, const Tensor<float>& t);
void write_tensor(std::ostream& os, const Tensor<double>& t);
void save_tensor(const std::string& path, const Tensor<float>& t);
void save_tensor(const std::string& path, const Tensor<double>& t);

Dtype peek_dtype(std::istream& is);  // rewinds the stream

// Reads a container of either dtype, converting to the requested type.
template <typename T>
Tensor<T> read_tensor(std::istream& is);
template <typename T>
Tensor<T> load_tensor(const std::string& path);

}  // namespace oetr::io
