#pragma once

// Reader/writer for the NumPy .npy array format (version 1.0 written,
// 1.0-3.0 read). Only little-endian float32/float64 C-order arrays are
// supported; float32 is widened to double on load.

#include "sigmalr/tensor.hpp"

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace sigmalr {

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct NpyArray {
  std::vector<Index> shape;
  std::vector<double> data;  // row-major
  std::string dtype;         // "<f4" or "<f8" as found in the file

  Index numel() const;
};

NpyArray read_npy(const std::filesystem::path& path);
NpyArray parse_npy(const std::string& bytes);

/// Writes float64 data; data.size() must equal the product of `shape`.
void write_npy(const std::filesystem::path& path, const std::vector<Index>& shape, std::span<const double> data);
std::string serialize_npy(const std::vector<Index>& shape, std::span<const double> data);

using TensorValue = std::variant<Tensor4, Mat>;

/// 4-D files load as Tensor4, 2-D files as Mat.
TensorValue read_tensor(const std::filesystem::path& path);
Tensor4 read_tensor4(const std::filesystem::path& path);
Mat read_matrix(const std::filesystem::path& path);

void write_tensor(const std::filesystem::path& path, const Tensor4& t);
void write_tensor(const std::filesystem::path& path, const Mat& m);
void write_tensor(const std::filesystem::path& path, const TensorValue& v);

}  // namespace sigmalr
