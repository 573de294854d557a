#pragma once

#include "pdhg/types.hpp"

#include <filesystem>
#include <stdexcept>

namespace pdhg::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix Market coordinate files (real, general or symmetric).
SpMat read_matrix_market(const std::filesystem::path& path);
void write_matrix_market(const std::filesystem::path& path, const SpMat& matrix);

/// Whitespace-separated rows, one matrix row per line. Blank lines and lines
/// starting with '#' are skipped. All rows must have the same width.
Mat read_dense_text(const std::filesystem::path& path);
void write_dense_text(const std::filesystem::path& path, const Mat& matrix);

/// NumPy .npy (format 1.0/2.0, little-endian float64, 1-D or 2-D, either order).
Mat read_npy(const std::filesystem::path& path);
/// Writes row-major ('<f8', fortran_order False).
void write_npy(const std::filesystem::path& path, const Mat& matrix);

/// Dispatches on extension: .npy, .mtx, anything else as dense text.
Mat read_matrix(const std::filesystem::path& path);

}  // namespace pdhg::io
