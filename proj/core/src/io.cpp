#include "pdhg/io.hpp"

#include <unsupported/Eigen/SparseExtra>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

namespace pdhg::io {

SpMat read_matrix_market(const std::filesystem::path& path) {
  int sym = 0;
  bool is_complex = false;
  bool is_vector = false;
  if (!std::filesystem::exists(path) ||
      !Eigen::getMarketHeader(path.string(), sym, is_complex, is_vector)) {
    throw IoError("cannot read Matrix Market header: " + path.string());
  }
  {
    // Eigen's loader silently misreads the dense "array" format.
    std::ifstream in(path);
    std::string banner;
    std::getline(in, banner);
    if (banner.find("coordinate") == std::string::npos) {
      throw IoError("only coordinate Matrix Market files are supported: " + path.string());
    }
  }
  if (is_complex) throw IoError("complex Matrix Market files are not supported: " + path.string());

  Eigen::SparseMatrix<double> m;
  if (!Eigen::loadMarket(m, path.string())) {
    throw IoError("malformed Matrix Market file: " + path.string());
  }
  if (sym != 0) {
    // Only one triangle is stored; mirror the strictly off-diagonal part.
    Eigen::SparseMatrix<double> strict = m.triangularView<Eigen::StrictlyLower>();
    Eigen::SparseMatrix<double> full = m + Eigen::SparseMatrix<double>(strict.transpose());
    m = full;
  }
  return SpMat(m);
}

void write_matrix_market(const std::filesystem::path& path, const SpMat& matrix) {
  const Eigen::SparseMatrix<double> colmajor(matrix);
  if (!Eigen::saveMarket(colmajor, path.string())) {
    throw IoError("cannot write Matrix Market file: " + path.string());
  }
}

Mat read_dense_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw IoError("non-numeric token '" + tok + "' in " + path.string());
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError("ragged rows in " + path.string());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty()) throw IoError("empty matrix in " + path.string());
  Mat m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

void write_dense_text(const std::filesystem::path& path, const Mat& matrix) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  for (Index r = 0; r < matrix.rows(); ++r) {
    for (Index c = 0; c < matrix.cols(); ++c) {
      if (c) out << ' ';
      out << matrix(r, c);
    }
    out << '\n';
  }
}

namespace {

constexpr char kNpyMagic[] = "\x93NUMPY";

bool host_is_little_endian() {
  const std::uint16_t probe = 1;
  unsigned char b = 0;
  std::memcpy(&b, &probe, 1);
  return b == 1;
}

}  // namespace

Mat read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kNpyMagic, 6) != 0) throw IoError("not an .npy file: " + path.string());
  unsigned char version[2];
  in.read(reinterpret_cast<char*>(version), 2);
  std::uint32_t header_len = 0;
  if (version[0] == 1) {
    unsigned char len[2];
    in.read(reinterpret_cast<char*>(len), 2);
    header_len = len[0] | (len[1] << 8);
  } else if (version[0] == 2 || version[0] == 3) {
    unsigned char len[4];
    in.read(reinterpret_cast<char*>(len), 4);
    header_len = len[0] | (len[1] << 8) | (len[2] << 16) | (static_cast<std::uint32_t>(len[3]) << 24);
  } else {
    throw IoError("unsupported .npy version in " + path.string());
  }
  std::string header(header_len, '\0');
  in.read(header.data(), header_len);
  if (!in) throw IoError("truncated .npy header in " + path.string());

  std::smatch m;
  if (!std::regex_search(header, m, std::regex(R"('descr'\s*:\s*'([^']*)')")) || m[1] != "<f8") {
    throw IoError("only little-endian float64 .npy arrays are supported: " + path.string());
  }
  const bool fortran =
      std::regex_search(header, m, std::regex(R"('fortran_order'\s*:\s*(True|False))")) && m[1] == "True";
  if (!std::regex_search(header, m, std::regex(R"('shape'\s*:\s*\(([^)]*)\))"))) {
    throw IoError("missing shape in .npy header: " + path.string());
  }
  std::vector<Index> shape;
  {
    std::string dims = m[1];
    std::regex num(R"(\d+)");
    for (auto it = std::sregex_iterator(dims.begin(), dims.end(), num); it != std::sregex_iterator(); ++it) {
      shape.push_back(std::stoll(it->str()));
    }
  }
  if (shape.empty() || shape.size() > 2) throw IoError(".npy array must be 1-D or 2-D: " + path.string());
  const Index rows = shape[0];
  const Index cols = shape.size() == 2 ? shape[1] : 1;

  std::vector<double> data(static_cast<std::size_t>(rows * cols));
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!in) throw IoError("truncated .npy payload in " + path.string());
  if (!host_is_little_endian()) throw IoError("big-endian hosts are not supported");

  Mat out(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      out(r, c) = fortran ? data[c * rows + r] : data[r * cols + c];
    }
  }
  return out;
}

void write_npy(const std::filesystem::path& path, const Mat& matrix) {
  if (!host_is_little_endian()) throw IoError("big-endian hosts are not supported");
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" +
                       std::to_string(matrix.rows()) + ", " + std::to_string(matrix.cols()) + "), }";
  // Magic (6) + version (2) + length (2) + header + '\n' must be 64-byte aligned.
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kNpyMagic, 6);
  const char version[2] = {1, 0};
  out.write(version, 2);
  const auto len = static_cast<std::uint16_t>(header.size());
  const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
  out.write(len_bytes, 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (Index r = 0; r < matrix.rows(); ++r) {
    for (Index c = 0; c < matrix.cols(); ++c) {
      const double v = matrix(r, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
}

Mat read_matrix(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".npy") return read_npy(path);
  if (ext == ".mtx") return Mat(read_matrix_market(path));
  return read_dense_text(path);
}

}  // namespace pdhg::io
