#pragma once

// Binary embedding files:
//
//   offset  size  field
//   0       4     magic "POUF"
//   4       4     version, uint32 LE (= 1)
//   8       8     count (rows), uint64 LE
//   16      8     dim (cols), uint64 LE
//   24      4     dtype code, uint32 LE (1 = float32 LE)
//   28      ...   count * dim float32 LE values, row-major
//
// Labels are text, one integer per line, -1 for unlabeled.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pouf/types.hpp"

namespace pouf::io {

inline constexpr char kMagic[4] = {'P', 'O', 'U', 'F'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint32_t kDtypeFloat32 = 1;
inline constexpr std::size_t kHeaderBytes = 28;

struct EmbeddingFileHeader {
  std::uint32_t version = kVersion;
  std::uint64_t count = 0;
  std::uint64_t dim = 0;
  std::uint32_t dtype = kDtypeFloat32;
};

std::string encode_embeddings(const Eigen::Ref<const RowMatrixXf>& matrix);
/// Throws ParseError carrying the byte offset of the first bad field.
RowMatrixXf decode_embeddings(std::string_view bytes);
EmbeddingFileHeader decode_header(std::string_view bytes);

/// Values are rounded to float32; non-finite values are rejected.
void write_embeddings(const std::filesystem::path& path, const Eigen::Ref<const RowMatrixXd>& matrix);
void write_embeddings(const std::filesystem::path& path, const Eigen::Ref<const RowMatrixXf>& matrix);
RowMatrixXf read_embeddings(const std::filesystem::path& path);
RowMatrixXd read_embeddings_as_double(const std::filesystem::path& path);

std::vector<int> parse_labels(std::string_view text);
std::string format_labels(const std::vector<int>& labels);
std::vector<int> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<int>& labels);

/// One name per line; throws ValidationError when the count differs from `expected`.
std::vector<std::string> read_class_names(const std::filesystem::path& path, std::size_t expected);
void write_class_names(const std::filesystem::path& path, const std::vector<std::string>& names);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace pouf::io
