#include "pouf/embedding_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pouf/errors.hpp"

namespace pouf::io {
namespace {

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    out.push_back(static_cast<char>((value >> (8 * b)) & 0xFF));
  }
}

template <typename T>
T get_le(std::string_view bytes, std::size_t offset) {
  T value = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    value |= static_cast<T>(static_cast<unsigned char>(bytes[offset + b])) << (8 * b);
  }
  return value;
}

void need(std::string_view bytes, std::size_t offset, std::size_t n, const char* field) {
  if (bytes.size() < offset + n) {
    throw ParseError(std::string("truncated header: missing ") + field + " at byte " +
                         std::to_string(offset) + " (file has " + std::to_string(bytes.size()) +
                         " bytes)",
                     offset);
  }
}

}  // namespace

std::string encode_embeddings(const Eigen::Ref<const RowMatrixXf>& matrix) {
  if (!matrix.allFinite()) throw ValidationError("embeddings contain non-finite values");
  std::string out;
  out.reserve(kHeaderBytes + static_cast<std::size_t>(matrix.size()) * 4);
  out.append(kMagic, 4);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(matrix.rows()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(matrix.cols()));
  put_le<std::uint32_t>(out, kDtypeFloat32);
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(matrix(r, c)));
    }
  }
  return out;
}

EmbeddingFileHeader decode_header(std::string_view bytes) {
  need(bytes, 0, 4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ParseError("bad magic at byte 0: expected \"POUF\"", 0);
  }
  EmbeddingFileHeader h;
  need(bytes, 4, 4, "version");
  h.version = get_le<std::uint32_t>(bytes, 4);
  if (h.version != kVersion) {
    throw ParseError("unsupported version " + std::to_string(h.version) + " at byte 4", 4);
  }
  need(bytes, 8, 8, "count");
  h.count = get_le<std::uint64_t>(bytes, 8);
  need(bytes, 16, 8, "dim");
  h.dim = get_le<std::uint64_t>(bytes, 16);
  need(bytes, 24, 4, "dtype");
  h.dtype = get_le<std::uint32_t>(bytes, 24);
  if (h.dtype != kDtypeFloat32) {
    throw ParseError("unsupported dtype code " + std::to_string(h.dtype) + " at byte 24", 24);
  }
  return h;
}

RowMatrixXf decode_embeddings(std::string_view bytes) {
  const EmbeddingFileHeader h = decode_header(bytes);
  const std::uint64_t payload = bytes.size() - kHeaderBytes;
  const bool overflow = h.dim != 0 && h.count > UINT64_MAX / h.dim / 4;
  const std::uint64_t expected = overflow ? UINT64_MAX : h.count * h.dim * 4;
  if (payload != expected) {
    const char* kind = payload < expected ? "truncated payload" : "trailing bytes after payload";
    throw ParseError(std::string(kind) + " at byte " + std::to_string(kHeaderBytes) +
                         ": expected " + std::to_string(expected) + " bytes, got " +
                         std::to_string(payload),
                     payload < expected ? bytes.size() : kHeaderBytes + expected);
  }
  RowMatrixXf m(static_cast<Eigen::Index>(h.count), static_cast<Eigen::Index>(h.dim));
  std::size_t offset = kHeaderBytes;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c, offset += 4) {
      m(r, c) = std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset));
    }
  }
  return m;
}

void write_embeddings(const std::filesystem::path& path, const Eigen::Ref<const RowMatrixXf>& m) {
  write_file(path, encode_embeddings(m));
}

void write_embeddings(const std::filesystem::path& path, const Eigen::Ref<const RowMatrixXd>& m) {
  if (!m.allFinite()) throw ValidationError("embeddings contain non-finite values");
  const RowMatrixXf f = m.cast<float>();
  write_embeddings(path, f);
}

RowMatrixXf read_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(read_file(path));
}

RowMatrixXd read_embeddings_as_double(const std::filesystem::path& path) {
  return read_embeddings(path).cast<double>();
}

std::vector<int> parse_labels(std::string_view text) {
  std::vector<int> labels;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    int value = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), value);
    if (line.empty() || ec != std::errc() || ptr != line.data() + line.size()) {
      throw ParseError("labels line " + std::to_string(line_no) + ": not an integer: \"" +
                           std::string(line) + "\"",
                       line_no);
    }
    if (value < -1) {
      throw ParseError("labels line " + std::to_string(line_no) + ": label below -1", line_no);
    }
    labels.push_back(value);
  }
  return labels;
}

std::string format_labels(const std::vector<int>& labels) {
  std::string out;
  for (int y : labels) {
    out += std::to_string(y);
    out += '\n';
  }
  return out;
}

std::vector<int> read_labels(const std::filesystem::path& path) {
  return parse_labels(read_file(path));
}

void write_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
  write_file(path, format_labels(labels));
}

std::vector<std::string> read_class_names(const std::filesystem::path& path, std::size_t expected) {
  std::istringstream in(read_file(path));
  std::vector<std::string> names;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    names.push_back(line);
  }
  if (names.size() != expected) {
    throw ValidationError(path.string() + ": " + std::to_string(names.size()) +
                          " class names for " + std::to_string(expected) + " classes");
  }
  return names;
}

void write_class_names(const std::filesystem::path& path, const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) {
    out += n;
    out += '\n';
  }
  write_file(path, out);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace pouf::io
