#include "urban2vec/embedding_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "text_util.hpp"
#include "urban2vec/error.hpp"

namespace urban2vec {

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto out = path;
  out += ".ids";
  return out;
}

Eigen::MatrixXd quantize_to_float(const Eigen::MatrixXd& values) {
  return values.cast<float>().cast<double>();
}

void write_embedding(const std::filesystem::path& path, const EmbeddingTable& table) {
  require(static_cast<Eigen::Index>(table.ids.size()) == table.values.rows(),
          ErrorKind::kInvalidInput, "write_embedding: ids do not match rows");
  require(table.values.allFinite(), ErrorKind::kInvalidInput, "write_embedding: non-finite values");
  require(table.values.rows() <= std::numeric_limits<std::uint32_t>::max() &&
              table.values.cols() <= std::numeric_limits<std::uint32_t>::max(),
          ErrorKind::kInvalidInput, "write_embedding: matrix too large");
  for (const auto& id : table.ids) {
    require(id.find('\n') == std::string::npos && !id.empty(), ErrorKind::kInvalidInput,
            "write_embedding: ids must be non-empty single-line strings");
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(kEmbeddingMagic, sizeof(kEmbeddingMagic));
  detail::write_u32(out, static_cast<std::uint32_t>(table.values.rows()));
  detail::write_u32(out, static_cast<std::uint32_t>(table.values.cols()));
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      detail::write_f32(out, static_cast<float>(table.values(r, c)));
    }
  }
  if (!out) fail(ErrorKind::kIo, "error writing " + path.string());

  std::ofstream ids(sidecar_path(path), std::ios::trunc);
  if (!ids) fail(ErrorKind::kIo, "cannot write " + sidecar_path(path).string());
  for (const auto& id : table.ids) ids << id << '\n';
  if (!ids) fail(ErrorKind::kIo, "error writing " + sidecar_path(path).string());
}

EmbeddingTable read_embedding(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  char magic[sizeof(kEmbeddingMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kEmbeddingMagic, sizeof(magic)) != 0) {
    fail(ErrorKind::kFormat, path.string() + ": not a GVEMB001 checkpoint");
  }
  const std::uint32_t rows = detail::read_u32(in);
  const std::uint32_t dim = detail::read_u32(in);
  if (!in) fail(ErrorKind::kFormat, path.string() + ": truncated header");

  EmbeddingTable table;
  table.values.resize(rows, dim);
  std::vector<float> buffer(dim);
  for (std::uint32_t r = 0; r < rows; ++r) {
    in.read(reinterpret_cast<char*>(buffer.data()),
            static_cast<std::streamsize>(buffer.size() * sizeof(float)));
    if (!in) fail(ErrorKind::kFormat, path.string() + ": truncated at row " + std::to_string(r));
    for (std::uint32_t c = 0; c < dim; ++c) table.values(r, c) = buffer[c];
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    fail(ErrorKind::kFormat, path.string() + ": trailing bytes after matrix");
  }

  std::ifstream ids(sidecar_path(path));
  if (!ids) fail(ErrorKind::kIo, "cannot read " + sidecar_path(path).string());
  std::string line;
  while (std::getline(ids, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    table.ids.push_back(line);
  }
  if (table.ids.size() != rows) {
    fail(ErrorKind::kFormat, sidecar_path(path).string() + ": expected " + std::to_string(rows) +
                                 " ids, found " + std::to_string(table.ids.size()));
  }
  return table;
}

void write_embedding_tsv(const std::filesystem::path& path, const EmbeddingTable& table) {
  require(static_cast<Eigen::Index>(table.ids.size()) == table.values.rows(),
          ErrorKind::kInvalidInput, "write_embedding_tsv: ids do not match rows");
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    out << table.ids[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      out << '\t' << detail::format_number(static_cast<float>(table.values(r, c)));
    }
    out << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "error writing " + path.string());
}

}  // namespace urban2vec
