#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace urban2vec {

// Rows of an embedding matrix keyed by textual ids (neighborhood ids,
// street-view ids or tokens).
struct EmbeddingTable {
  std::vector<std::string> ids;
  Eigen::MatrixXd values;
};

inline constexpr char kEmbeddingMagic[8] = {'G', 'V', 'E', 'M', 'B', '0', '0', '1'};

// GVEMB001: magic, u32 rows, u32 d, row-major little-endian float32. The id
// list goes to the sidecar path + ".ids", one per line.
void write_embedding(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable read_embedding(const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& path);

// id TAB v1 ... vd, shortest round-trip formatting of the float32 values.
void write_embedding_tsv(const std::filesystem::path& path, const EmbeddingTable& table);

// Rounds through float32, the precision checkpoints store.
Eigen::MatrixXd quantize_to_float(const Eigen::MatrixXd& values);

}  // namespace urban2vec
