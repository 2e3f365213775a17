#include "cli/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "urban2vec/error.hpp"

namespace urban2vec::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& stage_order() {
  static const std::vector<std::string> order{kStageIngest, kStageTrainSv, kStageAggregate,
                                              kStageTrainPoi};
  return order;
}

json to_json(const FileRecord& f) { return {{"path", f.path}, {"sha256", f.sha256}}; }

FileRecord file_from_json(const json& j) {
  return {j.at("path").get<std::string>(), j.at("sha256").get<std::string>()};
}

}  // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    fail(ErrorKind::kIo, "sha256: digest init failed");
  }
  std::array<char, 1 << 16> buffer;
  while (in) {
    in.read(buffer.data(), buffer.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &length);
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

fs::path Manifest::path_in(const fs::path& workspace) { return workspace / "manifest.json"; }

Manifest Manifest::load(const fs::path& workspace) {
  const auto path = path_in(workspace);
  std::ifstream in(path);
  if (!in) {
    fail(ErrorKind::kStageOrder,
         "no manifest in " + workspace.string() + "; run `urban2vec ingest` first");
  }
  Manifest m;
  try {
    const json j = json::parse(in);
    m.seed = j.at("seed").get<std::uint64_t>();
    m.assign_missing = j.value("assign_missing", false);
    for (const auto& [name, f] : j.at("inputs").items()) m.inputs[name] = file_from_json(f);
    for (const auto& [name, s] : j.at("stages").items()) {
      StageRecord record;
      record.complete = s.at("complete").get<bool>();
      record.config = s.value("config", KeyValues{});
      for (const auto& [fname, f] : s.at("files").items()) record.files[fname] = file_from_json(f);
      m.stages[name] = std::move(record);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kIntegrity, path.string() + ": corrupt manifest: " + e.what());
  }
  return m;
}

void Manifest::save(const fs::path& workspace) const {
  json j;
  j["version"] = 1;
  j["seed"] = seed;
  j["assign_missing"] = assign_missing;
  j["inputs"] = json::object();
  for (const auto& [name, f] : inputs) j["inputs"][name] = to_json(f);
  j["stages"] = json::object();
  for (const auto& [name, s] : stages) {
    json stage{{"complete", s.complete}, {"config", s.config}, {"files", json::object()}};
    for (const auto& [fname, f] : s.files) stage["files"][fname] = to_json(f);
    j["stages"][name] = std::move(stage);
  }
  const auto path = path_in(workspace);
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot write " + tmp.string());
    out << j.dump(2) << '\n';
    if (!out) fail(ErrorKind::kIo, "error writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::kIo, "cannot replace " + path.string() + ": " + ec.message());
}

const StageRecord* Manifest::find(const std::string& stage) const {
  const auto it = stages.find(stage);
  return it == stages.end() ? nullptr : &it->second;
}

void Manifest::require_stage(const fs::path& workspace, const std::string& stage) const {
  const auto* record = find(stage);
  if (!record || !record->complete) {
    fail(ErrorKind::kStageOrder, "stage '" + stage + "' has not completed in this workspace");
  }
  auto verify = [&](const std::string& label, const FileRecord& f, const fs::path& resolved) {
    if (!fs::exists(resolved)) {
      fail(ErrorKind::kIntegrity, label + ": " + resolved.string() + " is missing");
    }
    if (sha256_file(resolved) != f.sha256) {
      fail(ErrorKind::kIntegrity, label + ": hash mismatch for " + resolved.string());
    }
  };
  if (stage == kStageIngest) {
    for (const auto& [name, f] : inputs) verify("input '" + name + "'", f, f.path);
  }
  for (const auto& [name, f] : record->files) verify("checkpoint '" + name + "'", f, workspace / f.path);
}

void Manifest::complete_stage(const std::string& stage, StageRecord record) {
  record.complete = true;
  const auto& order = stage_order();
  const auto it = std::find(order.begin(), order.end(), stage);
  for (auto later = it == order.end() ? order.end() : it + 1; later != order.end(); ++later) {
    stages.erase(*later);
  }
  stages[stage] = std::move(record);
}

}  // namespace urban2vec::cli
