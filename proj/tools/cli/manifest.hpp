#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cli/config.hpp"

namespace urban2vec::cli {

std::string sha256_file(const std::filesystem::path& path);

struct FileRecord {
  std::string path;  // absolute for inputs, workspace-relative for checkpoints
  std::string sha256;
};

// Stage names in pipeline order.
inline constexpr const char* kStageIngest = "ingest";
inline constexpr const char* kStageTrainSv = "train_sv";
inline constexpr const char* kStageAggregate = "aggregate";
inline constexpr const char* kStageTrainPoi = "train_poi";

struct StageRecord {
  bool complete = false;
  KeyValues config;
  std::map<std::string, FileRecord> files;  // checkpoint name -> file (+ ".ids" sidecars)
};

// Workspace state persisted as manifest.json. A stage may run only when its
// predecessor is complete and every recorded file still hashes to the
// recorded value.
struct Manifest {
  std::uint64_t seed = 0;
  bool assign_missing = false;
  std::map<std::string, FileRecord> inputs;
  std::map<std::string, StageRecord> stages;

  static std::filesystem::path path_in(const std::filesystem::path& workspace);
  static Manifest load(const std::filesystem::path& workspace);
  void save(const std::filesystem::path& workspace) const;

  // Throws kStageOrder when `stage` is missing/incomplete and kIntegrity when
  // one of its files no longer matches.
  void require_stage(const std::filesystem::path& workspace, const std::string& stage) const;

  // Marks a stage complete and drops every later stage.
  void complete_stage(const std::string& stage, StageRecord record);

  const StageRecord* find(const std::string& stage) const;
};

}  // namespace urban2vec::cli
