#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "urban2vec/synthcity.hpp"
#include "urban2vec/training.hpp"

namespace urban2vec::cli {

// Flat "key = value" text; '#' starts a comment. Duplicate keys: last wins.
using KeyValues = std::map<std::string, std::string>;

KeyValues read_key_values(const std::filesystem::path& path);

// Apply known keys onto the struct. Unknown keys or unparsable values are
// kValidation errors naming the key.
void apply(const KeyValues& values, TrainingConfig& config);
void apply(const KeyValues& values, SynthConfig& config);

KeyValues to_key_values(const TrainingConfig& config);

}  // namespace urban2vec::cli
