#include "cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>

#include "urban2vec/error.hpp"

namespace urban2vec::cli {
namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorKind::kValidation, "config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  fail(ErrorKind::kValidation, "config key '" + key + "': expected a boolean, got '" + text + "'");
}

using Setter = std::function<void(const std::string&, const std::string&)>;

template <class T>
Setter bind(T& field) {
  return [&field](const std::string& key, const std::string& text) {
    if constexpr (std::is_same_v<T, bool>) {
      field = parse_bool(key, text);
    } else {
      field = parse_value<T>(key, text);
    }
  };
}

void apply_table(const KeyValues& values, const std::map<std::string, Setter>& table,
                 const char* what) {
  for (const auto& [key, text] : values) {
    const auto it = table.find(key);
    if (it == table.end()) {
      fail(ErrorKind::kValidation, std::string("unknown ") + what + " config key '" + key + "'");
    }
    it->second(key, text);
  }
}

}  // namespace

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot read config " + path.string());
  KeyValues values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::kValidation,
           path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return values;
}

void apply(const KeyValues& values, TrainingConfig& c) {
  const std::map<std::string, Setter> table{
      {"d", bind(c.dim)},
      {"K", bind(c.context_size)},
      {"margin_sv", bind(c.margin_sv)},
      {"margin_poi", bind(c.margin_poi)},
      {"neg_exponent", bind(c.neg_exponent)},
      {"lr_sv", bind(c.lr_sv)},
      {"lr_poi", bind(c.lr_poi)},
      {"epochs_sv", bind(c.epochs_sv)},
      {"epochs_poi", bind(c.epochs_poi)},
      {"triplets_per_anchor", bind(c.triplets_per_anchor)},
      {"batch_size", bind(c.batch_size)},
      {"encoder_hidden", bind(c.encoder_hidden)},
      {"z_anchor_weight", bind(c.z_anchor_weight)},
      {"seed", bind(c.seed)},
  };
  apply_table(values, table, "training");
}

void apply(const KeyValues& values, SynthConfig& c) {
  const std::map<std::string, Setter> table{
      {"n_neighborhoods", bind(c.n_neighborhoods)},
      {"views_per_neighborhood", bind(c.views_per_neighborhood)},
      {"pois_per_neighborhood", bind(c.pois_per_neighborhood)},
      {"latent_dim", bind(c.latent_dim)},
      {"feature_dim", bind(c.feature_dim)},
      {"vocab_size", bind(c.vocab_size)},
      {"spatial_noise", bind(c.spatial_noise)},
      {"feature_noise", bind(c.feature_noise)},
      {"seed", bind(c.seed)},
      {"n_clusters", bind(c.n_clusters)},
      {"cluster_separation", bind(c.cluster_separation)},
      {"cluster_noise", bind(c.cluster_noise)},
      {"identity_mixing", bind(c.identity_mixing)},
      {"topic_sharpness", bind(c.topic_sharpness)},
      {"grid_spacing_deg", bind(c.grid_spacing_deg)},
      {"origin_lat", bind(c.origin_lat)},
      {"origin_lon", bind(c.origin_lon)},
  };
  apply_table(values, table, "synth");
}

KeyValues to_key_values(const TrainingConfig& c) {
  auto num = [](auto v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
  };
  return {
      {"d", num(c.dim)},
      {"K", num(c.context_size)},
      {"margin_sv", num(c.margin_sv)},
      {"margin_poi", num(c.margin_poi)},
      {"neg_exponent", num(c.neg_exponent)},
      {"lr_sv", num(c.lr_sv)},
      {"lr_poi", num(c.lr_poi)},
      {"epochs_sv", num(c.epochs_sv)},
      {"epochs_poi", num(c.epochs_poi)},
      {"triplets_per_anchor", num(c.triplets_per_anchor)},
      {"batch_size", num(c.batch_size)},
      {"encoder_hidden", num(c.encoder_hidden)},
      {"z_anchor_weight", num(c.z_anchor_weight)},
      {"seed", num(c.seed)},
  };
}

}  // namespace urban2vec::cli
