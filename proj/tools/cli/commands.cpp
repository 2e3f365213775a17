#include "cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "cli/config.hpp"
#include "cli/manifest.hpp"
#include "urban2vec/analytics.hpp"
#include "urban2vec/dataset.hpp"
#include "urban2vec/embedding_io.hpp"
#include "urban2vec/error.hpp"
#include "urban2vec/log.hpp"
#include "urban2vec/pipeline.hpp"
#include "urban2vec/synthcity.hpp"

namespace urban2vec::cli {
namespace {

namespace fs = std::filesystem;

struct EmbeddingSlot {
  const char* stage;
  const char* checkpoint;
};

const std::map<std::string, EmbeddingSlot>& embedding_slots() {
  static const std::map<std::string, EmbeddingSlot> slots{
      {"street_views", {kStageTrainSv, "street_views"}},
      {"sve", {kStageAggregate, "neighborhoods_sve"}},
      {"u2v", {kStageTrainPoi, "neighborhoods_u2v"}},
      {"poi", {kStageTrainPoi, "neighborhoods_poi"}},
      {"words", {kStageTrainPoi, "words"}},
  };
  return slots;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return kExitUsage;
    case ErrorKind::kStageOrder:
    case ErrorKind::kIntegrity: return kExitStage;
    default: return kExitData;
  }
}

// ---------------------------------------------------------------- helpers

fs::path absolute_path(const std::string& p) { return fs::absolute(fs::path(p)).lexically_normal(); }

void ensure_workspace(const fs::path& ws) {
  std::error_code ec;
  fs::create_directories(ws, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create workspace " + ws.string() + ": " + ec.message());
}

UrbanDataset load_inputs(const std::string& poi, const std::string& features,
                         const std::string& ids, const std::string& centroids,
                         bool assign_missing, std::vector<std::string>* warnings) {
  auto views = read_street_views_csv(ids);
  FeatureMatrix table;
  if (is_feature_binary(features)) {
    std::vector<EntityId> view_ids;
    view_ids.reserve(views.size());
    for (const auto& v : views) view_ids.push_back(v.id);
    table = read_features_binary(features, std::move(view_ids));
  } else {
    table = read_features_csv(features);
  }
  IngestOptions options;
  options.assign_missing = assign_missing;
  return assemble_dataset(read_centroids_csv(centroids), std::move(views), std::move(table),
                          read_poi_jsonl(poi), options, warnings);
}

UrbanDataset load_dataset(const fs::path& ws, const Manifest& manifest) {
  manifest.require_stage(ws, kStageIngest);
  return load_inputs(manifest.inputs.at("poi").path, manifest.inputs.at("features").path,
                     manifest.inputs.at("ids").path, manifest.inputs.at("centroids").path,
                     manifest.assign_missing, nullptr);
}

void save_checkpoint(const fs::path& ws, StageRecord& record, const std::string& name,
                     const EmbeddingTable& table) {
  const fs::path file = name + ".gvemb";
  write_embedding(ws / file, table);
  record.files[name] = {file.string(), sha256_file(ws / file)};
  const fs::path ids = sidecar_path(file);
  record.files[name + ".ids"] = {ids.string(), sha256_file(ws / ids)};
}

EmbeddingTable load_checkpoint(const fs::path& ws, const Manifest& manifest, const std::string& embedding) {
  const auto it = embedding_slots().find(embedding);
  if (it == embedding_slots().end()) fail(ErrorKind::kUsage, "unknown embedding '" + embedding + "'");
  manifest.require_stage(ws, it->second.stage);
  const auto& file = manifest.find(it->second.stage)->files.at(it->second.checkpoint);
  return read_embedding(ws / file.path);
}

std::vector<std::string> id_strings(std::span<const EntityId> ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(std::to_string(id));
  return out;
}

void require_ids(const EmbeddingTable& table, std::span<const EntityId> expected, const std::string& what) {
  if (table.ids != id_strings(expected)) {
    fail(ErrorKind::kIntegrity, what + " checkpoint ids do not match the ingested dataset");
  }
}

TrainingConfig resolve_training(const Manifest& manifest, const KeyValues* base,
                                const std::string& config_file, const KeyValues& overrides) {
  TrainingConfig config;
  config.seed = manifest.seed;
  if (base) cli::apply(*base, config);
  if (!config_file.empty()) cli::apply(read_key_values(config_file), config);
  cli::apply(overrides, config);
  config.validate();
  return config;
}

// Registers --flag that writes into overrides[key] when given.
void add_override(CLI::App* sub, KeyValues& overrides, const std::string& flag,
                  const std::string& key, const std::string& help) {
  sub->add_option_function<std::string>(
      flag, [&overrides, key](const std::string& v) { overrides[key] = v; }, help);
}

void add_set_option(CLI::App* sub, KeyValues& overrides) {
  sub->add_option_function<std::vector<std::string>>(
      "--set",
      [&overrides](const std::vector<std::string>& items) {
        for (const auto& item : items) {
          const auto eq = item.find('=');
          if (eq == std::string::npos) fail(ErrorKind::kUsage, "--set expects key=value, got " + item);
          overrides[item.substr(0, eq)] = item.substr(eq + 1);
        }
      },
      "Override any config key (key=value), repeatable");
}

// --------------------------------------------------------------- commands

struct Common {
  std::string workspace = "u2v_workspace";
};

struct SynthArgs {
  std::string config_file;
  std::string out_dir;
  KeyValues overrides;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SynthConfig config;
  if (!a.config_file.empty()) cli::apply(read_key_values(a.config_file), config);
  cli::apply(a.overrides, config);
  const auto city = generate_city(config);
  const auto files = export_city(city, a.out_dir);
  out << "wrote synthetic city (" << city.neighborhoods.size() << " neighborhoods, "
      << city.street_views.size() << " street views, " << city.pois.size() << " POIs)\n";
  for (const auto& p : {files.pois, files.features, files.street_views, files.centroids, files.latents, files.clusters}) {
    if (!p.empty()) out << "  " << p.string() << '\n';
  }
  return kExitOk;
}

struct IngestArgs {
  std::string poi, features, ids, centroids;
  bool assign_missing = false;
  std::uint64_t seed = 42;
};

int cmd_ingest(const Common& c, const IngestArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<std::string> warnings;
  const auto dataset = load_inputs(a.poi, a.features, a.ids, a.centroids, a.assign_missing, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';

  const fs::path ws = c.workspace;
  ensure_workspace(ws);
  Manifest manifest;
  manifest.seed = a.seed;
  manifest.assign_missing = a.assign_missing;
  for (const auto& [name, path] : std::map<std::string, std::string>{
           {"poi", a.poi}, {"features", a.features}, {"ids", a.ids}, {"centroids", a.centroids}}) {
    const auto abs = absolute_path(path);
    manifest.inputs[name] = {abs.string(), sha256_file(abs)};
  }
  StageRecord record;
  record.config = {{"assign_missing", a.assign_missing ? "true" : "false"},
                   {"seed", std::to_string(a.seed)}};
  manifest.complete_stage(kStageIngest, std::move(record));
  manifest.save(ws);
  out << "ingested " << dataset.neighborhoods.size() << " neighborhoods, "
      << dataset.street_views.size() << " street views (" << dataset.features.values.cols()
      << " features), " << dataset.pois.size() << " POIs; " << warnings.size() << " warning(s)\n";
  return kExitOk;
}

struct TrainArgs {
  std::string config_file;
  KeyValues overrides;
};

int cmd_train_sv(const Common& c, const TrainArgs& a, std::ostream& out) {
  const fs::path ws = c.workspace;
  auto manifest = Manifest::load(ws);
  const auto dataset = load_dataset(ws, manifest);
  const auto config = resolve_training(manifest, nullptr, a.config_file, a.overrides);

  const auto result = run_street_view_stage(dataset, config);
  StageRecord record;
  record.config = to_key_values(config);
  save_checkpoint(ws, record, "street_views", {id_strings(dataset.features.ids), result.embeddings});
  manifest.complete_stage(kStageTrainSv, std::move(record));
  manifest.save(ws);

  out << "trained street-view encoder: d=" << config.dim << " K=" << config.context_size
      << " epochs=" << config.epochs_sv << '\n';
  for (std::size_t e = 0; e < result.epoch_losses.size(); ++e) {
    out << "  epoch " << e + 1 << " mean triplet loss " << result.epoch_losses[e] << '\n';
  }
  return kExitOk;
}

struct AggregateArgs {
  std::string empty_policy = "error";
};

int cmd_aggregate(const Common& c, const AggregateArgs& a, std::ostream& out) {
  const fs::path ws = c.workspace;
  auto manifest = Manifest::load(ws);
  manifest.require_stage(ws, kStageTrainSv);
  const auto dataset = load_dataset(ws, manifest);
  const auto views = load_checkpoint(ws, manifest, "street_views");
  require_ids(views, dataset.features.ids, "street-view");

  const auto policy = a.empty_policy == "zero" ? EmptyNeighborhoodPolicy::kZeroWithWarning
                                                : EmptyNeighborhoodPolicy::kError;
  const Eigen::MatrixXd z = run_aggregation(dataset, views.values, policy);
  StageRecord record;
  record.config = {{"empty_policy", a.empty_policy}};
  save_checkpoint(ws, record, "neighborhoods_sve", {id_strings(dataset.neighborhood_ids()), z});
  manifest.complete_stage(kStageAggregate, std::move(record));
  manifest.save(ws);
  out << "aggregated " << views.values.rows() << " street views into " << z.rows()
      << " neighborhood embeddings\n";
  return kExitOk;
}

struct TrainPoiArgs {
  TrainArgs train;
  std::string pretrained;
};

int cmd_train_poi(const Common& c, const TrainPoiArgs& a, std::ostream& out) {
  const fs::path ws = c.workspace;
  auto manifest = Manifest::load(ws);
  manifest.require_stage(ws, kStageAggregate);
  const auto dataset = load_dataset(ws, manifest);
  const auto sve = load_checkpoint(ws, manifest, "sve");
  require_ids(sve, dataset.neighborhood_ids(), "neighborhood");

  const auto* sv_stage = manifest.find(kStageTrainSv);
  auto config = resolve_training(manifest, sv_stage ? &sv_stage->config : nullptr,
                                 a.train.config_file, a.train.overrides);
  if (config.dim != sve.values.cols()) {
    fail(ErrorKind::kValidation, "d=" + std::to_string(config.dim) +
                                     " does not match the stage-2 embedding width " +
                                     std::to_string(sve.values.cols()));
  }

  const auto corpus = build_corpus(dataset);
  std::map<TokenId, std::vector<double>> pretrained;
  if (!a.pretrained.empty()) pretrained = load_pretrained_vectors(a.pretrained, corpus.vocab, static_cast<std::size_t>(config.dim));
  const auto joint = run_poi_stage(corpus, sve.values, config, pretrained);
  const auto poi_only = run_poi_stage(
      corpus,
      random_neighborhood_init(sve.values.rows(), config.dim,
                               stream_seed(config.seed, SeedStream::kRandomNeighborhoods)),
      config, pretrained);

  StageRecord record;
  record.config = to_key_values(config);
  if (!a.pretrained.empty()) record.config["pretrained"] = absolute_path(a.pretrained).string();
  const auto ids = id_strings(dataset.neighborhood_ids());
  save_checkpoint(ws, record, "neighborhoods_u2v", {ids, joint.neighborhoods});
  save_checkpoint(ws, record, "neighborhoods_poi", {ids, poi_only.neighborhoods});
  std::vector<std::string> tokens(corpus.vocab.tokens().begin(), corpus.vocab.tokens().end());
  save_checkpoint(ws, record, "words", {tokens, joint.words});
  manifest.complete_stage(kStageTrainPoi, std::move(record));
  manifest.save(ws);

  out << "trained POI stage: |C|=" << corpus.vocab.size() << " epochs=" << config.epochs_poi
      << " pretrained vectors=" << pretrained.size() << '\n';
  for (std::size_t e = 0; e < joint.epoch_losses.size(); ++e) {
    out << "  epoch " << e + 1 << " mean triplet loss " << joint.epoch_losses[e] << '\n';
  }
  return kExitOk;
}

struct EvalArgs {
  std::string targets;
  std::size_t repeats = 20;
  std::string regressor = "pca-lr";
  std::string embedding = "u2v";
  std::string out_prefix;
  std::optional<std::uint64_t> seed;
  std::vector<Eigen::Index> pca_components;
};

Eigen::MatrixXd neighborhood_matrix(const fs::path& ws, const Manifest& manifest,
                                    const UrbanDataset& dataset, const std::string& embedding) {
  if (embedding == "poistats") {
    const auto corpus = build_corpus(dataset);
    return poistats_tfidf(corpus.bags, corpus.vocab).values;
  }
  if (embedding == "street_views" || embedding == "words") {
    fail(ErrorKind::kUsage, "'" + embedding + "' is not a neighborhood embedding");
  }
  const auto table = load_checkpoint(ws, manifest, embedding);
  require_ids(table, dataset.neighborhood_ids(), "neighborhood");
  return table.values;
}

int cmd_eval(const Common& c, const EvalArgs& a, std::ostream& out) {
  const fs::path ws = c.workspace;
  const auto manifest = Manifest::load(ws);
  const auto dataset = load_dataset(ws, manifest);
  const Eigen::MatrixXd z = neighborhood_matrix(ws, manifest, dataset, a.embedding);

  const auto raw = read_attributes_csv(a.targets);
  if (raw.ids.size() != dataset.neighborhoods.size()) {
    fail(ErrorKind::kValidation, "targets cover " + std::to_string(raw.ids.size()) +
                                     " neighborhoods but the dataset has " +
                                     std::to_string(dataset.neighborhoods.size()));
  }
  const auto targets = raw.aligned_to(dataset.neighborhood_ids());

  RegressionProtocol protocol;
  protocol.repeats = a.repeats;
  protocol.seed = a.seed.value_or(manifest.seed);
  protocol.pca_components = a.pca_components;
  const auto report = evaluate_regression(z, targets.values, targets.names, protocol);

  const fs::path prefix = a.out_prefix.empty() ? ws / ("report_" + a.embedding) : fs::path(a.out_prefix);
  {
    std::ofstream csv(prefix.string() + ".csv", std::ios::trunc);
    if (!csv) fail(ErrorKind::kIo, "cannot write " + prefix.string() + ".csv");
    write_report_csv(csv, report);
    std::ofstream txt(prefix.string() + ".txt", std::ios::trunc);
    if (!txt) fail(ErrorKind::kIo, "cannot write " + prefix.string() + ".txt");
    txt << "embedding: " << a.embedding << "\n";
    write_report_text(txt, report);
  }
  out << "embedding: " << a.embedding << '\n';
  write_report_text(out, report);
  out << "report: " << prefix.string() << ".csv\n";
  return kExitOk;
}

struct ClusterArgs {
  std::size_t k = 4;
  std::string embedding = "u2v";
  std::string out_file;
  std::optional<std::uint64_t> seed;
};

int cmd_cluster(const Common& c, const ClusterArgs& a, std::ostream& out) {
  const fs::path ws = c.workspace;
  const auto manifest = Manifest::load(ws);
  const auto dataset = load_dataset(ws, manifest);
  const Eigen::MatrixXd z = neighborhood_matrix(ws, manifest, dataset, a.embedding);
  const auto result = kmeans(z, a.k, a.seed.value_or(manifest.seed));

  const fs::path path = a.out_file.empty() ? ws / ("clusters_" + a.embedding + ".csv") : fs::path(a.out_file);
  std::ofstream csv(path, std::ios::trunc);
  if (!csv) fail(ErrorKind::kIo, "cannot write " + path.string());
  csv << "id,cluster\n";
  const auto ids = dataset.neighborhood_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) csv << ids[i] << ',' << result.assignments[i] << '\n';

  std::vector<std::size_t> sizes(a.k, 0);
  for (auto label : result.assignments) ++sizes[label];
  out << "k-means k=" << a.k << " inertia=" << result.inertia << " iterations=" << result.iterations
      << (result.converged ? " (converged)" : " (max_iter reached)") << '\n';
  for (std::size_t k = 0; k < a.k; ++k) out << "  cluster " << k << ": " << sizes[k] << " neighborhoods\n";
  out << "clusters: " << path.string() << '\n';
  return kExitOk;
}

struct SimilarArgs {
  EntityId query = 0;
  std::string from_city;
  std::size_t top = 5;
  bool least = false;
  std::string embedding = "u2v";
  std::string out_file;
};

int cmd_similar(const Common& c, const SimilarArgs& a, std::ostream& out) {
  const fs::path ws = c.workspace;
  const auto manifest = Manifest::load(ws);
  const auto dataset = load_dataset(ws, manifest);
  const Eigen::MatrixXd z = neighborhood_matrix(ws, manifest, dataset, a.embedding);
  const std::size_t query_row = dataset.neighborhood_row(a.query);

  std::vector<EntityId> ids;
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < dataset.neighborhoods.size(); ++i) {
    if (!a.from_city.empty() && dataset.neighborhoods[i].city != a.from_city) continue;
    ids.push_back(dataset.neighborhoods[i].id);
    rows.push_back(static_cast<Eigen::Index>(i));
  }
  if (ids.empty()) fail(ErrorKind::kNotFound, "no neighborhoods tagged with city '" + a.from_city + "'");
  Eigen::MatrixXd candidates(static_cast<Eigen::Index>(rows.size()), z.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) candidates.row(static_cast<Eigen::Index>(i)) = z.row(rows[i]);

  const auto ranked = cosine_rank(z.row(static_cast<Eigen::Index>(query_row)).transpose(), candidates,
                                  ids, a.top, a.least);
  std::ostringstream csv;
  csv << "rank,id,cosine\n" << std::setprecision(9);
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    csv << r + 1 << ',' << ranked[r].id << ',' << ranked[r].cosine << '\n';
  }
  out << csv.str();
  if (!a.out_file.empty()) {
    std::ofstream file(a.out_file, std::ios::trunc);
    if (!file) fail(ErrorKind::kIo, "cannot write " + a.out_file);
    file << csv.str();
  }
  return kExitOk;
}

struct ExportArgs {
  std::string embedding = "u2v";
  std::string out_file;
};

int cmd_export_tsv(const Common& c, const ExportArgs& a, std::ostream& out) {
  const fs::path ws = c.workspace;
  const auto manifest = Manifest::load(ws);
  const auto table = load_checkpoint(ws, manifest, a.embedding);
  write_embedding_tsv(a.out_file, table);
  out << "wrote " << table.values.rows() << " rows to " << a.out_file << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-modal neighborhood embeddings from street views and POIs", "urban2vec"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  Common common;
  auto add_workspace = [&](CLI::App* sub) {
    sub->add_option("-w,--workspace", common.workspace, "Pipeline workspace directory")
        ->capture_default_str();
  };

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate and export a synthetic city");
  synth_cmd->add_option("--config", synth.config_file, "key=value synth config file");
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
  add_override(synth_cmd, synth.overrides, "--seed", "seed", "Generator seed");
  add_override(synth_cmd, synth.overrides, "--neighborhoods", "n_neighborhoods", "Neighborhood count");
  add_override(synth_cmd, synth.overrides, "--views", "views_per_neighborhood", "Street views per neighborhood");
  add_override(synth_cmd, synth.overrides, "--pois", "pois_per_neighborhood", "POIs per neighborhood");
  add_override(synth_cmd, synth.overrides, "--clusters", "n_clusters", "Latent clusters (0 = smooth field)");
  add_set_option(synth_cmd, synth.overrides);

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate inputs and start a workspace");
  add_workspace(ingest_cmd);
  ingest_cmd->add_option("--poi", ingest.poi, "POI JSON-lines file")->required();
  ingest_cmd->add_option("--features", ingest.features, "Feature table (CSV or GVFEAT01)")->required();
  ingest_cmd->add_option("--ids", ingest.ids, "Street-view CSV: id,lat,lon,neighborhood_id")->required();
  ingest_cmd->add_option("--centroids", ingest.centroids, "Neighborhood CSV: id,lat,lon[,city]")->required();
  ingest_cmd->add_flag("--assign-missing", ingest.assign_missing,
                       "Assign records without a neighborhood to the nearest centroid");
  ingest_cmd->add_option("--seed", ingest.seed, "Root seed for every later stage")->capture_default_str();

  TrainArgs train_sv;
  auto* train_sv_cmd = app.add_subcommand("train-sv", "Stage 1: street-view triplet training");
  add_workspace(train_sv_cmd);
  train_sv_cmd->add_option("--config", train_sv.config_file, "key=value training config file");
  add_override(train_sv_cmd, train_sv.overrides, "--d", "d", "Embedding dimension (default 200)");
  add_override(train_sv_cmd, train_sv.overrides, "--K", "K", "Street-view context size (default 5)");
  add_override(train_sv_cmd, train_sv.overrides, "--margin-sv", "margin_sv", "Triplet margin m");
  add_override(train_sv_cmd, train_sv.overrides, "--lr-sv", "lr_sv", "Learning rate");
  add_override(train_sv_cmd, train_sv.overrides, "--epochs-sv", "epochs_sv", "Epochs");
  add_override(train_sv_cmd, train_sv.overrides, "--triplets-per-anchor", "triplets_per_anchor", "Triplets per anchor per epoch");
  add_override(train_sv_cmd, train_sv.overrides, "--batch-size", "batch_size", "Mini-batch size");
  add_override(train_sv_cmd, train_sv.overrides, "--hidden", "encoder_hidden", "Encoder hidden width (0 = linear)");
  add_override(train_sv_cmd, train_sv.overrides, "--seed", "seed", "Override the manifest seed");
  add_set_option(train_sv_cmd, train_sv.overrides);

  AggregateArgs aggregate;
  auto* aggregate_cmd = app.add_subcommand("aggregate", "Stage 2: mean street-view embedding per neighborhood");
  add_workspace(aggregate_cmd);
  aggregate_cmd->add_option("--empty-policy", aggregate.empty_policy, "error|zero")
      ->check(CLI::IsMember({"error", "zero"}))
      ->capture_default_str();

  TrainPoiArgs train_poi;
  auto* train_poi_cmd = app.add_subcommand("train-poi", "Stage 3: joint neighborhood/POI-word training");
  add_workspace(train_poi_cmd);
  train_poi_cmd->add_option("--config", train_poi.train.config_file, "key=value training config file");
  add_override(train_poi_cmd, train_poi.train.overrides, "--margin-poi", "margin_poi", "Triplet margin m'");
  add_override(train_poi_cmd, train_poi.train.overrides, "--lr-poi", "lr_poi", "Learning rate");
  add_override(train_poi_cmd, train_poi.train.overrides, "--epochs-poi", "epochs_poi", "Epochs");
  add_override(train_poi_cmd, train_poi.train.overrides, "--neg-exponent", "neg_exponent", "Negative-sampling exponent");
  add_override(train_poi_cmd, train_poi.train.overrides, "--triplets-per-anchor", "triplets_per_anchor", "Triplets per neighborhood per epoch");
  add_override(train_poi_cmd, train_poi.train.overrides, "--seed", "seed", "Override the manifest seed");
  add_set_option(train_poi_cmd, train_poi.train.overrides);
  train_poi_cmd->add_option("--pretrained", train_poi.pretrained, "Pretrained word vectors (token v1..vd)");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "PCA+LR regression of neighborhood attributes");
  add_workspace(eval_cmd);
  eval_cmd->add_option("--targets", eval.targets, "Attribute CSV (id, target...)")->required();
  eval_cmd->add_option("--repeats", eval.repeats, "Random 70/15/15 splits")->capture_default_str();
  eval_cmd->add_option("--regressor", eval.regressor, "Regressor")
      ->check(CLI::IsMember({"pca-lr"}))
      ->capture_default_str();
  eval_cmd->add_option("--embedding", eval.embedding, "u2v|sve|poi|poistats")
      ->check(CLI::IsMember({"u2v", "sve", "poi", "poistats"}))
      ->capture_default_str();
  eval_cmd->add_option("--out-prefix", eval.out_prefix, "Report path prefix (.csv/.txt appended)");
  eval_cmd->add_option("--seed", eval.seed, "Split seed (defaults to the manifest seed)");
  eval_cmd->add_option("--pca-components", eval.pca_components, "Candidate PCA component counts");

  ClusterArgs cluster;
  auto* cluster_cmd = app.add_subcommand("cluster", "k-means on neighborhood embeddings");
  add_workspace(cluster_cmd);
  cluster_cmd->add_option("--k", cluster.k, "Cluster count")->capture_default_str();
  cluster_cmd->add_option("--embedding", cluster.embedding, "u2v|sve|poi|poistats")
      ->check(CLI::IsMember({"u2v", "sve", "poi", "poistats"}))
      ->capture_default_str();
  cluster_cmd->add_option("--out", cluster.out_file, "Cluster CSV path");
  cluster_cmd->add_option("--seed", cluster.seed, "k-means seed (defaults to the manifest seed)");

  SimilarArgs similar;
  auto* similar_cmd = app.add_subcommand("similar", "Cosine-similarity neighborhood search");
  add_workspace(similar_cmd);
  similar_cmd->add_option("--query", similar.query, "Query neighborhood id")->required();
  similar_cmd->add_option("--from-city", similar.from_city, "Restrict candidates to this city tag");
  similar_cmd->add_option("--top", similar.top, "Results to return")->capture_default_str();
  similar_cmd->add_flag("--least", similar.least, "Rank least similar first");
  similar_cmd->add_option("--embedding", similar.embedding, "u2v|sve|poi|poistats")
      ->check(CLI::IsMember({"u2v", "sve", "poi", "poistats"}))
      ->capture_default_str();
  similar_cmd->add_option("--out", similar.out_file, "Also write the CSV here");

  ExportArgs export_args;
  auto* export_cmd = app.add_subcommand("export-tsv", "Export a checkpoint as TSV");
  add_workspace(export_cmd);
  export_cmd->add_option("--embedding", export_args.embedding, "street_views|sve|u2v|poi|words")
      ->check(CLI::IsMember({"street_views", "sve", "u2v", "poi", "words"}))
      ->capture_default_str();
  export_cmd->add_option("--out", export_args.out_file, "TSV path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code(e.kind());
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(synth, out);
    if (ingest_cmd->parsed()) return cmd_ingest(common, ingest, out, err);
    if (train_sv_cmd->parsed()) return cmd_train_sv(common, train_sv, out);
    if (aggregate_cmd->parsed()) return cmd_aggregate(common, aggregate, out);
    if (train_poi_cmd->parsed()) return cmd_train_poi(common, train_poi, out);
    if (eval_cmd->parsed()) return cmd_eval(common, eval, out);
    if (cluster_cmd->parsed()) return cmd_cluster(common, cluster, out);
    if (similar_cmd->parsed()) return cmd_similar(common, similar, out);
    if (export_cmd->parsed()) return cmd_export_tsv(common, export_args, out);
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  err << "usage error: no subcommand\n";
  return kExitUsage;
}

}  // namespace urban2vec::cli
