#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "langsup/analysis.hpp"
#include "langsup/contrastive.hpp"
#include "langsup/corpus.hpp"
#include "langsup/enrichment.hpp"
#include "langsup/selection.hpp"

namespace langsup::cli {

struct PipelinePaths {
  std::filesystem::path corpus;
  std::filesystem::path embeddings;
  std::filesystem::path ranking;
  std::filesystem::path projector;
  std::filesystem::path out_dir;
};

// Gaussian-cluster stand-in for backbone point features.
struct SyntheticTask {
  std::size_t input_dim = 16;
  std::size_t points_per_class = 200;
  double separation = 8.0;  // distance between any two class means, in within-class stds
};

/// Settings shared by every subcommand. Precedence: flag > config file >
/// these defaults.
struct PipelineConfig {
  PipelinePaths paths;
  SelectionConfig selection;
  TrainConfig train;
  EnrichmentConfig enrichment;
  SyntheticTask synthetic;
  std::uint64_t seed = 0;
  bool offline = false;

  // Sub-seeds derived from `seed`; see langsup::derive_seed.
  std::uint64_t selection_seed() const;
  std::uint64_t train_seed() const;
  std::uint64_t data_seed() const;
};

// Reads a JSON config; relative paths resolve against the file's directory.
PipelineConfig load_pipeline_config(const std::filesystem::path& path, PipelineConfig base = {});

// Runs the CLI. Errors are printed to `err` and mapped onto exit codes:
// 0 ok, 1 internal, 2 transport, 3 validation/schema, 4 artifact mismatch.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// --- experiment helpers shared by `ablate` and the acceptance suite -------

struct AblationRow {
  std::string method;
  std::size_t d = 0;
  double accuracy = 0.0;
  double stddev = 0.0;  // across seeds for "random"; 0 otherwise
};

struct AblationResult {
  double full_accuracy = 0.0;  // no reduction
  std::vector<AblationRow> rows;
  // Per-seed random-selection accuracies and selected sets, keyed by d.
  std::vector<std::pair<std::size_t, std::vector<double>>> random_accuracies;
  std::vector<std::pair<std::size_t, std::vector<std::vector<std::size_t>>>> random_selections;

  const AblationRow& row(std::string_view method, std::size_t d) const;
  Table table() const;
};

// Holds out the last `holdout` descriptions of every category, ranks
// channels on the rest, and scores retrieval of the held-out rows for each
// method (paper, ape, random x seeds, pool) and each d.
AblationResult run_selection_ablation(const EmbeddingSet& es, std::size_t holdout,
                                      const std::vector<std::size_t>& d_values, std::size_t random_seeds,
                                      std::uint64_t global_seed, double lambda);

}  // namespace langsup::cli
