#pragma once
// Ding records, JSON Lines I/O, stratified splits, entropy statistics and the
// synthetic generator.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dingdate/graph.hpp"
#include "dingdate/losses.hpp"
#include "json.hpp"

namespace dingdate {

enum class Split : std::uint8_t { None, Train, Val, Test };

std::string_view to_string(Split s) noexcept;
/// Throws ConfigError.
Split parse_split(std::string_view s);

struct BoundingBox {
  std::string characteristic;
  double x = 0, y = 0, w = 0, h = 0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct DingRecord {
  std::string id;
  std::string dynasty;
  std::string period;
  std::string shape;
  std::vector<std::string> characteristics;
  std::vector<BoundingBox> bboxes;
  std::optional<std::string> source;  // literature, excavation or museum
  Split split = Split::None;
  std::vector<double> features;

  friend bool operator==(const DingRecord&, const DingRecord&) = default;
};

class Dataset {
 public:
  Dataset(std::shared_ptr<const RelationGraph> graph, std::vector<DingRecord> records);

  /// Validates every record. Throws ParseError (with the line number) or
  /// SchemaViolation.
  static Dataset parse(std::istream& in, std::shared_ptr<const RelationGraph> graph);
  static Dataset load(const std::filesystem::path& path, std::shared_ptr<const RelationGraph> graph);
  /// Canonical JSON Lines: fixed key order, optional keys only when present.
  std::string to_jsonl() const;
  void save(const std::filesystem::path& path) const;

  const RelationGraph& graph() const noexcept { return *graph_; }
  std::shared_ptr<const RelationGraph> graph_ptr() const noexcept { return graph_; }
  const std::vector<DingRecord>& records() const noexcept { return records_; }
  std::vector<DingRecord>& records() noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }

  std::vector<std::size_t> indices(Split split) const;
  /// Common feature width; 0 when records carry no features. Throws
  /// SchemaViolation when widths differ.
  std::size_t feature_dim() const;
  SampleTargets targets(std::size_t i) const;

 private:
  std::shared_ptr<const RelationGraph> graph_;
  std::vector<DingRecord> records_;
};

/// Checks one record against the graph. Throws SchemaViolation.
void validate_record(const RelationGraph& graph, const DingRecord& r);
nlohmann::ordered_json record_to_json(const DingRecord& r);
DingRecord record_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Splitting

enum class SplitRule : std::uint8_t {
  /// Per period: floors of the exact quotas, leftovers to the largest
  /// fractional parts (ties to the earlier split). Deviation < 1 per split.
  LargestRemainder,
  /// Per period: floors for train and validation, the rest to test.
  FloorRemainder,
};

struct SplitRatios {
  double train = 4, val = 1, test = 5;
};

/// Tags every record. Stratified by period; deterministic under `seed`.
/// Throws EmptyDataset, ConfigError.
void split_dataset(Dataset& dataset, SplitRatios ratios, std::uint64_t seed,
                   SplitRule rule = SplitRule::LargestRemainder);

/// Per-split counts for a stratum of n records.
std::array<std::size_t, 3> split_counts(std::size_t n, SplitRatios ratios, SplitRule rule);

// ---------------------------------------------------------------------------
// Statistics

enum class Attribute : std::uint8_t { Shape, Characteristic };

struct DatasetStats {
  Attribute attribute = Attribute::Shape;
  std::size_t classes = 0;       // distinct periods observed
  std::size_t observations = 0;  // records, or (record, characteristic) pairs
  double entropy = 0.0;          // H(D), bits
  double conditional = 0.0;      // H(D | A), bits
  double gain = 0.0;             // H(D) - H(D | A)

  nlohmann::ordered_json to_json() const;
  std::string table() const;
};

/// Entropy in bits of an empirical distribution given by counts.
double entropy_bits(std::span<const std::size_t> counts);

/// Information gain g(D, A) = H(D) - H(D|A) over the fine (period) labels. For characteristics each (record,
/// characteristic) pair is one observation. Throws EmptyDataset.
DatasetStats dataset_stats(const Dataset& dataset, Attribute attribute);

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthConfig {
  /// Era hierarchy: dynasty name -> period names. Empty means the ding eras.
  std::vector<std::pair<std::string, std::vector<std::string>>> eras;
  std::size_t shapes = 8;
  std::size_t characteristics = 16;
  /// Exact records per period (takes precedence over prior + samples).
  std::vector<std::size_t> period_counts;
  std::vector<double> period_prior;  // empty: uniform
  std::size_t samples = 3000;
  /// Row-stochastic [periods x shapes]; empty: generated.
  std::vector<std::vector<double>> shape_table;
  /// Bernoulli probabilities [periods x characteristics]; empty: generated.
  std::vector<std::vector<double>> char_table;
  std::size_t shapes_per_period = 3;  // support of generated shape rows
  std::size_t chars_per_period = 6;   // support of generated characteristic rows
  std::size_t feature_dim = 32;
  double period_scale = 1.0;  // weights of the embedding sum
  double shape_scale = 1.0;
  double char_scale = 1.0;
  double noise = 1.0;  // per-coordinate Gaussian std; embeddings have unit-variance entries
  bool bboxes = false;
  std::uint64_t seed = 0;

  /// Throws BadConfig / ParseError.
  static SynthConfig from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

/// Fills in generated tables and checks them. Throws BadConfig.
SynthConfig resolve_synth_config(SynthConfig config);
/// Schema implied by a resolved config: attributes hang under the periods
/// where their table entry is positive.
GraphSpec synth_graph_spec(const SynthConfig& resolved);
/// Generates records with features; deterministic under config.seed.
Dataset synth_generate(const SynthConfig& config);

/// The benchmark used by the trend checks: ding eras, 8 shapes, 16
/// characteristics, 3000 samples, imbalanced prior, moderate noise.
SynthConfig benchmark_config(std::uint64_t seed);

}  // namespace dingdate
