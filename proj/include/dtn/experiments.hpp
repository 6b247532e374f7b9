#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dtn/ca.hpp"
#include "dtn/image_data.hpp"
#include "dtn/model.hpp"
#include "dtn/training.hpp"

namespace dtn {

// ---- cellular-automaton studies ---------------------------------------------

struct CaTrainSpec {
  int rule = 30;
  int steps = 1;  // how many automaton updates the network must predict
  std::size_t layers = 1;
  std::size_t bond_dim = 2;
  Activation activation = Activation::kSigmoid;
  bool residual = false;
  bool normalize_contexts = true;
  bool normalize_output = false;
  std::size_t train_width_lo = 5;  // training rings, exhaustive per width
  std::size_t train_width_hi = 7;
  double init_noise = 0.01;
  std::uint64_t init_seed = 1;
  TrainConfig train;
};

// Uniform sequence-to-sequence network matching the spec (all layers share
// one core; scalar decoder output).
DeepTensorNetwork make_ca_network(const CaTrainSpec& spec);

struct CaRunResult {
  bool solved_train = false;  // exact on the whole training set
  int epochs_run = 0;
  double final_loss = 0.0;
  DeepTensorNetwork net;
};

// Trains on the exhaustive rings of widths [lo, hi]; stops as soon as the
// training set is predicted exactly.
CaRunResult run_ca_training(const CaTrainSpec& spec);

struct CaWidthRow {
  std::size_t width = 0;
  double sequence_accuracy = 0.0;
  double site_accuracy = 0.0;
  bool exhaustive = false;  // false: sampled
  std::size_t samples = 0;
};

// Evaluates one trained network across ring widths; exhaustive up to
// `exhaustive_cap` cells, `random_count` seeded samples beyond that.
std::vector<CaWidthRow> ca_width_sweep(const DeepTensorNetwork& net, int rule,
                                       int steps, std::size_t width_lo,
                                       std::size_t width_hi,
                                       std::size_t exhaustive_cap = 14,
                                       std::size_t random_count = 2048,
                                       std::uint64_t sample_seed = 9001);

struct CaCellResult {
  std::size_t bond_dim = 0;
  std::size_t layers = 0;
  int steps = 0;
  bool solved = false;
  int seeds_tried = 0;
  int solving_seed = -1;  // offset from spec.init_seed, -1 when unsolved
  int epochs_of_solve = 0;
  double best_loss = 0.0;
  CaRunResult best_run;
};

// Retries a configuration over `max_seeds` initialization seeds until one
// solves the training set.
CaCellResult run_ca_cell(const CaTrainSpec& spec, int max_seeds);

// Ascending bond dimensions until one solves; returns a row per tried D.
std::vector<CaCellResult> run_min_bond_search(const CaTrainSpec& spec,
                                              std::size_t bond_lo,
                                              std::size_t bond_hi,
                                              int max_seeds);

// ---- image studies -----------------------------------------------------------

struct ImageTrainSpec {
  std::size_t image_rows = 12;
  std::size_t image_cols = 12;
  std::size_t num_classes = 10;
  std::size_t head_bond = 20;
  bool uniform_head = true;
  std::size_t mpo_layers = 0;  // optional feature layers before the head
  std::size_t mpo_bond = 10;
  Activation mpo_activation = Activation::kMatrixExp;
  bool mpo_residual = true;
  bool mpo_normalize_contexts = true;
  // Unit-normalize each site output before the classifier head: the head
  // multiplies one factor per site, so unnormalized residual outputs
  // (norm ~2 each) overflow the logits exponentially in the site count.
  bool mpo_normalize_output = true;
  // Nonzero: each training image is instead resampled to one random square
  // size in [resize_lo, resize_hi] (needs a uniform model), which trains
  // size robustness; the test set stays at image_rows x image_cols.
  std::size_t resize_lo = 0;
  std::size_t resize_hi = 0;
  double init_noise = 0.01;
  std::uint64_t init_seed = 1;
  TrainConfig train;
};

struct ImageRunResult {
  double test_accuracy = 0.0;
  double train_accuracy = 0.0;
  int epochs_run = 0;
  std::vector<double> epoch_test_accuracy;
  DeepTensorNetwork net;
};

ClassifierData images_to_classifier_data(const ImageDataset& data,
                                         std::size_t rows, std::size_t cols);

// Mixed-size variant: image i is resampled to a seeded random square size in
// [lo, hi] (uniform models only can consume the result).
ClassifierData images_to_classifier_data_range(const ImageDataset& data,
                                               std::size_t lo, std::size_t hi,
                                               std::uint64_t seed);

ImageRunResult run_image_training(const ImageTrainSpec& spec,
                                  const ImageDataset& train,
                                  const ImageDataset& test);

struct RobustnessRow {
  std::size_t rows = 0;  // evaluation geometry
  std::size_t cols = 0;
  double accuracy = 0.0;
};

// Evaluates a (uniform) classifier on the test images resampled to other
// geometries than it was trained at; pass non-square pairs to sweep aspect
// ratios.
std::vector<RobustnessRow> run_robustness_sweep(
    const DeepTensorNetwork& net, const ImageDataset& test,
    const std::vector<std::pair<std::size_t, std::size_t>>& shapes);

struct DepthRow {
  std::size_t depth = 0;
  double test_accuracy = 0.0;
  double train_accuracy = 0.0;
};

// Trains the same configuration at increasing layer counts.
std::vector<DepthRow> run_depth_sweep(const ImageTrainSpec& base,
                                      const std::vector<std::size_t>& depths,
                                      const ImageDataset& train,
                                      const ImageDataset& test);

// Per-seed outcomes with their summary statistics.
struct ExperimentReport {
  std::string id;
  std::string config;  // snapshot of the settings that produced it
  std::vector<double> outcomes;
  double mean = 0.0;
  double stddev = 0.0;  // population deviation over the outcomes
};

ExperimentReport make_report(std::string id, std::string config,
                             std::vector<double> outcomes);

// ---- forward-pass scaling benchmark ----------------------------------------------

struct BenchPoint {
  std::size_t num_sites = 0;
  double seconds = 0.0;
};

struct BenchResult {
  std::vector<BenchPoint> sweep;  // factored forward time vs sequence length
  double r2_linear = 0.0;         // goodness of the affine fit time(N)
  double seconds_at_bond = 0.0;   // fixed-N timing at bond_dim
  double seconds_at_double_bond = 0.0;
  double doubling_ratio = 0.0;
};

BenchResult run_forward_bench(std::size_t phys_dim, std::size_t bond_dim,
                              std::size_t boundary_rank,
                              const std::vector<std::size_t>& lengths,
                              std::size_t doubling_sites,
                              std::uint64_t seed = 7);

// ---- small report helpers ---------------------------------------------------------

void write_csv(const std::string& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

std::string markdown_table(const std::vector<std::string>& header,
                           const std::vector<std::vector<std::string>>& rows);

}  // namespace dtn
