// Command-line front end: train and evaluate the cellular-automaton and
// image models, verify the attention construction, check gradients, and
// benchmark the factored forward pass.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "dtn/attention.hpp"
#include "dtn/ca.hpp"
#include "dtn/checkpoint.hpp"
#include "dtn/config_file.hpp"
#include "dtn/embedding.hpp"
#include "dtn/experiments.hpp"
#include "dtn/image_data.hpp"
#include "dtn/model.hpp"
#include "dtn/rng.hpp"
#include "dtn/training.hpp"

using namespace dtn;

namespace {

// ---- small parsers -----------------------------------------------------------

std::pair<std::size_t, std::size_t> parse_range(const std::string& s,
                                                const char* flag) {
  const auto colon = s.find(':');
  if (colon == std::string::npos)
    throw std::runtime_error(std::string(flag) + ": expected LO:HI, got " + s);
  const std::size_t lo = std::stoul(s.substr(0, colon));
  const std::size_t hi = std::stoul(s.substr(colon + 1));
  if (lo == 0 || hi < lo)
    throw std::runtime_error(std::string(flag) + ": need 1 <= LO <= HI");
  return {lo, hi};
}

std::vector<std::size_t> parse_size_list(const std::string& s,
                                         const char* flag) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stoul(tok));
  }
  if (out.empty())
    throw std::runtime_error(std::string(flag) + ": empty list");
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> parse_shape_list(
    const std::string& s, const char* flag) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    const auto x = tok.find('x');
    if (x == std::string::npos)
      throw std::runtime_error(std::string(flag) + ": expected RxC items");
    out.push_back({std::stoul(tok.substr(0, x)), std::stoul(tok.substr(x + 1))});
  }
  if (out.empty())
    throw std::runtime_error(std::string(flag) + ": empty list");
  return out;
}

Activation parse_activation(const std::string& s) {
  if (s == "linear") return Activation::kLinear;
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "matrix-exp") return Activation::kMatrixExp;
  throw std::runtime_error("activation must be linear|sigmoid|matrix-exp");
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kMatrixExp: return "matrix-exp";
  }
  return "?";
}

// Doubling sequence lo, 2lo, ..., capped at hi (hi always included).
std::vector<std::size_t> doubling_steps(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> out;
  for (std::size_t v = lo; v < hi; v *= 2) out.push_back(v);
  out.push_back(hi);
  return out;
}

// ---- configuration plumbing ----------------------------------------------------

// The config file seeds the defaults; explicitly passed flags then override
// the variables CLI11 bound them to. Scanned ahead of CLI11 so the values
// are in place before parsing.
ConfigFile preload_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc)
      return ConfigFile::parse_file(argv[i + 1]);
    if (arg.rfind("--config=", 0) == 0)
      return ConfigFile::parse_file(arg.substr(9));
  }
  return ConfigFile::parse_string("");
}

TrainConfig train_config_from(const ConfigFile& cfg) {
  TrainConfig t;
  t.epochs = static_cast<int>(cfg.get_int("epochs", t.epochs));
  t.batch_size =
      static_cast<std::size_t>(cfg.get_int("batch_size", t.batch_size));
  t.seed = static_cast<std::uint64_t>(cfg.get_int("seed", t.seed));
  t.shuffle = cfg.get_bool("shuffle", t.shuffle);
  t.l2 = cfg.get_double("l2", t.l2);
  t.l2_head_only = cfg.get_bool("l2_head_only", t.l2_head_only);
  t.cv_folds = static_cast<std::size_t>(cfg.get_int("cv_folds", t.cv_folds));
  const std::string opt = cfg.get_str("optimizer", "adamw");
  if (opt == "adam")
    t.adam.kind = OptKind::kAdam;
  else if (opt == "adamw")
    t.adam.kind = OptKind::kAdamW;
  else
    throw std::runtime_error("config: optimizer must be adam|adamw");
  t.adam.lr = cfg.get_double("lr", t.adam.lr);
  t.adam.beta1 = cfg.get_double("beta1", t.adam.beta1);
  t.adam.beta2 = cfg.get_double("beta2", t.adam.beta2);
  t.adam.eps = cfg.get_double("eps", t.adam.eps);
  t.adam.weight_decay = cfg.get_double("weight_decay", t.adam.weight_decay);
  const std::string sk = cfg.get_str("scheduler", "none");
  if (sk == "none")
    t.sched.kind = SchedulerKind::kNone;
  else if (sk == "step")
    t.sched.kind = SchedulerKind::kStep;
  else if (sk == "plateau")
    t.sched.kind = SchedulerKind::kPlateau;
  else
    throw std::runtime_error("config: scheduler must be none|step|plateau");
  t.sched.gamma = cfg.get_double("gamma", t.sched.gamma);
  t.sched.period = static_cast<int>(cfg.get_int("period", t.sched.period));
  t.sched.patience =
      static_cast<int>(cfg.get_int("patience", t.sched.patience));
  t.sched.min_lr = cfg.get_double("min_lr", t.sched.min_lr);
  return t;
}

std::string train_config_snapshot(const TrainConfig& t) {
  std::ostringstream out;
  out << "epochs = " << t.epochs << "\n"
      << "batch_size = " << t.batch_size << "\n"
      << "seed = " << t.seed << "\n"
      << "shuffle = " << (t.shuffle ? "true" : "false") << "\n"
      << "l2 = " << t.l2 << "\n"
      << "l2_head_only = " << (t.l2_head_only ? "true" : "false") << "\n"
      << "cv_folds = " << t.cv_folds << "\n"
      << "optimizer = " << (t.adam.kind == OptKind::kAdam ? "adam" : "adamw")
      << "\n"
      << "lr = " << t.adam.lr << "\n"
      << "beta1 = " << t.adam.beta1 << "\n"
      << "beta2 = " << t.adam.beta2 << "\n"
      << "eps = " << t.adam.eps << "\n"
      << "weight_decay = " << t.adam.weight_decay << "\n"
      << "scheduler = "
      << (t.sched.kind == SchedulerKind::kNone
              ? "none"
              : t.sched.kind == SchedulerKind::kStep ? "step" : "plateau")
      << "\n"
      << "gamma = " << t.sched.gamma << "\n"
      << "period = " << t.sched.period << "\n"
      << "patience = " << t.sched.patience << "\n"
      << "min_lr = " << t.sched.min_lr << "\n";
  return out.str();
}

// ---- dataset loading ------------------------------------------------------------

struct ImagePair {
  ImageDataset train;
  ImageDataset test;
};

ImagePair load_image_pair(const std::string& dir, const std::string& ti,
                          const std::string& tl, const std::string& ei,
                          const std::string& el) {
  const std::string train_images =
      !ti.empty() ? ti : dir + "/train-images-idx3-ubyte";
  const std::string train_labels =
      !tl.empty() ? tl : dir + "/train-labels-idx1-ubyte";
  const std::string test_images =
      !ei.empty() ? ei : dir + "/t10k-images-idx3-ubyte";
  const std::string test_labels =
      !el.empty() ? el : dir + "/t10k-labels-idx1-ubyte";
  return {load_idx(train_images, train_labels),
          load_idx(test_images, test_labels)};
}

double ensemble_accuracy(std::span<const DeepTensorNetwork> nets,
                         const ClassifierData& data) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.xs.size(); ++i) {
    const std::vector<double> logits = ensemble_logits(nets, data.xs[i]);
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.size(); ++c)
      if (logits[c] > logits[best]) best = c;
    hits += best == data.ys[i] ? 1 : 0;
  }
  return data.xs.empty()
             ? 0.0
             : static_cast<double>(hits) / static_cast<double>(data.xs.size());
}

}  // namespace

int main(int argc, char** argv) try {
  CLI::App app{
      "Tensor-network sequence models: training, evaluation, verification "
      "and benchmarks"};
  app.require_subcommand(1);
  const ConfigFile file_cfg = preload_config(argc, argv);
  std::string config_path;  // consumed by preload_config; registered so the
                            // flag parses cleanly and shows in --help

  // ---- train-ca --------------------------------------------------------------
  auto* train_ca = app.add_subcommand(
      "train-ca", "Train a sequence model on cellular-automaton evolution");
  CaTrainSpec ca_spec;
  ca_spec.train = train_config_from(file_cfg);
  ca_spec.train.epochs = static_cast<int>(file_cfg.get_int("epochs", 2000));
  ca_spec.train.batch_size =
      static_cast<std::size_t>(file_cfg.get_int("batch_size", 0));
  ca_spec.train.adam.lr = file_cfg.get_double("lr", 0.02);
  int ca_seeds = 10;
  std::size_t ca_width = 0;
  std::string ca_width_range, ca_activation = "sigmoid", ca_normalize =
                                                             "contexts";
  std::string ca_out, ca_metrics;
  train_ca->add_option("--config", config_path, "key = value defaults");
  train_ca->add_option("--rule", ca_spec.rule, "automaton rule byte (0-255)");
  train_ca->add_option("--steps", ca_spec.steps, "evolution steps to predict");
  train_ca->add_option("--width", ca_width,
                       "single training ring width (default 5:7 range)");
  train_ca->add_option("--width-range", ca_width_range,
                       "training widths LO:HI, exhaustive per width");
  train_ca->add_option("--d-mpo", ca_spec.bond_dim, "layer bond dimension");
  train_ca->add_option("--layers", ca_spec.layers, "number of layers");
  train_ca->add_option("--activation", ca_activation,
                       "linear|sigmoid|matrix-exp");
  train_ca->add_flag("--residual", ca_spec.residual,
                     "add the input back to each site output");
  train_ca->add_option("--normalize", ca_normalize,
                       "contexts|output|both|none");
  train_ca->add_option("--seeds", ca_seeds, "restarts before giving up");
  train_ca->add_option("--epochs", ca_spec.train.epochs, "epochs per restart");
  train_ca->add_option("--lr", ca_spec.train.adam.lr, "learning rate");
  train_ca->add_option("--batch", ca_spec.train.batch_size,
                       "batch size (0 = full dataset)");
  train_ca->add_option("--l2", ca_spec.train.l2, "loss penalty coefficient");
  train_ca->add_option("--init-noise", ca_spec.init_noise,
                       "stddev around the identity initialization");
  train_ca->add_option("--init-seed", ca_spec.init_seed,
                       "base initialization seed");
  train_ca->add_option("--out", ca_out, "checkpoint path for the best model");
  train_ca->add_option("--metrics", ca_metrics, "JSON-lines metrics path");
  train_ca->callback([&] {
    ca_spec.activation = parse_activation(ca_activation);
    ca_spec.normalize_contexts =
        ca_normalize == "contexts" || ca_normalize == "both";
    ca_spec.normalize_output =
        ca_normalize == "output" || ca_normalize == "both";
    if (ca_normalize != "contexts" && ca_normalize != "output" &&
        ca_normalize != "both" && ca_normalize != "none")
      throw std::runtime_error("--normalize must be contexts|output|both|none");
    if (!ca_width_range.empty()) {
      const auto [lo, hi] = parse_range(ca_width_range, "--width-range");
      ca_spec.train_width_lo = lo;
      ca_spec.train_width_hi = hi;
    } else if (ca_width != 0) {
      ca_spec.train_width_lo = ca_spec.train_width_hi = ca_width;
    }
    std::ofstream metrics;
    if (!ca_metrics.empty()) {
      metrics.open(ca_metrics);
      if (!metrics)
        throw std::runtime_error("cannot open metrics file " + ca_metrics);
      ca_spec.train.metrics_stream = &metrics;
    }

    const CaCellResult cell = run_ca_cell(ca_spec, ca_seeds);
    std::cout << "rule " << ca_spec.rule << ", " << ca_spec.steps
              << "-step, layers " << cell.layers << ", D " << cell.bond_dim
              << ": "
              << (cell.solved ? "solved" : "unsolved (best loss " +
                                               std::to_string(cell.best_loss) +
                                               ")")
              << " after " << cell.seeds_tried << " seed(s)";
    if (cell.solved)
      std::cout << "; seed offset " << cell.solving_seed << " solved in "
                << cell.epochs_of_solve << " epochs";
    std::cout << "\n";
    if (!ca_out.empty()) {
      std::ostringstream meta;
      meta << "task = ca\nrule = " << ca_spec.rule
           << "\nsteps = " << ca_spec.steps << "\nlayers = " << ca_spec.layers
           << "\nd_mpo = " << ca_spec.bond_dim
           << "\nactivation = " << activation_name(ca_spec.activation)
           << "\nresidual = " << (ca_spec.residual ? "true" : "false")
           << "\nnormalize = " << ca_normalize
           << "\ninit_noise = " << ca_spec.init_noise << "\ninit_seed = "
           << ca_spec.init_seed + static_cast<std::uint64_t>(
                                      std::max(cell.solving_seed, 0))
           << "\n"
           << train_config_snapshot(ca_spec.train);
      save_checkpoint(ca_out, cell.best_run.net, meta.str());
      std::cout << "saved " << ca_out << "\n";
    }
  });

  // ---- eval-ca ----------------------------------------------------------------
  auto* eval_ca = app.add_subcommand(
      "eval-ca", "Sweep a trained model across ring widths");
  std::string eca_ckpt, eca_width_range = "5:100", eca_csv;
  int eca_rule = 30, eca_steps = 1;
  std::size_t eca_exhaustive_max = 14, eca_samples = 2048;
  std::uint64_t eca_sample_seed = 9001;
  eval_ca->add_option("--config", config_path, "key = value defaults");
  eval_ca->add_option("--checkpoint", eca_ckpt, "model to evaluate")
      ->required();
  eval_ca->add_option("--rule", eca_rule, "automaton rule byte");
  eval_ca->add_option("--steps", eca_steps, "evolution steps");
  eval_ca->add_option("--width-range", eca_width_range, "ring widths LO:HI");
  eval_ca->add_option("--exhaustive-max", eca_exhaustive_max,
                      "largest width checked on all 2^N rings");
  eval_ca->add_option("--samples", eca_samples,
                      "random rings per width beyond that");
  eval_ca->add_option("--sample-seed", eca_sample_seed, "sampling seed");
  eval_ca->add_option("--csv-out", eca_csv, "write N,accuracy,solved rows");
  eval_ca->callback([&] {
    const DeepTensorNetwork net = load_checkpoint(eca_ckpt);
    const auto [lo, hi] = parse_range(eca_width_range, "--width-range");
    const std::vector<CaWidthRow> rows =
        ca_width_sweep(net, eca_rule, eca_steps, lo, hi, eca_exhaustive_max,
                       eca_samples, eca_sample_seed);
    std::vector<std::vector<std::string>> table;
    std::vector<std::vector<double>> csv;
    bool all_exact = true;
    for (const CaWidthRow& r : rows) {
      const bool solved = r.sequence_accuracy == 1.0;
      all_exact &= solved;
      table.push_back({std::to_string(r.width),
                       std::to_string(r.site_accuracy),
                       std::to_string(r.sequence_accuracy),
                       r.exhaustive ? "exhaustive" : "sampled",
                       solved ? "yes" : "no"});
      csv.push_back({static_cast<double>(r.width), r.site_accuracy,
                     solved ? 1.0 : 0.0});
    }
    std::cout << markdown_table(
        {"N", "cell accuracy", "ring accuracy", "coverage", "solved"}, table);
    std::cout << (all_exact ? "all widths solved\n"
                            : "some widths unsolved\n");
    if (!eca_csv.empty()) write_csv(eca_csv, {"N", "accuracy", "solved"}, csv);
  });

  // ---- train-image -------------------------------------------------------------
  auto* train_image = app.add_subcommand(
      "train-image", "Train an image classifier on IDX data");
  ImageTrainSpec img_spec;
  img_spec.train = train_config_from(file_cfg);
  img_spec.train.epochs = static_cast<int>(file_cfg.get_int("epochs", 20));
  img_spec.train.adam.lr = file_cfg.get_double("lr", 2.6e-4);
  img_spec.train.l2 = file_cfg.get_double("l2", 0.0033);
  std::string ti_dataset = "mnist", ti_dir, ti_ti, ti_tl, ti_ei, ti_el;
  std::size_t ti_train_count = 2000, ti_test_count = 1000, ti_folds = 0;
  std::uint64_t ti_permute_seed = 0, ti_subset_seed = 17;
  std::string ti_resize_range, ti_activation = "matrix-exp";
  std::string ti_out, ti_metrics;
  bool ti_uniform = false;
  train_image->add_option("--config", config_path, "key = value defaults");
  train_image->add_option("--dataset", ti_dataset,
                          "dataset name; reads data/<name>/ unless --data-dir");
  train_image->add_option("--data-dir", ti_dir, "directory with IDX files");
  train_image->add_option("--train-images", ti_ti, "explicit IDX path");
  train_image->add_option("--train-labels", ti_tl, "explicit IDX path");
  train_image->add_option("--test-images", ti_ei, "explicit IDX path");
  train_image->add_option("--test-labels", ti_el, "explicit IDX path");
  train_image->add_option("--subset-size", ti_train_count,
                          "stratified training subset (0 = all)");
  train_image->add_option("--test-size", ti_test_count,
                          "stratified test subset (0 = all)");
  train_image->add_option("--subset-seed", ti_subset_seed, "subset draw seed");
  train_image->add_option("--permute-seed", ti_permute_seed,
                          "fixed pixel permutation (0 = off)");
  train_image->add_option("--rows", img_spec.image_rows, "input rows");
  train_image->add_option("--cols", img_spec.image_cols, "input cols");
  train_image->add_option("--d-mps", img_spec.head_bond,
                          "classifier head bond dimension");
  train_image->add_option("--d-mpo", img_spec.mpo_bond,
                          "feature layer bond dimension");
  train_image->add_option("--layers", img_spec.mpo_layers,
                          "feature layers before the head");
  train_image->add_option("--activation", ti_activation,
                          "feature layer activation");
  train_image->add_flag("--uniform", ti_uniform,
                        "share one head core across sites (any input size)");
  train_image->add_option("--resize-range", ti_resize_range,
                          "train each image at a random square size in LO:HI");
  train_image->add_option("--folds", ti_folds,
                          "cross-validation folds before the final fit");
  train_image->add_option("--epochs", img_spec.train.epochs, "epochs");
  train_image->add_option("--batch", img_spec.train.batch_size, "batch size");
  train_image->add_option("--lr", img_spec.train.adam.lr, "learning rate");
  train_image->add_option("--l2", img_spec.train.l2,
                          "loss penalty coefficient");
  train_image->add_option("--init-noise", img_spec.init_noise,
                          "stddev around the identity initialization");
  train_image->add_option("--init-seed", img_spec.init_seed,
                          "initialization seed");
  train_image->add_option("--out", ti_out, "checkpoint path");
  train_image->add_option("--metrics", ti_metrics, "JSON-lines metrics path");
  train_image->callback([&] {
    img_spec.mpo_activation = parse_activation(ti_activation);
    img_spec.uniform_head = ti_uniform;
    if (!ti_resize_range.empty()) {
      const auto [lo, hi] = parse_range(ti_resize_range, "--resize-range");
      img_spec.resize_lo = lo;
      img_spec.resize_hi = hi;
    }
    if (ti_dir.empty()) ti_dir = "data/" + ti_dataset;
    ImagePair pair = load_image_pair(ti_dir, ti_ti, ti_tl, ti_ei, ti_el);
    if (ti_train_count != 0)
      pair.train = stratified_subset(pair.train, ti_train_count,
                                     ti_subset_seed);
    if (ti_test_count != 0)
      pair.test = stratified_subset(pair.test, ti_test_count,
                                    ti_subset_seed + 1);
    if (ti_permute_seed != 0) {
      pair.train = apply_permutation(pair.train, ti_permute_seed);
      pair.test = apply_permutation(pair.test, ti_permute_seed);
    }
    std::ofstream metrics;
    if (!ti_metrics.empty()) {
      metrics.open(ti_metrics);
      if (!metrics)
        throw std::runtime_error("cannot open metrics file " + ti_metrics);
      img_spec.train.metrics_stream = &metrics;
    }

    if (ti_folds > 1) {
      const std::vector<std::vector<std::size_t>> folds =
          kfold_partition(pair.train.count, ti_folds, img_spec.train.seed);
      std::vector<double> fold_acc;
      for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<std::size_t> train_idx;
        for (std::size_t g = 0; g < folds.size(); ++g)
          if (g != f)
            train_idx.insert(train_idx.end(), folds[g].begin(),
                             folds[g].end());
        const ImageDataset fold_train = select_images(pair.train, train_idx);
        const ImageDataset fold_val = select_images(pair.train, folds[f]);
        ImageTrainSpec fold_spec = img_spec;
        fold_spec.train.metrics_stream = nullptr;
        const ImageRunResult r =
            run_image_training(fold_spec, fold_train, fold_val);
        fold_acc.push_back(r.test_accuracy);
        std::cout << "fold " << f << ": held-out accuracy " << r.test_accuracy
                  << "\n";
      }
      const ExperimentReport rep = make_report(
          "cv", train_config_snapshot(img_spec.train), fold_acc);
      std::cout << "cross-validation: mean " << rep.mean << ", stddev "
                << rep.stddev << " over " << ti_folds << " folds\n";
    }

    const ImageRunResult run = run_image_training(img_spec, pair.train,
                                                  pair.test);
    std::cout << "train accuracy " << run.train_accuracy << ", test accuracy "
              << run.test_accuracy << " after " << run.epochs_run
              << " epochs\n";
    const auto best = std::max_element(run.epoch_test_accuracy.begin(),
                                       run.epoch_test_accuracy.end());
    if (best != run.epoch_test_accuracy.end())
      std::cout << "best test accuracy " << *best << " at epoch "
                << (best - run.epoch_test_accuracy.begin()) + 1 << "\n";
    if (!ti_out.empty()) {
      std::ostringstream meta;
      meta << "task = image\ndataset = " << ti_dataset
           << "\nrows = " << img_spec.image_rows
           << "\ncols = " << img_spec.image_cols
           << "\nd_mps = " << img_spec.head_bond
           << "\nd_mpo = " << img_spec.mpo_bond
           << "\nlayers = " << img_spec.mpo_layers
           << "\nactivation = " << ti_activation
           << "\npermute_seed = " << ti_permute_seed
           << "\ninit_seed = " << img_spec.init_seed << "\n"
           << train_config_snapshot(img_spec.train);
      save_checkpoint(ti_out, run.net, meta.str());
      std::cout << "saved " << ti_out << "\n";
    }
  });

  // ---- eval-image --------------------------------------------------------------
  auto* eval_image = app.add_subcommand(
      "eval-image",
      "Evaluate image checkpoints (several at once form an ensemble)");
  std::vector<std::string> ei_ckpts;
  std::string ei_dataset = "mnist", ei_dir, ei_ei, ei_el, ei_csv;
  std::string ei_sizes, ei_aspects;
  std::size_t ei_rows = 12, ei_cols = 12, ei_test_count = 1000;
  std::uint64_t ei_permute_seed = 0, ei_subset_seed = 17;
  eval_image->add_option("--config", config_path, "key = value defaults");
  eval_image->add_option("--checkpoint", ei_ckpts, "model(s) to evaluate")
      ->required();
  eval_image->add_option("--dataset", ei_dataset, "dataset name");
  eval_image->add_option("--data-dir", ei_dir, "directory with IDX files");
  eval_image->add_option("--test-images", ei_ei, "explicit IDX path");
  eval_image->add_option("--test-labels", ei_el, "explicit IDX path");
  eval_image->add_option("--test-size", ei_test_count,
                         "stratified test subset (0 = all)");
  eval_image->add_option("--subset-seed", ei_subset_seed, "subset draw seed");
  eval_image->add_option("--permute-seed", ei_permute_seed,
                         "fixed pixel permutation (0 = off)");
  eval_image->add_option("--rows", ei_rows, "base evaluation rows");
  eval_image->add_option("--cols", ei_cols, "base evaluation cols");
  eval_image->add_option("--resize", ei_sizes,
                         "extra square sizes to sweep, e.g. 8,10,14");
  eval_image->add_option("--aspect-sweep", ei_aspects,
                         "extra RxC shapes to sweep, e.g. 12x8,12x16");
  eval_image->add_option("--csv-out", ei_csv, "write rows,cols,accuracy");
  eval_image->callback([&] {
    std::vector<DeepTensorNetwork> nets;
    for (const std::string& p : ei_ckpts) nets.push_back(load_checkpoint(p));
    if (ei_dir.empty()) ei_dir = "data/" + ei_dataset;
    ImageDataset test = load_idx(
        !ei_ei.empty() ? ei_ei : ei_dir + "/t10k-images-idx3-ubyte",
        !ei_el.empty() ? ei_el : ei_dir + "/t10k-labels-idx1-ubyte");
    if (ei_test_count != 0)
      test = stratified_subset(test, ei_test_count, ei_subset_seed + 1);
    if (ei_permute_seed != 0) test = apply_permutation(test, ei_permute_seed);

    std::vector<std::pair<std::size_t, std::size_t>> shapes = {
        {ei_rows, ei_cols}};
    if (!ei_sizes.empty())
      for (std::size_t s : parse_size_list(ei_sizes, "--resize"))
        shapes.push_back({s, s});
    if (!ei_aspects.empty())
      for (const auto& rc : parse_shape_list(ei_aspects, "--aspect-sweep"))
        shapes.push_back(rc);

    std::vector<std::vector<std::string>> table;
    std::vector<std::vector<double>> csv;
    for (const auto& [r, c] : shapes) {
      const ClassifierData data = images_to_classifier_data(test, r, c);
      const double acc = ensemble_accuracy(nets, data);
      table.push_back({std::to_string(r) + "x" + std::to_string(c),
                       std::to_string(acc)});
      csv.push_back({static_cast<double>(r), static_cast<double>(c), acc});
    }
    std::cout << markdown_table({"shape", "accuracy"}, table);
    if (nets.size() > 1)
      std::cout << "(ensemble of " << nets.size() << " checkpoints)\n";
    if (!ei_csv.empty())
      write_csv(ei_csv, {"rows", "cols", "accuracy"}, csv);
  });

  // ---- verify-attention -----------------------------------------------------------
  auto* verify = app.add_subcommand(
      "verify-attention",
      "Check the pair-exchange layer against closed-form attention");
  std::string va_n_range = "3:8", va_d_range = "2:4";
  int va_trials = 100;
  double va_tol = 1e-10;
  std::uint64_t va_seed = 1;
  verify->add_option("--config", config_path, "key = value defaults");
  verify->add_option("--n-range", va_n_range, "sequence lengths LO:HI");
  verify->add_option("--d-range", va_d_range, "feature dimensions LO:HI");
  verify->add_option("--trials", va_trials, "random embeddings per (N,d)");
  verify->add_option("--tolerance", va_tol, "max allowed deviation");
  verify->add_option("--seed", va_seed, "embedding seed");
  verify->callback([&] {
    const auto [n_lo, n_hi] = parse_range(va_n_range, "--n-range");
    const auto [d_lo, d_hi] = parse_range(va_d_range, "--d-range");
    Rng rng(va_seed);
    bool pass = true;
    std::vector<std::vector<std::string>> table;
    for (std::size_t d = d_lo; d <= d_hi; ++d) {
      const Tensor eye = Tensor::identity(d);
      for (std::size_t n = n_lo; n <= n_hi; ++n) {
        double worst_pair = 0.0, worst_attn = 0.0;
        for (int t = 0; t < va_trials; ++t) {
          std::vector<Tensor> emb(n);
          for (std::size_t j = 0; j < n; ++j) {
            Tensor v{Shape{d}};
            for (std::size_t x = 0; x < d; ++x) v[x] = rng.normal();
            const double nrm = frobenius_norm(v);
            for (std::size_t x = 0; x < d; ++x) v[x] /= nrm;
            emb[j] = std::move(v);
          }
          const EquivalenceReport rep = verify_equivalence(emb, eye, eye);
          worst_pair = std::max(worst_pair, rep.pair_sum_deviation);
          worst_attn = std::max(worst_attn, rep.attention_deviation);
        }
        const bool ok = worst_pair < va_tol && worst_attn < va_tol;
        pass &= ok;
        std::ostringstream p, a;
        p.precision(3);
        a.precision(3);
        p << std::scientific << worst_pair;
        a << std::scientific << worst_attn;
        table.push_back({std::to_string(n), std::to_string(d), p.str(),
                         a.str(), ok ? "pass" : "FAIL"});
      }
    }
    std::cout << markdown_table(
        {"N", "d", "pair-sum dev", "attention dev", "status"}, table);
    std::cout << (pass ? "PASS" : "FAIL") << " (tolerance "
              << va_tol << ", " << va_trials << " trials per cell)\n";
    if (!pass) throw CLI::RuntimeError(1);
  });

  // ---- grad-check ----------------------------------------------------------------
  auto* gc = app.add_subcommand(
      "grad-check", "Compare reverse-mode gradients to finite differences");
  std::string gc_task = file_cfg.get_str("task", "sequence");
  std::string gc_activation = file_cfg.get_str("activation", "sigmoid");
  std::size_t gc_layers =
      static_cast<std::size_t>(file_cfg.get_int("layers", 1));
  std::size_t gc_bond = static_cast<std::size_t>(file_cfg.get_int("d_mpo", 3));
  std::size_t gc_head_bond =
      static_cast<std::size_t>(file_cfg.get_int("d_mps", 3));
  std::size_t gc_sites = static_cast<std::size_t>(file_cfg.get_int("sites", 5));
  std::uint64_t gc_seed =
      static_cast<std::uint64_t>(file_cfg.get_int("seed", 1));
  double gc_h = file_cfg.get_double("fd_step", 1e-5);
  double gc_tol = file_cfg.get_double("tolerance", 0.0);
  bool gc_residual = file_cfg.get_bool("residual", false);
  gc->add_option("--config", config_path, "key = value defaults");
  gc->add_option("--task", gc_task, "sequence|classifier");
  gc->add_option("--activation", gc_activation, "linear|sigmoid|matrix-exp");
  gc->add_option("--layers", gc_layers, "feature layers");
  gc->add_option("--d-mpo", gc_bond, "layer bond dimension");
  gc->add_option("--d-mps", gc_head_bond, "head bond dimension (classifier)");
  gc->add_option("--sites", gc_sites, "input length");
  gc->add_option("--seed", gc_seed, "instance seed");
  gc->add_option("--fd-step", gc_h, "finite-difference step scale");
  gc->add_option("--tolerance", gc_tol,
                 "fail above this max relative error (0 = report only)");
  gc->add_flag("--residual", gc_residual, "residual layers");
  gc->callback([&] {
    const Activation act = parse_activation(gc_activation);
    Rng rng(gc_seed);
    DeepTensorNetwork net;
    net.phys_dim = 2;
    MpoOptions opts;
    opts.activation = act;
    opts.residual = gc_residual;
    opts.normalize_contexts = true;
    for (std::size_t l = 0; l < gc_layers; ++l)
      net.layers.push_back(make_mpo_layer(2, gc_bond, 0, opts, 0.05, rng));
    std::vector<double> xs(gc_sites);
    for (double& v : xs) v = rng.uniform01();
    GradCheckResult res;
    if (gc_task == "classifier") {
      net.head = make_mps_head(3, 2, gc_head_bond, 0, 0.05, rng);
      res = grad_check_classifier(net, xs, rng.below(3), gc_h);
    } else if (gc_task == "sequence") {
      std::vector<double> targets(gc_sites);
      for (double& v : targets) v = rng.coin() ? 1.0 : 0.0;
      res = grad_check_sequence(net, xs, targets, gc_h);
    } else {
      throw std::runtime_error("--task must be sequence|classifier");
    }
    std::cout << "checked " << res.checked << " entries: max relative error "
              << res.max_rel << ", max absolute error " << res.max_abs << "\n";
    if (gc_tol > 0.0 && res.max_rel >= gc_tol) {
      std::cout << "FAIL (tolerance " << gc_tol << ")\n";
      throw CLI::RuntimeError(1);
    }
  });

  // ---- bench --------------------------------------------------------------------
  auto* bench = app.add_subcommand(
      "bench", "Time the factored forward pass across lengths and bonds");
  std::string be_n_range = "16:512", be_d_range = "16:32", be_csv;
  std::size_t be_rank = 2, be_doubling_sites = 128;
  std::uint64_t be_seed = 7;
  bench->add_option("--config", config_path, "key = value defaults");
  bench->add_option("--n-range", be_n_range,
                    "sequence lengths LO:HI (doubling steps)");
  bench->add_option("--d-mpo-range", be_d_range,
                    "bond dimensions LO:HI (doubling steps)");
  bench->add_option("--rank-g", be_rank, "boundary factor rank");
  bench->add_option("--doubling-sites", be_doubling_sites,
                    "length used for the bond-doubling ratio");
  bench->add_option("--seed", be_seed, "instance seed");
  bench->add_option("--csv-out", be_csv, "write D,N,seconds rows");
  bench->callback([&] {
    const auto [n_lo, n_hi] = parse_range(be_n_range, "--n-range");
    const auto [d_lo, d_hi] = parse_range(be_d_range, "--d-mpo-range");
    const std::vector<std::size_t> lengths = doubling_steps(n_lo, n_hi);
    std::vector<std::vector<double>> csv;
    std::vector<std::vector<std::string>> table;
    for (std::size_t D : doubling_steps(d_lo, d_hi)) {
      const BenchResult res = run_forward_bench(2, D, be_rank, lengths,
                                                be_doubling_sites, be_seed);
      for (const BenchPoint& p : res.sweep)
        csv.push_back({static_cast<double>(D),
                       static_cast<double>(p.num_sites), p.seconds});
      std::ostringstream r2, ratio;
      r2.precision(4);
      ratio.precision(3);
      r2 << res.r2_linear;
      ratio << res.doubling_ratio;
      table.push_back({std::to_string(D), r2.str(), ratio.str()});
    }
    std::cout << markdown_table(
        {"D", "R^2 of linear fit in N", "time ratio at 2D"}, table);
    if (!be_csv.empty()) write_csv(be_csv, {"D", "N", "seconds"}, csv);
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
} catch (const std::exception& e) {
  std::cerr << "error: " << e.what() << "\n";
  return 1;
}
