#pragma once

#include "nester/eval.hpp"
#include "nester/model.hpp"

#include <iosfwd>
#include <optional>

namespace nester {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepStats {
  Real loss_outer = 0;
  Real loss_inner = 0;
  Real loss_total = 0;
};

/// One gradient step per parameter group: plain steepest descent for the
/// flat group (representation + flat encoder + CRF), Adam for the graph
/// group. The flat group is driven by the outer loss only; the graph group
/// by the total loss. Gradients are jointly clipped at global norm 5.
class Trainer {
 public:
  explicit Trainer(Model& model);

  StepStats train_step(const std::vector<const AnnotatedSentence*>& batch);

  Model& model;
  std::mt19937_64 rng;

  static constexpr Real kClipNorm = 5.0;
  static constexpr Real kAdamBeta1 = 0.9;
  static constexpr Real kAdamBeta2 = 0.999;
  static constexpr Real kAdamEps = 1e-8;

  // Adam slots, aligned with model.graph_group().
  std::vector<Mat> adam_m, adam_v;
  std::uint64_t adam_t = 0;

 private:
  std::vector<Tensor> flat_params_;
  std::vector<Tensor> graph_params_;
};

struct EpochRecord {
  Index epoch = 0;
  Real loss_outer = 0, loss_inner = 0, loss_total = 0;
  bool has_dev = false;
  PRF dev;
};

struct TrainOptions {
  Index epochs = 0;             // 0: use model.hp.epochs
  bool early_stop = true;
  Index patience = 10;
  std::string checkpoint_path;  // best-dev (or final) checkpoint when set
  std::ostream* progress = nullptr;
};

/// Epoch loop: seeded shuffling, mini-batches, optional dev scoring with
/// early stopping on combined F1.
std::vector<EpochRecord> run_training(Model& model, Trainer& trainer, const Corpus& train,
                                      const Corpus* dev, const TrainOptions& options);

void save_checkpoint(const Model& model, const Trainer* trainer, const std::string& path);
/// Rebuilds a model from a checkpoint (optimizer slots are skipped).
std::unique_ptr<Model> load_checkpoint(const std::string& path);
/// Loads parameters (and optimizer slots when a trainer is given) into an
/// existing model; label inventories must match.
void load_checkpoint_into(Model& model, Trainer* trainer, const std::string& path);

}  // namespace nester
