#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "pllab/datagen.hpp"
#include "pllab/losses.hpp"
#include "pllab/models.hpp"

namespace pllab {

/// Stop when the train loss has not improved by min_delta for patience
/// consecutive recorded epochs. Off by default.
struct EarlyStop {
    double min_delta = 0.0;
    int patience = 10;
};

struct TrainConfig {
    TrainConfig() {
        params.tolerant = true;          // training touches the simplex boundary
        params.libra_fit_weight = true;  // w_Lib stabilizer; keeps libra bounded near fit
    }

    LossKind kind = LossKind::Libra;
    LossParams params;
    double learning_rate = 0.1;
    int epochs = 100;
    int batch_size = 0;  // 0 means full batch
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    int eval_every = 1;
    std::optional<EarlyStop> early_stop;
    bool average_batch = true;  // per-batch gradient is the mean over samples
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;  // NaN when the dataset carries no truth labels
    double test_acc = 0.0;   // NaN without an eval split
    double p_pos = 0.0;
    double p_neg = 0.0;      // NaN without negative sets
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

/// Epochs of (shuffled) mini-batch SGD: forward, loss gradient on the logits,
/// backprop, parameter step. Deterministic given the config seed. Negative
/// label sets present in the dataset contribute the sampled negative term
/// whenever params.neg_gamma > 0. A non-finite loss aborts with a diagnostic
/// naming the sample and step.
TrainHistory train(const Dataset& data, Model& model, const TrainConfig& config,
                   const Dataset* eval_data = nullptr);

/// Index of the largest entry, ties broken by lowest index.
int argmax_index(std::span<const double> v);

/// Fraction of samples whose predicted argmax equals y_true.
double accuracy(const Model& model, const Dataset& data);

/// Mean over samples of the model mass on allowed outputs.
double p_pos(const Model& model, const Dataset& data);

/// Mean over samples of the model mass on the union of the negative sets.
double p_neg(const Model& model, const Dataset& data, const std::vector<LabelVector>& neg_sets);

enum class HitTarget { Allowed, Forbidden };

/// Fraction of samples whose exact top-k outputs (ties by lowest index)
/// intersect the target set: the sample's allowed set, or the union of the
/// negative sets.
double hit_at_k(const Model& model, const Dataset& data, int k, HitTarget target,
                const std::vector<LabelVector>* neg_sets = nullptr);

struct SeedOutcome {
    std::uint64_t seed = 0;
    bool success = false;
    double p_pos = 0.0;
    double train_acc = 0.0;  // NaN without truth labels
    std::string error;       // training failure, recorded rather than fatal
};

struct SweepReport {
    std::vector<SeedOutcome> outcomes;
    double success_rate = 0.0;  // successes / seeds
};

using ModelFactory = std::function<std::unique_ptr<Model>(Rng&)>;

/// Trains one fresh model per seed (model init and the train loop both derive
/// from that seed) and reports the fraction of seeds whose trained model puts
/// its argmax on optimal_output at the dataset's canonical input (the first
/// sample's x). Seeds run concurrently on `threads` workers (0 = hardware).
SweepReport sweep(const Dataset& data, const ModelFactory& factory, const TrainConfig& config,
                  std::span<const std::uint64_t> seeds, std::optional<int> optimal_output,
                  int threads = 0);

/// CSV columns: epoch, train_loss, train_acc, test_acc, p_pos, p_neg.
void write_history_csv(const TrainHistory& history, std::ostream& out);
/// CSV columns: seed, success, p_pos, train_acc, error.
void write_sweep_csv(const SweepReport& report, std::ostream& out);

}  // namespace pllab
