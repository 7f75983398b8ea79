#pragma once
// Gradient-boosted regression trees, built in-house: 96 MISO ensembles (one
// per step ahead), an optional energy-imbalance-aware second stage, metrics,
// hyper-parameter search and JSON persistence. Exact split search is the
// default (deterministic and oracle-friendly); a histogram mode with 8-bit
// feature codes is available for large runs.

#include <cstdint>
#include <string>
#include <vector>

#include "flexpool/dataset.hpp"
#include "flexpool/signals.hpp"

namespace flexpool {

// ---------------------------------------------------------------------------
// Trees

struct TreeParams {
    int max_depth = 4;
    int min_samples_leaf = 5;
    bool histogram = false;  // exact split search by default
    int n_bins = 256;

    void validate() const;
};

struct TreeNode {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;  // x[feature] <= threshold goes left
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf prediction
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root; empty means value 0

    double predict(const std::vector<double>& x) const;
};

// Greedy variance-reduction fit on feature-major columns. Ties between equal
// gains break toward the lowest feature index, then the lowest threshold.
RegressionTree fit_tree(const std::vector<std::vector<double>>& cols, const std::vector<double>& y,
                        const TreeParams& params);

// ---------------------------------------------------------------------------
// Boosted ensembles

struct BoostParams {
    double learning_rate = 0.1;
    int n_trees = 100;
    TreeParams tree;
    double colsample = 1.0;  // per-tree feature subsampling; 1 = off
    std::uint64_t seed = 0;

    void validate() const;
};

struct Ensemble {
    double base_score = 0.0;  // training-target mean (F_0)
    double learning_rate = 0.1;
    std::vector<RegressionTree> trees;
    std::vector<double> train_mse;  // per boosting round (not serialized)

    double predict(const std::vector<double>& x) const;
};

Ensemble fit_ensemble(const std::vector<std::vector<double>>& cols, const std::vector<double>& y,
                      const BoostParams& params);

// ---------------------------------------------------------------------------
// 96-step model bank

struct TreeEnsembleModel {
    std::vector<Ensemble> per_step;  // size 96
    std::vector<std::string> feature_names;
    std::uint64_t schema_hash = 0;

    std::vector<double> predict_row(const std::vector<double>& x) const;  // 96 values
};

TreeEnsembleModel fit_model(const Dataset& train, const BoostParams& params, int n_threads = 0);

// Batch convenience; row i of the result equals predict_row(ds.row(i)).
std::vector<std::vector<double>> predict_dataset(const TreeEnsembleModel& model, const Dataset& ds,
                                                 int n_threads = 0);

// Prediction at anchor t with the day-ahead signal replaced by s_override
// (s-derived features are recomputed; nullptr keeps the embedded signal).
// ctx.s is restored before returning.
std::vector<double> predict_with_override(const TreeEnsembleModel& model, FeatureContext& ctx, long t,
                                          const ForceOffSignal* s_override);

// ---------------------------------------------------------------------------
// Partial evaluation for fast signal scans: features >= n_free are fixed to
// x_fixed's values; each tree collapses along fixed-feature branches. Trees
// that reduce to constants fold into per-step offsets; learning rate is
// folded into the surviving leaves.
struct SpecializedModel {
    int n_free = kNumSignalFeatures;
    std::vector<double> offsets;                     // [96]
    std::vector<std::vector<RegressionTree>> trees;  // [96]

    double predict_step(int h, const std::vector<double>& x) const;  // h in [0,96)
    std::vector<double> predict(const std::vector<double>& x) const;
};

SpecializedModel specialize(const TreeEnsembleModel& model, const std::vector<double>& x_fixed,
                            int n_free = kNumSignalFeatures);

// ---------------------------------------------------------------------------
// Energy-aware two-stage variant

struct EnergyAwareModel {
    TreeEnsembleModel stage1;
    TreeEnsembleModel stage2;  // features = stage1 features + 96 imbalance columns
};

// Imbalance features: stage1 prediction with the row's signal minus the
// prediction with the signal zeroed (all s-derived columns set to 0).
std::vector<double> imbalance_features(const TreeEnsembleModel& stage1, const std::vector<double>& x);

EnergyAwareModel fit_energy_aware(const Dataset& train, const BoostParams& params, int n_threads = 0);
// Variant reusing an already-fitted (frozen) first stage.
EnergyAwareModel fit_energy_aware(const Dataset& train, const BoostParams& stage2_params,
                                  TreeEnsembleModel stage1, int n_threads = 0);

std::vector<double> predict_energy_aware(const EnergyAwareModel& model, const std::vector<double>& x);

// ---------------------------------------------------------------------------
// Metrics

// Horizon-normalized MAE: sum |y - y_hat| / sum |y|.
double nmae(const std::vector<double>& y, const std::vector<double>& y_hat);

struct EnergyImbalance {
    double delta_rel_E = 0;         // (sum y_hat(s) - sum y) / sum y
    double delta_rel_noctrl_E = 0;  // (sum y_hat(s) - sum y_hat(s0)) / sum y
};

EnergyImbalance energy_imbalance(const std::vector<double>& y, const std::vector<double>& y_hat_s,
                                 const std::vector<double>& y_hat_s0);

// ---------------------------------------------------------------------------
// Hyper-parameter search: seeded random search over log-uniform
// lr in [0.01, 0.3] and n_estimators in [50, 1000], scored by mean k-fold CV
// nMAE on representative step-aheads; one pair shared by all 96 models.
struct TuneResult {
    double learning_rate = 0.1;
    int n_trees = 100;
    double cv_score = 0.0;
};

TuneResult tune(const Dataset& train, int budget, int folds, std::uint64_t seed,
                const TreeParams& tree_params, int n_threads = 0);

// ---------------------------------------------------------------------------
// Persistence (versioned JSON; doubles survive round trips bit-exactly)

void save_model_json(const std::string& path, const TreeEnsembleModel& model);
TreeEnsembleModel load_model_json(const std::string& path);
void save_energy_aware_json(const std::string& path, const EnergyAwareModel& model);
EnergyAwareModel load_energy_aware_json(const std::string& path);

}  // namespace flexpool
