#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "vprune/dualgraph.hpp"
#include "vprune/types.hpp"

namespace vprune {

// One multi-head graph attention layer. Hidden layers concatenate the heads
// and apply ReLU; the output layer averages the heads and applies a sigmoid.
struct GatLayer {
    int heads = 1;
    int in_dim = 0;
    int out_dim = 0;
    bool average_heads = false;
    double leaky_slope = 0.2;
    std::vector<Eigen::MatrixXd> W;  // per head, out_dim x in_dim
    std::vector<Eigen::VectorXd> a;  // per head, 2*out_dim

    int output_width() const { return average_heads ? out_dim : heads * out_dim; }
};

struct GatHyper {
    int heads = 4;
    int hidden_dim = 16;
    double learning_rate = 5e-6;
    double weight_decay = 5e-4;
    int epochs = 3000;
    double threshold = 0.5;

    void validate() const;
};

struct GatModel {
    std::vector<GatLayer> layers;  // 4 hidden + 1 output
    // per-channel input standardization fitted on the training set
    Eigen::VectorXd feat_mean;
    Eigen::VectorXd feat_std;
    GatHyper hyper;
    std::uint64_t init_seed = 0;

    int input_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }

    // Xavier-uniform initialized 5-layer model (zero init when zero_init).
    static GatModel create(int in_dim, const GatHyper& hyper, std::uint64_t seed,
                           bool zero_init = false);
};

// Adjacency with self-loops plus the node feature matrix; the form every
// forward/backward routine consumes.
struct GatGraph {
    Eigen::MatrixXd features;                 // n x d, already standardized
    std::vector<std::vector<int>> neighbors;  // per node, sorted, includes self

    int n() const { return static_cast<int>(neighbors.size()); }

    // raw features from a dual graph; standardize() applies model statistics
    static GatGraph from_dual(const DualGraph& g);
    void standardize(const GatModel& model);
};

// Attention coefficients of one layer/head for the given features: softmax
// over each closed neighborhood of LeakyReLU(a^T [W h_i || W h_j]). Row i
// holds the coefficients aligned with graph.neighbors[i].
std::vector<std::vector<double>> attention_coefficients(const GatLayer& layer,
                                                        const GatGraph& graph, int head);

// Forward pass of a single layer.
Eigen::MatrixXd layer_forward(const GatLayer& layer, const GatGraph& graph,
                              const Eigen::MatrixXd& h);

// Full-model scores in (0,1), one per node.
Eigen::VectorXd forward_scores(const GatModel& model, const GatGraph& graph);

// predict() standardizes a dual graph with the model statistics and runs the
// forward pass.
std::vector<double> predict(const GatModel& model, const DualGraph& graph);

struct BceResult {
    double loss = 0.0;
    Eigen::VectorXd dscores;  // gradient wrt scores, mean reduction
};

// Mean binary cross entropy with soft targets; scores are clamped to
// [1e-7, 1-1e-7] before the logs.
BceResult bce_loss(const Eigen::VectorXd& scores, const Eigen::VectorXd& targets);

struct GatGrads {
    std::vector<std::vector<Eigen::MatrixXd>> dW;  // [layer][head]
    std::vector<std::vector<Eigen::VectorXd>> da;
    static GatGrads zeros_like(const GatModel& model);
};

// Exact reverse-mode gradients of the BCE loss wrt every W and a.
// Returns the loss as well; `scores_out`, when non-null, receives the forward
// scores.
double backward(const GatModel& model, const GatGraph& graph, const Eigen::VectorXd& targets,
                GatGrads& grads, Eigen::VectorXd* scores_out = nullptr);

struct AdamState {
    struct Moments {
        Eigen::MatrixXd mW, vW;
        Eigen::VectorXd ma, va;
    };
    std::vector<std::vector<Moments>> layers;  // [layer][head]
    long long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState zeros_like(const GatModel& model);
};

// Decoupled weight decay followed by a bias-corrected Adam update.
void adam_step(GatModel& model, const GatGrads& grads, AdamState& state, double lr, double wd);

struct TrainSample {
    GatGraph graph;                 // raw (unstandardized) features
    Eigen::VectorXd targets;
};

struct TrainResult {
    std::vector<double> loss_history;  // mean loss per epoch
};

// Fits the feature standardization on the dataset, then runs per-graph
// full-batch Adam steps with a seeded shuffle each epoch. Throws
// NumericalError when the loss turns non-finite.
TrainResult train(GatModel& model, const std::vector<TrainSample>& dataset, int epochs,
                  std::uint64_t shuffle_seed);

// Checkpoint: magic+version, JSON header, little-endian f32 parameter blob in
// layer/head order (W row-major, then a).
void checkpoint_save(const std::filesystem::path& path, const GatModel& model);
GatModel checkpoint_load(const std::filesystem::path& path);

}  // namespace vprune
