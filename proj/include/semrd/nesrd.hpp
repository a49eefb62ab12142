#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "semrd/core.hpp"
#include "semrd/dual.hpp"
#include "semrd/mlp.hpp"
#include "semrd/samples.hpp"

namespace semrd {

// Semantic-axis distortion used by the sample-based estimator; the
// observation axis is always squared error.  Both choices admit exact
// per-observation sufficient statistics, so the inner conditional average
// never re-touches the n2 raw draws.
enum class SemanticLoss { squared_error, cross_entropy };

struct TrainConfig {
    double learning_rate = 1e-4;
    int epochs = 50;
    int batch_n1 = 256;
    int batch_m = 256;
    double momentum = 0.9;  // 0 disables
    std::uint64_t seed = 1;
};

// Per-observation statistics of the n2 semantic draws.
struct SemanticStats {
    Eigen::MatrixXd mean;     // n1 x s_dim
    Eigen::VectorXd mean_sq;  // n1, mean squared norm (squared-error only)
};

SemanticStats semantic_stats(const SampleSet& samples);

// Sample-based training loss at (alpha1, alpha2): the per-observation
// log-average of exponentiated distortions against the generated bank,
// negated.  Nonnegative when both multipliers are nonpositive, exactly zero
// at the origin.  Uses batch.latent_bank as the z-batch.
double nesrd_loss(const GenerativeNetwork& net, const SampleSet& batch, const DualParams& params,
                  SemanticLoss sem);

// Exact reverse-mode gradient of nesrd_loss in the network parameters.
Mlp::Grads nesrd_loss_grad(const GenerativeNetwork& net, const SampleSet& batch,
                           const DualParams& params, SemanticLoss sem,
                           double* loss_out = nullptr);

struct TrainResult {
    GenerativeNetwork net;
    std::vector<double> epoch_loss;  // mean step loss per epoch
    bool diverged = false;           // loss left the finite range; net holds last finite state
};

// Minibatch descent on nesrd_loss: per step an observation batch, its
// semantic statistics, and a fresh latent batch.  Deterministic per seed.
TrainResult train_nesrd(const SampleSet& samples, const DualParams& params,
                        const TrainConfig& cfg, GenerativeNetwork net, SemanticLoss sem);

// Plug-in surface point from a trained network and held-out samples: the
// softmax-weighted empirical distortions and the rate identity
// rate = a1 d_o + a2 d_s + loss, all three sharing one set of weights.
RDPoint estimate_point(const GenerativeNetwork& net, const SampleSet& eval,
                       const DualParams& params, SemanticLoss sem);

// --- cascade variant for labeled data (S = h(X)) ---------------------------

// Generator (latent -> observation) chained into a classifier whose softmax
// output reproduces the label distribution.
struct CascadeNetwork {
    Mlp generator;
    Mlp classifier;
    int class_count = 0;
};

CascadeNetwork make_cascade_network(const std::vector<int>& generator_layers,
                                    const std::vector<int>& classifier_layers, int class_count,
                                    std::uint64_t seed);

// Loss of the chained network on labeled pairs: squared error on the
// observation axis, cross entropy on the class axis, one semantic draw per
// observation.  Classifier outputs are floored at 1e-12 inside the logs.
double cascade_loss(const CascadeNetwork& net, const Eigen::MatrixXd& obs_batch,
                    const Eigen::MatrixXd& labels_one_hot, const Eigen::MatrixXd& z_batch,
                    const DualParams& params);

struct CascadeGrads {
    Mlp::Grads generator;
    Mlp::Grads classifier;
};

CascadeGrads cascade_loss_grad(const CascadeNetwork& net, const Eigen::MatrixXd& obs_batch,
                               const Eigen::MatrixXd& labels_one_hot,
                               const Eigen::MatrixXd& z_batch, const DualParams& params,
                               double* loss_out = nullptr);

struct CascadeTrainConfig {
    TrainConfig joint;        // settings for the chained phase
    int generator_epochs = 20;
    int classifier_epochs = 20;
    double generator_lr = 1e-2;
    double classifier_lr = 1e-1;
    Eigen::Index eval_latents = 2048;
};

struct CascadeResult {
    CascadeNetwork net;
    RDPoint point;
    std::vector<double> joint_loss;
    bool diverged = false;
};

// Pretrains the generator by matching batch mean/covariance of its output to
// the data, pretrains the classifier on the labels, then descends on
// cascade_loss and evaluates the plug-in point.
CascadeResult train_cascade(const LabeledDataset& data, const DualParams& params,
                            const CascadeTrainConfig& cfg, CascadeNetwork net);

// --- consistency diagnostics ----------------------------------------------

struct ConsistencyRow {
    Eigen::Index n1 = 0;
    Eigen::Index n2 = 0;
    Eigen::Index m = 0;
    double mean_abs_err_nats = 0.0;
};

using SampleSource = std::function<SampleSet(Eigen::Index n1, Eigen::Index n2, Eigen::Index m,
                                             std::uint64_t seed)>;

// Trains and estimates `repeats` times per size against a fixed reference
// rate; reports the mean absolute rate error per size row.
std::vector<ConsistencyRow> consistency_sweep(const SampleSource& sampler,
                                              const DualParams& params,
                                              const std::vector<std::array<Eigen::Index, 3>>& sizes,
                                              int repeats, double reference_rate_nats,
                                              const std::vector<int>& layer_sizes, int shat_dim,
                                              int xhat_dim, const TrainConfig& cfg,
                                              SemanticLoss sem);

}  // namespace semrd
