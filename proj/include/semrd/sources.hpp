#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "semrd/core.hpp"
#include "semrd/samples.hpp"

namespace semrd {

// Jointly Gaussian source: X ~ N(0, k_x) and S = h X + W with W ~ N(0, k_w).
struct GaussianSourceSpec {
    Eigen::MatrixXd k_x;  // covariance of X
    Eigen::MatrixXd h;    // linear map into the semantic space
    Eigen::MatrixXd k_w;  // noise covariance
    std::uint64_t seed = 1;

    Eigen::Index x_dim() const { return k_x.rows(); }
    Eigen::Index s_dim() const { return k_w.rows(); }
};

// The 3-to-2 dimensional benchmark instance used across the test suite.
GaussianSourceSpec benchmark_gaussian();

// n1 draws of X with n2 conditional draws of S each, Cholesky-based and
// deterministic per spec.seed.  The latent bank is left empty.
SampleSet sample_gaussian(const GaussianSourceSpec& spec, Eigen::Index n1, Eigen::Index n2);

// Per-axis quantization of the observation and semantic spaces.
struct DiscretizationGrid {
    std::vector<int> x_levels;                          // >= 2 each
    std::vector<std::pair<double, double>> x_bounds;    // [lo, hi] per coordinate
    std::vector<int> s_levels;
    std::vector<std::pair<double, double>> s_bounds;
};

// levels per coordinate, bounds at +-4 marginal standard deviations.
DiscretizationGrid default_grid(const GaussianSourceSpec& spec, int x_levels, int s_levels);

// Discrete stand-in built by Monte-Carlo histogram over the grid cells.
// Representatives are cell centers; draws beyond a bound land in the edge
// cell.
struct DiscretizedSource {
    DiscreteSemanticSource source;
    Eigen::MatrixXd x_reps;  // |X| x x_dim cell centers
    Eigen::MatrixXd s_reps;  // |S| x s_dim
};

DiscretizedSource discretize_gaussian(const GaussianSourceSpec& spec,
                                      const DiscretizationGrid& grid,
                                      Eigen::Index mc_samples = 1000000);

// Squared-error distortion tables on the cell representatives; reproduction
// grids default to the source grids.
DistortionSpec discretized_distortions(const DiscretizedSource& d);

// Draws (observation, semantic) samples from a discretized source, emitting
// cell-center values; used when the sample-based estimator must see exactly
// the same source as the exact solver.
SampleSet sample_discretized(const DiscretizedSource& d, Eigen::Index n1, Eigen::Index n2,
                             std::uint64_t seed);

// Balanced Gaussian-mixture labels: class c gets mean means.row(c), shared
// covariance cov.
LabeledDataset synth_labeled(int k_classes, const Eigen::MatrixXd& means,
                             const Eigen::MatrixXd& cov, Eigen::Index n, std::uint64_t seed);

enum class SampleFormat { csv, jsonl };

using LoadedSamples = std::variant<SampleSet, LabeledDataset>;

// Header x0..x{p-1},s0..s{q-1} yields a SampleSet (n2 = 1); header
// x0..x{p-1},label yields a LabeledDataset.  ParseError carries the line.
LoadedSamples load_samples(const std::string& path, SampleFormat format);

void save_samples(const std::string& path, const SampleSet& samples, SampleFormat format);
void save_samples(const std::string& path, const LabeledDataset& data, SampleFormat format);

}  // namespace semrd
