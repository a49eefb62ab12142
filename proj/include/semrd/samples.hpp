#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace semrd {

// Empirical view of a semantic source: n1 observations, n2 semantic draws per
// observation, and a bank of latent vectors for the generative estimator.
struct SampleSet {
    Eigen::MatrixXd observations;      // n1 x x_dim
    Eigen::MatrixXd semantic_samples;  // (n1 * n2) x s_dim, row i*n2 + j
    Eigen::Index n2 = 1;
    Eigen::MatrixXd latent_bank;       // m x latent_dim, may be empty
    std::uint64_t seed = 0;

    Eigen::Index n1() const { return observations.rows(); }
    Eigen::Index x_dim() const { return observations.cols(); }
    Eigen::Index s_dim() const { return semantic_samples.cols(); }
    Eigen::Index latent_count() const { return latent_bank.rows(); }
};

// Labeled data for the deterministic-semantics case S = h(X).
struct LabeledDataset {
    Eigen::MatrixXd observations;  // n x x_dim
    std::vector<int> labels;       // values in [0, class_count)
    int class_count = 0;
    bool deterministic = true;

    Eigen::Index size() const { return observations.rows(); }

    Eigen::MatrixXd one_hot() const {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(size(), class_count);
        for (Eigen::Index i = 0; i < size(); ++i) h(i, labels[static_cast<std::size_t>(i)]) = 1.0;
        return h;
    }
};

// Standard-normal latent coordinates.
struct LatentSpec {
    int dim = 10;
};

// count x dim matrix of independent standard normals, deterministic per seed.
Eigen::MatrixXd sample_latents(int dim, Eigen::Index count, std::uint64_t seed);

}  // namespace semrd
