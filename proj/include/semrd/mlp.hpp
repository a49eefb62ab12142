#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace semrd {

// Fully connected network: tanh on hidden layers, identity on the output.
// Forward/backward are written out by hand; samples are matrix rows.
class Mlp {
  public:
    Mlp() = default;

    // Uniform init on +-sqrt(6 / (fan_in + fan_out)) per layer.
    static Mlp init(const std::vector<int>& layer_sizes, std::uint64_t seed);

    const std::vector<int>& layer_sizes() const { return sizes_; }
    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return sizes_.back(); }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const;

    // Activations kept for the backward pass: cache[0] is the input, cache[L]
    // the output.
    struct Cache {
        std::vector<Eigen::MatrixXd> activations;
    };

    Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Cache& cache) const;

    struct Grads {
        std::vector<Eigen::MatrixXd> w;
        std::vector<Eigen::VectorXd> b;

        void scale(double f);
        void add_scaled(const Grads& other, double f);
        // Same flat indexing as Mlp::get_parameter.
        double get_parameter(std::size_t index) const;
    };

    Grads zero_grads() const;

    // Accumulates parameter gradients for d(loss)/d(output) and returns
    // d(loss)/d(input).
    Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& d_output,
                             Grads& grads) const;

    // Plain SGD step with momentum; velocity lives with the caller.
    void apply_update(const Grads& grads, double learning_rate, double momentum, Grads& velocity);

    std::size_t parameter_count() const;
    // Flat views used by the finite-difference tests.
    double get_parameter(std::size_t index) const;
    void set_parameter(std::size_t index, double value);

    const std::vector<Eigen::MatrixXd>& weights() const { return w_; }
    const std::vector<Eigen::VectorXd>& biases() const { return b_; }

    void save(std::ostream& out) const;
    static Mlp load(std::istream& in);

  private:
    std::vector<int> sizes_;
    std::vector<Eigen::MatrixXd> w_;  // w_[l]: sizes_[l+1] x sizes_[l]
    std::vector<Eigen::VectorXd> b_;
};

// Generator with a split output: the first shat_dim columns reproduce the
// semantic state, the remaining xhat_dim columns the observation.
struct GenerativeNetwork {
    Mlp net;
    int shat_dim = 0;
    int xhat_dim = 0;

    Eigen::MatrixXd semantic_head(const Eigen::MatrixXd& output) const {
        return output.leftCols(shat_dim);
    }
    Eigen::MatrixXd observation_head(const Eigen::MatrixXd& output) const {
        return output.rightCols(xhat_dim);
    }
};

GenerativeNetwork make_generative_network(const std::vector<int>& layer_sizes, int shat_dim,
                                          int xhat_dim, std::uint64_t seed);

// Versioned textual checkpoint; round-trips parameters bit-exactly.
void save_network(const std::string& path, const GenerativeNetwork& net, std::uint64_t seed,
                  const std::string& config_hash);

struct LoadedNetwork {
    GenerativeNetwork net;
    std::uint64_t seed = 0;
    std::string config_hash;
};

LoadedNetwork load_network(const std::string& path);

}  // namespace semrd
