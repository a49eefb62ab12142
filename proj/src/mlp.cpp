#include "semrd/mlp.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "semrd/error.hpp"
#include "semrd/numerics.hpp"

namespace semrd {

Mlp Mlp::init(const std::vector<int>& layer_sizes, std::uint64_t seed) {
    if (layer_sizes.size() < 2) throw DomainError("a network needs at least two layers");
    for (int s : layer_sizes)
        if (s < 1) throw DomainError("layer sizes must be positive");

    Mlp mlp;
    mlp.sizes_ = layer_sizes;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int fan_in = layer_sizes[l];
        const int fan_out = layer_sizes[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j)
                w(i, j) = bound * (2.0 * rng.uniform() - 1.0);
        mlp.w_.push_back(std::move(w));
        mlp.b_.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return mlp;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input) const {
    Cache cache;
    return forward(input, cache);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, Cache& cache) const {
    if (input.cols() != input_dim()) throw DimensionMismatch("input width mismatch");
    cache.activations.clear();
    cache.activations.reserve(w_.size() + 1);
    cache.activations.push_back(input);
    Eigen::MatrixXd h = input;
    for (std::size_t l = 0; l < w_.size(); ++l) {
        Eigen::MatrixXd pre = (h * w_[l].transpose()).rowwise() + b_[l].transpose();
        if (l + 1 < w_.size()) pre = pre.array().tanh();
        cache.activations.push_back(pre);
        h = std::move(pre);
    }
    return cache.activations.back();
}

Mlp::Grads Mlp::zero_grads() const {
    Grads g;
    for (std::size_t l = 0; l < w_.size(); ++l) {
        g.w.emplace_back(Eigen::MatrixXd::Zero(w_[l].rows(), w_[l].cols()));
        g.b.emplace_back(Eigen::VectorXd::Zero(b_[l].size()));
    }
    return g;
}

void Mlp::Grads::scale(double f) {
    for (auto& m : w) m *= f;
    for (auto& v : b) v *= f;
}

void Mlp::Grads::add_scaled(const Grads& other, double f) {
    for (std::size_t l = 0; l < w.size(); ++l) {
        w[l] += f * other.w[l];
        b[l] += f * other.b[l];
    }
}

double Mlp::Grads::get_parameter(std::size_t index) const {
    for (std::size_t l = 0; l < w.size(); ++l) {
        if (index < static_cast<std::size_t>(w[l].size())) return w[l].data()[index];
        index -= static_cast<std::size_t>(w[l].size());
        if (index < static_cast<std::size_t>(b[l].size())) return b[l].data()[index];
        index -= static_cast<std::size_t>(b[l].size());
    }
    throw DomainError("parameter index out of range");
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& d_output,
                              Grads& grads) const {
    if (cache.activations.size() != w_.size() + 1)
        throw DimensionMismatch("cache does not match this network");
    Eigen::MatrixXd delta = d_output;  // d loss / d pre-activation of the top layer
    for (std::size_t l = w_.size(); l-- > 0;) {
        const Eigen::MatrixXd& below = cache.activations[l];
        grads.w[l] += delta.transpose() * below;
        grads.b[l] += delta.colwise().sum().transpose();
        if (l == 0) {
            delta = delta * w_[l];
            break;
        }
        // tanh'(x) = 1 - tanh(x)^2, and the cache stores tanh(x) itself
        delta = (delta * w_[l]).array() * (1.0 - cache.activations[l].array().square());
    }
    return delta;
}

void Mlp::apply_update(const Grads& grads, double learning_rate, double momentum,
                       Grads& velocity) {
    for (std::size_t l = 0; l < w_.size(); ++l) {
        velocity.w[l] = momentum * velocity.w[l] - learning_rate * grads.w[l];
        velocity.b[l] = momentum * velocity.b[l] - learning_rate * grads.b[l];
        w_[l] += velocity.w[l];
        b_[l] += velocity.b[l];
    }
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < w_.size(); ++l)
        n += static_cast<std::size_t>(w_[l].size() + b_[l].size());
    return n;
}

double Mlp::get_parameter(std::size_t index) const {
    for (std::size_t l = 0; l < w_.size(); ++l) {
        if (index < static_cast<std::size_t>(w_[l].size()))
            return w_[l].data()[index];
        index -= static_cast<std::size_t>(w_[l].size());
        if (index < static_cast<std::size_t>(b_[l].size()))
            return b_[l].data()[index];
        index -= static_cast<std::size_t>(b_[l].size());
    }
    throw DomainError("parameter index out of range");
}

void Mlp::set_parameter(std::size_t index, double value) {
    for (std::size_t l = 0; l < w_.size(); ++l) {
        if (index < static_cast<std::size_t>(w_[l].size())) {
            w_[l].data()[index] = value;
            return;
        }
        index -= static_cast<std::size_t>(w_[l].size());
        if (index < static_cast<std::size_t>(b_[l].size())) {
            b_[l].data()[index] = value;
            return;
        }
        index -= static_cast<std::size_t>(b_[l].size());
    }
    throw DomainError("parameter index out of range");
}

namespace {

void write_doubles(std::ostream& out, const double* data, Eigen::Index n) {
    char buf[40];
    for (Eigen::Index i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", data[i]);
        out << buf << (i + 1 == n ? '\n' : ' ');
    }
}

}  // namespace

void Mlp::save(std::ostream& out) const {
    out << "layers";
    for (int s : sizes_) out << ' ' << s;
    out << '\n';
    for (std::size_t l = 0; l < w_.size(); ++l) {
        out << "w" << l << '\n';
        write_doubles(out, w_[l].data(), w_[l].size());
        out << "b" << l << '\n';
        write_doubles(out, b_[l].data(), b_[l].size());
    }
}

Mlp Mlp::load(std::istream& in) {
    std::string tag;
    in >> tag;
    if (tag != "layers") throw ParseError("expected 'layers' in checkpoint", -1);
    std::string line;
    std::getline(in, line);
    std::istringstream sizes_in(line);
    std::vector<int> sizes;
    int s;
    while (sizes_in >> s) sizes.push_back(s);
    Mlp mlp = Mlp::init(sizes, 0);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        in >> tag;
        if (tag != "w" + std::to_string(l)) throw ParseError("bad weight tag in checkpoint", -1);
        for (Eigen::Index i = 0; i < mlp.w_[l].size(); ++i) in >> mlp.w_[l].data()[i];
        in >> tag;
        if (tag != "b" + std::to_string(l)) throw ParseError("bad bias tag in checkpoint", -1);
        for (Eigen::Index i = 0; i < mlp.b_[l].size(); ++i) in >> mlp.b_[l].data()[i];
    }
    if (!in) throw ParseError("truncated checkpoint", -1);
    return mlp;
}

GenerativeNetwork make_generative_network(const std::vector<int>& layer_sizes, int shat_dim,
                                          int xhat_dim, std::uint64_t seed) {
    if (layer_sizes.back() != shat_dim + xhat_dim)
        throw DimensionMismatch("output layer must equal shat_dim + xhat_dim");
    GenerativeNetwork g;
    g.net = Mlp::init(layer_sizes, seed);
    g.shat_dim = shat_dim;
    g.xhat_dim = xhat_dim;
    return g;
}

void save_network(const std::string& path, const GenerativeNetwork& net, std::uint64_t seed,
                  const std::string& config_hash) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot open checkpoint for writing: " + path);
    out << "semrd-checkpoint v1\n";
    out << "shat_dim " << net.shat_dim << '\n';
    out << "xhat_dim " << net.xhat_dim << '\n';
    out << "seed " << seed << '\n';
    out << "config_hash " << (config_hash.empty() ? "-" : config_hash) << '\n';
    net.net.save(out);
}

LoadedNetwork load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open checkpoint: " + path);
    std::string magic, version;
    in >> magic >> version;
    if (magic != "semrd-checkpoint" || version != "v1")
        throw ParseError("not a recognized checkpoint file", 1);
    LoadedNetwork loaded;
    std::string tag;
    in >> tag >> loaded.net.shat_dim;
    if (tag != "shat_dim") throw ParseError("bad checkpoint header", 2);
    in >> tag >> loaded.net.xhat_dim;
    if (tag != "xhat_dim") throw ParseError("bad checkpoint header", 3);
    in >> tag >> loaded.seed;
    if (tag != "seed") throw ParseError("bad checkpoint header", 4);
    in >> tag >> loaded.config_hash;
    if (tag != "config_hash") throw ParseError("bad checkpoint header", 5);
    if (loaded.config_hash == "-") loaded.config_hash.clear();
    loaded.net.net = Mlp::load(in);
    return loaded;
}

}  // namespace semrd
