#include "semrd/nesrd.hpp"

#include <cmath>

#include "semrd/error.hpp"
#include "semrd/numerics.hpp"

namespace semrd {

namespace {

constexpr double kCrossEntropyFloor = 1e-12;

void check_alpha(const DualParams& p) {
    if (p.alpha1 > 0.0 || p.alpha2 > 0.0)
        throw DomainError("dual multipliers must be nonpositive");
}

// Pairwise distortions between an observation batch and the generated bank.
// d_s is the conditional average over the n2 semantic draws, computed from
// sufficient statistics: both supported distortions are at most quadratic in
// the semantic sample.
struct PairBatch {
    Eigen::MatrixXd d_o;  // B x M
    Eigen::MatrixXd d_s;  // B x M
};

PairBatch pair_distortions(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& sem_mean,
                           const Eigen::VectorXd& sem_mean_sq, const Eigen::MatrixXd& xhat,
                           const Eigen::MatrixXd& shat, SemanticLoss sem) {
    PairBatch pb;
    const Eigen::VectorXd obs_sq = obs.rowwise().squaredNorm();
    const Eigen::VectorXd xhat_sq = xhat.rowwise().squaredNorm();
    pb.d_o = (-2.0 * obs * xhat.transpose()).colwise() + obs_sq;
    pb.d_o.rowwise() += xhat_sq.transpose();

    if (sem == SemanticLoss::squared_error) {
        const Eigen::VectorXd shat_sq = shat.rowwise().squaredNorm();
        pb.d_s = (-2.0 * sem_mean * shat.transpose()).colwise() + sem_mean_sq;
        pb.d_s.rowwise() += shat_sq.transpose();
    } else {
        Eigen::MatrixXd log_shat = shat.array().max(kCrossEntropyFloor).log().matrix();
        pb.d_s = -sem_mean * log_shat.transpose();
    }
    if (!pb.d_o.allFinite() || !pb.d_s.allFinite())
        throw NonFinite("distortion evaluation produced NaN or infinity");
    return pb;
}

struct WeightedEval {
    double loss = 0.0;        // -(mean over rows of lse - ln M)
    double d_o = 0.0;         // softmax-weighted distortions, averaged over rows
    double d_s = 0.0;
    Eigen::MatrixXd d_a;      // d loss / d A, only when requested
};

WeightedEval evaluate_rows(const PairBatch& pb, const DualParams& params, bool want_grads) {
    const Eigen::Index rows = pb.d_o.rows();
    const Eigen::Index m = pb.d_o.cols();
    const double log_m = std::log(static_cast<double>(m));

    WeightedEval ev;
    if (want_grads) ev.d_a.resize(rows, m);
    Eigen::VectorXd a(m);
    for (Eigen::Index n = 0; n < rows; ++n) {
        a = params.alpha1 * pb.d_o.row(n).transpose() + params.alpha2 * pb.d_s.row(n).transpose();
        const double lse = log_sum_exp(a);
        ev.loss -= lse - log_m;
        double w_o = 0.0;
        double w_s = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            const double w = std::exp(a[j] - lse);
            w_o += w * pb.d_o(n, j);
            w_s += w * pb.d_s(n, j);
            if (want_grads) ev.d_a(n, j) = -w / static_cast<double>(rows);
        }
        ev.d_o += w_o;
        ev.d_s += w_s;
    }
    const double inv_rows = 1.0 / static_cast<double>(rows);
    ev.loss *= inv_rows;
    ev.d_o *= inv_rows;
    ev.d_s *= inv_rows;
    return ev;
}

// d loss / d generated outputs, assembled from d loss / d A.
void head_gradients(const Eigen::MatrixXd& d_a, const Eigen::MatrixXd& obs,
                    const Eigen::MatrixXd& sem_mean, const Eigen::MatrixXd& xhat,
                    const Eigen::MatrixXd& shat, const DualParams& params, SemanticLoss sem,
                    Eigen::MatrixXd& g_xhat, Eigen::MatrixXd& g_shat) {
    const Eigen::VectorXd col_w = d_a.colwise().sum().transpose();
    g_xhat = 2.0 * params.alpha1 * (col_w.asDiagonal() * xhat - d_a.transpose() * obs);
    if (sem == SemanticLoss::squared_error) {
        g_shat = 2.0 * params.alpha2 * (col_w.asDiagonal() * shat - d_a.transpose() * sem_mean);
    } else {
        const Eigen::MatrixXd weighted = d_a.transpose() * sem_mean;  // M x s_dim
        g_shat.resize(shat.rows(), shat.cols());
        for (Eigen::Index i = 0; i < shat.rows(); ++i)
            for (Eigen::Index k = 0; k < shat.cols(); ++k)
                g_shat(i, k) = shat(i, k) > kCrossEntropyFloor
                                   ? -params.alpha2 * weighted(i, k) / shat(i, k)
                                   : 0.0;
    }
}

}  // namespace

Eigen::MatrixXd sample_latents(int dim, Eigen::Index count, std::uint64_t seed) {
    if (dim < 1 || count < 1) throw DomainError("latent bank needs positive dimensions");
    Rng rng(seed);
    Eigen::MatrixXd z(count, dim);
    for (Eigen::Index i = 0; i < count; ++i)
        for (int j = 0; j < dim; ++j) z(i, j) = rng.normal();
    return z;
}

SemanticStats semantic_stats(const SampleSet& samples) {
    if (samples.n2 < 1) throw DomainError("n2 must be at least 1");
    if (samples.semantic_samples.rows() != samples.n1() * samples.n2)
        throw DimensionMismatch("semantic sample rows must equal n1 * n2");
    SemanticStats st;
    st.mean.resize(samples.n1(), samples.s_dim());
    st.mean_sq.resize(samples.n1());
    for (Eigen::Index i = 0; i < samples.n1(); ++i) {
        const auto block = samples.semantic_samples.middleRows(i * samples.n2, samples.n2);
        st.mean.row(i) = block.colwise().mean();
        st.mean_sq[i] = block.rowwise().squaredNorm().mean();
    }
    return st;
}

double nesrd_loss(const GenerativeNetwork& net, const SampleSet& batch, const DualParams& params,
                  SemanticLoss sem) {
    check_alpha(params);
    if (batch.latent_count() < 1) throw DomainError("batch carries no latent samples");
    const Eigen::MatrixXd out = net.net.forward(batch.latent_bank);
    const SemanticStats st = semantic_stats(batch);
    const PairBatch pb = pair_distortions(batch.observations, st.mean, st.mean_sq,
                                          net.observation_head(out), net.semantic_head(out), sem);
    return evaluate_rows(pb, params, false).loss;
}

Mlp::Grads nesrd_loss_grad(const GenerativeNetwork& net, const SampleSet& batch,
                           const DualParams& params, SemanticLoss sem, double* loss_out) {
    check_alpha(params);
    if (batch.latent_count() < 1) throw DomainError("batch carries no latent samples");
    Mlp::Cache cache;
    const Eigen::MatrixXd out = net.net.forward(batch.latent_bank, cache);
    const Eigen::MatrixXd xhat = net.observation_head(out);
    const Eigen::MatrixXd shat = net.semantic_head(out);
    const SemanticStats st = semantic_stats(batch);
    const PairBatch pb = pair_distortions(batch.observations, st.mean, st.mean_sq, xhat, shat, sem);
    const WeightedEval ev = evaluate_rows(pb, params, true);
    if (loss_out) *loss_out = ev.loss;

    Eigen::MatrixXd g_xhat, g_shat;
    head_gradients(ev.d_a, batch.observations, st.mean, xhat, shat, params, sem, g_xhat,
                   g_shat);
    Eigen::MatrixXd d_out(out.rows(), out.cols());
    d_out << g_shat, g_xhat;

    Mlp::Grads grads = net.net.zero_grads();
    net.net.backward(cache, d_out, grads);
    return grads;
}

TrainResult train_nesrd(const SampleSet& samples, const DualParams& params,
                        const TrainConfig& cfg, GenerativeNetwork net, SemanticLoss sem) {
    check_alpha(params);
    if (cfg.learning_rate <= 0.0) throw DomainError("learning rate must be positive");
    if (cfg.epochs < 1) throw DomainError("epochs must be at least 1");
    if (net.net.input_dim() < 1) throw DomainError("network is uninitialized");

    const SemanticStats st = semantic_stats(samples);
    const Eigen::Index n1 = samples.n1();
    const Eigen::Index batch_n1 = std::min<Eigen::Index>(cfg.batch_n1, n1);
    const Eigen::Index batch_m = std::max<Eigen::Index>(1, cfg.batch_m);
    const int latent_dim = net.net.input_dim();

    TrainResult result;
    Rng rng(cfg.seed);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n1));
    for (Eigen::Index i = 0; i < n1; ++i) order[static_cast<std::size_t>(i)] = i;

    Mlp::Grads velocity = net.net.zero_grads();
    Eigen::MatrixXd obs_batch(batch_n1, samples.x_dim());
    Eigen::MatrixXd mean_batch(batch_n1, samples.s_dim());
    Eigen::VectorXd mean_sq_batch(batch_n1);
    Eigen::MatrixXd z(batch_m, latent_dim);

    for (int epoch = 0; epoch < cfg.epochs && !result.diverged; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        int steps = 0;
        for (Eigen::Index start = 0; start + batch_n1 <= n1; start += batch_n1, ++steps) {
            for (Eigen::Index r = 0; r < batch_n1; ++r) {
                const Eigen::Index idx = order[static_cast<std::size_t>(start + r)];
                obs_batch.row(r) = samples.observations.row(idx);
                mean_batch.row(r) = st.mean.row(idx);
                mean_sq_batch[r] = st.mean_sq[idx];
            }
            for (Eigen::Index i = 0; i < batch_m; ++i)
                for (int j = 0; j < latent_dim; ++j) z(i, j) = rng.normal();

            Mlp::Cache cache;
            const Eigen::MatrixXd out = net.net.forward(z, cache);
            const Eigen::MatrixXd xhat = net.observation_head(out);
            const Eigen::MatrixXd shat = net.semantic_head(out);
            const PairBatch pb =
                pair_distortions(obs_batch, mean_batch, mean_sq_batch, xhat, shat, sem);
            const WeightedEval ev = evaluate_rows(pb, params, true);
            if (!std::isfinite(ev.loss)) {
                result.diverged = true;
                break;
            }
            epoch_loss += ev.loss;

            Eigen::MatrixXd g_xhat, g_shat;
            head_gradients(ev.d_a, obs_batch, mean_batch, xhat, shat, params, sem, g_xhat,
                           g_shat);
            Eigen::MatrixXd d_out(out.rows(), out.cols());
            d_out << g_shat, g_xhat;
            Mlp::Grads grads = net.net.zero_grads();
            net.net.backward(cache, d_out, grads);
            net.net.apply_update(grads, cfg.learning_rate, cfg.momentum, velocity);
        }
        if (steps > 0) result.epoch_loss.push_back(epoch_loss / steps);
    }
    result.net = std::move(net);
    return result;
}

RDPoint estimate_point(const GenerativeNetwork& net, const SampleSet& eval,
                       const DualParams& params, SemanticLoss sem) {
    check_alpha(params);
    if (eval.latent_count() < 1) throw DomainError("evaluation set carries no latent samples");
    const Eigen::MatrixXd out = net.net.forward(eval.latent_bank);
    const Eigen::MatrixXd xhat = net.observation_head(out);
    const Eigen::MatrixXd shat = net.semantic_head(out);
    const SemanticStats st = semantic_stats(eval);

    // stream observation rows in chunks; every Eq.-style average shares the
    // same per-row softmax weights
    const Eigen::Index chunk = 128;
    double loss = 0.0;
    double d_o = 0.0;
    double d_s = 0.0;
    const Eigen::Index n1 = eval.n1();
    for (Eigen::Index start = 0; start < n1; start += chunk) {
        const Eigen::Index len = std::min(chunk, n1 - start);
        const PairBatch pb = pair_distortions(
            eval.observations.middleRows(start, len), st.mean.middleRows(start, len),
            st.mean_sq.segment(start, len), xhat, shat, sem);
        const WeightedEval ev = evaluate_rows(pb, params, false);
        const double f = static_cast<double>(len);
        loss += ev.loss * f;
        d_o += ev.d_o * f;
        d_s += ev.d_s * f;
    }
    loss /= static_cast<double>(n1);
    d_o /= static_cast<double>(n1);
    d_s /= static_cast<double>(n1);

    RDPoint p;
    p.alpha1 = params.alpha1;
    p.alpha2 = params.alpha2;
    p.d_o = d_o;
    p.d_s = d_s;
    const double rate = params.alpha1 * d_o + params.alpha2 * d_s + loss;
    if (rate < -1e-9) throw NonFinite("plug-in rate fell below the numerical slack");
    p.rate_nats = std::max(rate, 0.0);
    p.rate_bits = nats_to_bits(p.rate_nats);
    p.converged = true;
    p.method = Method::nesrd;
    return p;
}

// --- cascade ----------------------------------------------------------------

CascadeNetwork make_cascade_network(const std::vector<int>& generator_layers,
                                    const std::vector<int>& classifier_layers, int class_count,
                                    std::uint64_t seed) {
    if (classifier_layers.back() != class_count)
        throw DimensionMismatch("classifier output must equal the class count");
    if (classifier_layers.front() != generator_layers.back())
        throw DimensionMismatch("classifier input must equal the generator output");
    CascadeNetwork c;
    c.generator = Mlp::init(generator_layers, seed);
    c.classifier = Mlp::init(classifier_layers, seed + 1);
    c.class_count = class_count;
    return c;
}

namespace {

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd q(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double shift = logits.row(i).maxCoeff();
        double sum = 0.0;
        for (Eigen::Index k = 0; k < logits.cols(); ++k) {
            q(i, k) = std::exp(logits(i, k) - shift);
            sum += q(i, k);
        }
        q.row(i) /= sum;
    }
    return q;
}

struct CascadeForward {
    Mlp::Cache g_cache;
    Mlp::Cache f_cache;
    Eigen::MatrixXd xhat;    // M x x_dim
    Eigen::MatrixXd probs;   // M x K
    PairBatch pb;
};

CascadeForward cascade_forward(const CascadeNetwork& net, const Eigen::MatrixXd& obs_batch,
                               const Eigen::MatrixXd& labels_one_hot,
                               const Eigen::MatrixXd& z_batch) {
    CascadeForward fw;
    fw.xhat = net.generator.forward(z_batch, fw.g_cache);
    fw.probs = softmax_rows(net.classifier.forward(fw.xhat, fw.f_cache));
    const Eigen::VectorXd zero_sq = labels_one_hot.rowwise().squaredNorm();
    fw.pb = pair_distortions(obs_batch, labels_one_hot, zero_sq, fw.xhat, fw.probs,
                             SemanticLoss::cross_entropy);
    return fw;
}

}  // namespace

double cascade_loss(const CascadeNetwork& net, const Eigen::MatrixXd& obs_batch,
                    const Eigen::MatrixXd& labels_one_hot, const Eigen::MatrixXd& z_batch,
                    const DualParams& params) {
    check_alpha(params);
    const CascadeForward fw = cascade_forward(net, obs_batch, labels_one_hot, z_batch);
    return evaluate_rows(fw.pb, params, false).loss;
}

CascadeGrads cascade_loss_grad(const CascadeNetwork& net, const Eigen::MatrixXd& obs_batch,
                               const Eigen::MatrixXd& labels_one_hot,
                               const Eigen::MatrixXd& z_batch, const DualParams& params,
                               double* loss_out) {
    check_alpha(params);
    CascadeForward fw = cascade_forward(net, obs_batch, labels_one_hot, z_batch);
    const WeightedEval ev = evaluate_rows(fw.pb, params, true);
    if (loss_out) *loss_out = ev.loss;

    const Eigen::VectorXd col_w = ev.d_a.colwise().sum().transpose();
    // observation head: squared error
    Eigen::MatrixXd g_xhat =
        2.0 * params.alpha1 * (col_w.asDiagonal() * fw.xhat - ev.d_a.transpose() * obs_batch);
    // semantic head through the softmax: d CE / d logits = probs - label
    const Eigen::MatrixXd weighted_labels = ev.d_a.transpose() * labels_one_hot;  // M x K
    const Eigen::MatrixXd g_logits =
        params.alpha2 * (col_w.asDiagonal() * fw.probs - weighted_labels);

    CascadeGrads grads{net.generator.zero_grads(), net.classifier.zero_grads()};
    g_xhat += net.classifier.backward(fw.f_cache, g_logits, grads.classifier);
    net.generator.backward(fw.g_cache, g_xhat, grads.generator);
    return grads;
}

namespace {

// Step 1 of the cascade schedule: drive generated batch mean and covariance
// toward the data moments.  Stands in for adversarial pretraining at desk
// scale.
void pretrain_generator(Mlp& generator, const Eigen::MatrixXd& data, int epochs, double lr,
                        Eigen::Index batch, Rng& rng) {
    const Eigen::RowVectorXd mu0 = data.colwise().mean();
    const Eigen::MatrixXd centered0 = data.rowwise() - mu0;
    const Eigen::MatrixXd c0 =
        centered0.transpose() * centered0 / static_cast<double>(data.rows());

    const int latent_dim = generator.input_dim();
    Mlp::Grads velocity = generator.zero_grads();
    Eigen::MatrixXd z(batch, latent_dim);
    const int steps = std::max<int>(1, static_cast<int>(data.rows() / batch));
    for (int e = 0; e < epochs; ++e) {
        for (int s = 0; s < steps; ++s) {
            for (Eigen::Index i = 0; i < batch; ++i)
                for (int j = 0; j < latent_dim; ++j) z(i, j) = rng.normal();
            Mlp::Cache cache;
            const Eigen::MatrixXd g = generator.forward(z, cache);
            const double inv_b = 1.0 / static_cast<double>(batch);
            const Eigen::RowVectorXd mu = g.colwise().mean();
            const Eigen::MatrixXd gc = g.rowwise() - mu;
            const Eigen::MatrixXd c = gc.transpose() * gc * inv_b;
            Eigen::MatrixXd d_g = Eigen::MatrixXd::Zero(g.rows(), g.cols());
            d_g.rowwise() += 2.0 * inv_b * (mu - mu0);
            d_g += 4.0 * inv_b * gc * (c - c0);
            Mlp::Grads grads = generator.zero_grads();
            generator.backward(cache, d_g, grads);
            generator.apply_update(grads, lr, 0.9, velocity);
        }
    }
}

// Step 2: ordinary cross-entropy classification on the real observations.
void pretrain_classifier(Mlp& classifier, const Eigen::MatrixXd& data,
                         const Eigen::MatrixXd& one_hot, int epochs, double lr,
                         Eigen::Index batch, Rng& rng) {
    Mlp::Grads velocity = classifier.zero_grads();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.rows()));
    for (Eigen::Index i = 0; i < data.rows(); ++i) order[static_cast<std::size_t>(i)] = i;
    Eigen::MatrixXd x(batch, data.cols());
    Eigen::MatrixXd s(batch, one_hot.cols());
    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        for (Eigen::Index start = 0; start + batch <= data.rows(); start += batch) {
            for (Eigen::Index r = 0; r < batch; ++r) {
                x.row(r) = data.row(order[static_cast<std::size_t>(start + r)]);
                s.row(r) = one_hot.row(order[static_cast<std::size_t>(start + r)]);
            }
            Mlp::Cache cache;
            const Eigen::MatrixXd q = softmax_rows(classifier.forward(x, cache));
            const Eigen::MatrixXd d_logits = (q - s) / static_cast<double>(batch);
            Mlp::Grads grads = classifier.zero_grads();
            classifier.backward(cache, d_logits, grads);
            classifier.apply_update(grads, lr, 0.9, velocity);
        }
    }
}

}  // namespace

CascadeResult train_cascade(const LabeledDataset& data, const DualParams& params,
                            const CascadeTrainConfig& cfg, CascadeNetwork net) {
    check_alpha(params);
    if (data.size() < 2) throw DomainError("labeled dataset too small");

    const Eigen::MatrixXd one_hot = data.one_hot();
    Rng rng(cfg.joint.seed);
    const Eigen::Index batch = std::min<Eigen::Index>(cfg.joint.batch_n1, data.size());

    pretrain_generator(net.generator, data.observations, cfg.generator_epochs, cfg.generator_lr,
                       batch, rng);
    pretrain_classifier(net.classifier, data.observations, one_hot, cfg.classifier_epochs,
                        cfg.classifier_lr, batch, rng);

    CascadeResult result;
    const Eigen::Index batch_m = std::max<Eigen::Index>(1, cfg.joint.batch_m);
    const int latent_dim = net.generator.input_dim();
    Mlp::Grads vel_g = net.generator.zero_grads();
    Mlp::Grads vel_f = net.classifier.zero_grads();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.size()));
    for (Eigen::Index i = 0; i < data.size(); ++i) order[static_cast<std::size_t>(i)] = i;
    Eigen::MatrixXd x(batch, data.observations.cols());
    Eigen::MatrixXd s(batch, one_hot.cols());
    Eigen::MatrixXd z(batch_m, latent_dim);

    for (int epoch = 0; epoch < cfg.joint.epochs && !result.diverged; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        int steps = 0;
        for (Eigen::Index start = 0; start + batch <= data.size(); start += batch, ++steps) {
            for (Eigen::Index r = 0; r < batch; ++r) {
                x.row(r) = data.observations.row(order[static_cast<std::size_t>(start + r)]);
                s.row(r) = one_hot.row(order[static_cast<std::size_t>(start + r)]);
            }
            for (Eigen::Index i = 0; i < batch_m; ++i)
                for (int j = 0; j < latent_dim; ++j) z(i, j) = rng.normal();
            double loss = 0.0;
            CascadeGrads grads = cascade_loss_grad(net, x, s, z, params, &loss);
            if (!std::isfinite(loss)) {
                result.diverged = true;
                break;
            }
            epoch_loss += loss;
            net.generator.apply_update(grads.generator, cfg.joint.learning_rate,
                                       cfg.joint.momentum, vel_g);
            net.classifier.apply_update(grads.classifier, cfg.joint.learning_rate,
                                        cfg.joint.momentum, vel_f);
        }
        if (steps > 0) result.joint_loss.push_back(epoch_loss / steps);
    }

    // plug-in point over the full dataset with a fresh latent bank
    const Eigen::MatrixXd z_eval =
        sample_latents(latent_dim, cfg.eval_latents, cfg.joint.seed + 90001);
    const Eigen::MatrixXd xhat = net.generator.forward(z_eval);
    const Eigen::MatrixXd probs = softmax_rows(net.classifier.forward(xhat));

    const Eigen::Index chunk = 128;
    double loss = 0.0;
    double d_o = 0.0;
    double d_s = 0.0;
    const Eigen::Index n1 = data.size();
    const Eigen::VectorXd ones_sq = one_hot.rowwise().squaredNorm();
    for (Eigen::Index start = 0; start < n1; start += chunk) {
        const Eigen::Index len = std::min(chunk, n1 - start);
        const PairBatch pb = pair_distortions(
            data.observations.middleRows(start, len), one_hot.middleRows(start, len),
            ones_sq.segment(start, len), xhat, probs, SemanticLoss::cross_entropy);
        const WeightedEval ev = evaluate_rows(pb, params, false);
        loss += ev.loss * static_cast<double>(len);
        d_o += ev.d_o * static_cast<double>(len);
        d_s += ev.d_s * static_cast<double>(len);
    }
    loss /= static_cast<double>(n1);
    d_o /= static_cast<double>(n1);
    d_s /= static_cast<double>(n1);

    result.point.alpha1 = params.alpha1;
    result.point.alpha2 = params.alpha2;
    result.point.d_o = d_o;
    result.point.d_s = d_s;
    result.point.rate_nats = std::max(params.alpha1 * d_o + params.alpha2 * d_s + loss, 0.0);
    result.point.rate_bits = nats_to_bits(result.point.rate_nats);
    result.point.iterations = cfg.joint.epochs;
    result.point.converged = !result.diverged;
    result.point.method = Method::nesrd;
    result.net = std::move(net);
    return result;
}

std::vector<ConsistencyRow> consistency_sweep(const SampleSource& sampler,
                                              const DualParams& params,
                                              const std::vector<std::array<Eigen::Index, 3>>& sizes,
                                              int repeats, double reference_rate_nats,
                                              const std::vector<int>& layer_sizes, int shat_dim,
                                              int xhat_dim, const TrainConfig& cfg,
                                              SemanticLoss sem) {
    if (repeats < 1) throw DomainError("repeats must be at least 1");
    std::vector<ConsistencyRow> rows;
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        const auto [n1, n2, m] = sizes[si];
        double err_sum = 0.0;
        for (int r = 0; r < repeats; ++r) {
            const std::uint64_t run_seed = cfg.seed + 7919ULL * static_cast<std::uint64_t>(r) +
                                           104729ULL * static_cast<std::uint64_t>(si);
            const SampleSet train_set = sampler(n1, n2, m, run_seed);
            const SampleSet eval_set = sampler(n1, n2, m, run_seed + 50021ULL);
            GenerativeNetwork net =
                make_generative_network(layer_sizes, shat_dim, xhat_dim, run_seed + 3);
            TrainConfig run_cfg = cfg;
            run_cfg.seed = run_seed + 11;
            const TrainResult trained = train_nesrd(train_set, params, run_cfg, std::move(net), sem);
            const RDPoint p = estimate_point(trained.net, eval_set, params, sem);
            err_sum += std::abs(p.rate_nats - reference_rate_nats);
        }
        rows.push_back({n1, n2, m, err_sum / repeats});
    }
    return rows;
}

}  // namespace semrd
