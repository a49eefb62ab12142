#include "semrd/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "semrd/dual.hpp"
#include "semrd/error.hpp"
#include "semrd/nesrd.hpp"
#include "semrd/numerics.hpp"
#include "semrd/oracle.hpp"
#include "semrd/parallel.hpp"
#include "semrd/points_io.hpp"
#include "semrd/sources.hpp"

namespace semrd {

namespace {

using nlohmann::json;

// Unknown keys are configuration errors so typos never silently change runs.
void check_keys(const json& obj, const std::vector<std::string>& allowed,
                const std::string& path) {
    if (!obj.is_object()) throw ConfigError(path + " must be an object");
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (const auto& k : allowed)
            if (item.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("unknown key '" + path + "." + item.key() + "'");
    }
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ConfigError(path + " must be a 2-d array");
    const std::size_t cols = j[0].size();
    Eigen::MatrixXd m(j.size(), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (!j[r].is_array() || j[r].size() != cols)
            throw ConfigError(path + " rows must have equal length");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number()) throw ConfigError(path + " entries must be numbers");
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
        }
    }
    return m;
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value for '" + key + "'");
    }
}

struct DiscreteInstance {
    DiscreteSemanticSource source;
    DistortionSpec spec;
};

GaussianSourceSpec parse_gaussian_spec(const json& j, const std::string& path,
                                       std::uint64_t seed) {
    GaussianSourceSpec spec;
    if (j.is_string() && j.get<std::string>() == "benchmark") {
        spec = benchmark_gaussian();
    } else {
        check_keys(j, {"k_x", "h", "k_w"}, path);
        if (!j.contains("k_x") || !j.contains("h") || !j.contains("k_w"))
            throw ConfigError(path + " needs k_x, h, and k_w");
        spec.k_x = parse_matrix(j.at("k_x"), path + ".k_x");
        spec.h = parse_matrix(j.at("h"), path + ".h");
        spec.k_w = parse_matrix(j.at("k_w"), path + ".k_w");
    }
    spec.seed = seed;
    return spec;
}

Eigen::MatrixXd parse_distortion_axis(const json& j, const std::string& path, Eigen::Index rows,
                                      Eigen::Index cols) {
    if (j.is_string()) {
        const std::string kind = j.get<std::string>();
        if (kind == "hamming") return hamming_distortion(rows, cols);
        throw ConfigError(path + ": unknown distortion '" + kind + "'");
    }
    check_keys(j, {"matrix"}, path);
    if (!j.contains("matrix")) throw ConfigError(path + " needs a matrix");
    Eigen::MatrixXd m = parse_matrix(j.at("matrix"), path + ".matrix");
    if (m.rows() != rows) throw ConfigError(path + ".matrix has the wrong row count");
    return m;
}

DiscreteInstance make_discrete_instance(const json& cfg, std::uint64_t seed) {
    const json& src_cfg = cfg.at("source");
    const std::string kind = src_cfg.at("kind").get<std::string>();
    if (kind == "inline-joint") {
        check_keys(src_cfg, {"kind", "joint"}, "source");
        DiscreteInstance inst;
        inst.source = build_source(parse_matrix(src_cfg.at("joint"), "source.joint"));
        if (!cfg.contains("distortion"))
            throw ConfigError("inline sources need a distortion section");
        const json& dist = cfg.at("distortion");
        check_keys(dist, {"observation", "semantic", "xhat_size", "shat_size"}, "distortion");
        const Eigen::Index xhat =
            get_or<Eigen::Index>(dist, "xhat_size", inst.source.x_size());
        const Eigen::Index shat =
            get_or<Eigen::Index>(dist, "shat_size", inst.source.s_size());
        inst.spec = make_distortion_spec(
            inst.source,
            parse_distortion_axis(dist.at("observation"), "distortion.observation",
                                  inst.source.x_size(), xhat),
            parse_distortion_axis(dist.at("semantic"), "distortion.semantic",
                                  inst.source.s_size(), shat));
        return inst;
    }
    if (kind == "gaussian-discretized") {
        check_keys(src_cfg, {"kind", "base", "x_levels", "s_levels", "mc_samples"}, "source");
        const GaussianSourceSpec g = parse_gaussian_spec(
            src_cfg.contains("base") ? src_cfg.at("base") : json("benchmark"), "source.base",
            seed);
        const DiscretizationGrid grid = default_grid(g, get_or<int>(src_cfg, "x_levels", 3),
                                                     get_or<int>(src_cfg, "s_levels", 3));
        const DiscretizedSource d =
            discretize_gaussian(g, grid, get_or<Eigen::Index>(src_cfg, "mc_samples", 1000000));
        return DiscreteInstance{d.source, discretized_distortions(d)};
    }
    throw ConfigError("source.kind '" + kind + "' is not a discrete source");
}

std::vector<std::pair<double, double>> parse_grid(const json& cfg) {
    if (!cfg.contains("grid")) throw ConfigError("this mode needs a grid section");
    const json& g = cfg.at("grid");
    check_keys(g, {"pairs", "lambda1", "lambda2"}, "grid");
    std::vector<std::pair<double, double>> out;
    if (g.contains("pairs")) {
        for (const auto& p : g.at("pairs")) {
            if (!p.is_array() || p.size() != 2) throw ConfigError("grid.pairs entries are [l1, l2]");
            out.emplace_back(p[0].get<double>(), p[1].get<double>());
        }
    } else {
        if (!g.contains("lambda1") || !g.contains("lambda2"))
            throw ConfigError("grid needs pairs or lambda1+lambda2 lists");
        for (const auto& a : g.at("lambda1"))
            for (const auto& b : g.at("lambda2"))
                out.emplace_back(a.get<double>(), b.get<double>());
    }
    if (out.empty()) throw ConfigError("empty slope grid");
    for (const auto& [a, b] : out)
        if (a > 0.0 || b > 0.0) throw ConfigError("grid slopes must be nonpositive");
    return out;
}

BAConfig parse_ba(const json& cfg, std::uint64_t seed) {
    BAConfig ba;
    ba.seed = seed;
    if (!cfg.contains("ba")) return ba;
    const json& j = cfg.at("ba");
    check_keys(j, {"max_iters", "tol", "init", "targets", "emit_bounds"}, "ba");
    ba.max_iters = get_or<int>(j, "max_iters", ba.max_iters);
    ba.tol = get_or<double>(j, "tol", ba.tol);
    const std::string init = get_or<std::string>(j, "init", "uniform");
    if (init == "uniform")
        ba.init = BAInit::uniform;
    else if (init == "random-positive")
        ba.init = BAInit::random_positive;
    else
        throw ConfigError("ba.init must be uniform or random-positive");
    return ba;
}

TrainConfig parse_train(const json& j, const std::string& path, std::uint64_t seed) {
    TrainConfig tc;
    tc.seed = seed;
    check_keys(j,
               {"layers", "shat_dim", "xhat_dim", "semantic", "lr", "epochs", "batch_n1",
                "batch_m", "momentum", "train_n1", "train_n2", "eval_n1", "eval_m",
                "generator_layers", "classifier_layers", "generator_epochs", "classifier_epochs",
                "generator_lr", "classifier_lr"},
               path);
    tc.learning_rate = get_or<double>(j, "lr", tc.learning_rate);
    tc.epochs = get_or<int>(j, "epochs", tc.epochs);
    tc.batch_n1 = get_or<int>(j, "batch_n1", tc.batch_n1);
    tc.batch_m = get_or<int>(j, "batch_m", tc.batch_m);
    tc.momentum = get_or<double>(j, "momentum", tc.momentum);
    return tc;
}

unsigned resolve_workers(const json& cfg, const RunOptions& options) {
    unsigned workers = get_or<unsigned>(cfg, "workers", 1);
    if (const char* env = std::getenv("SEMRD_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) workers = static_cast<unsigned>(v);
    }
    if (options.worker_override) workers = *options.worker_override;
    return std::max(1u, workers);
}

struct OutputSpec {
    std::string path = "points.csv";
    bool json_mirror = false;
};

OutputSpec parse_output(const json& cfg) {
    OutputSpec out;
    if (!cfg.contains("output")) return out;
    check_keys(cfg.at("output"), {"path", "json_mirror"}, "output");
    out.path = get_or<std::string>(cfg.at("output"), "path", out.path);
    out.json_mirror = get_or<bool>(cfg.at("output"), "json_mirror", out.json_mirror);
    return out;
}

std::string json_mirror_path(const std::string& csv_path) {
    const std::size_t dot = csv_path.find_last_of('.');
    return (dot == std::string::npos ? csv_path : csv_path.substr(0, dot)) + ".json";
}

}  // namespace

RDPoint bisect_to_target(const DiscreteSemanticSource& src, const DistortionSpec& spec,
                         double target_d_o, double target_d_s, const BAConfig& cfg, double tol) {
    const auto [dmax_o, dmax_s] = d_max(src, spec);
    if (!(target_d_o > 0.0) || target_d_o > dmax_o + 1e-12)
        throw TargetUnreachable("observation target outside (0, d_max]");
    if (!(target_d_s > 0.0) || target_d_s > dmax_s + 1e-12)
        throw TargetUnreachable("semantic target outside (0, d_max]");

    BAConfig run = cfg;
    run.lambda1 = -1.0;
    run.lambda2 = -1.0;
    RDPoint point;

    const auto solve = [&](double l1, double l2) {
        BAConfig c = run;
        c.lambda1 = l1;
        c.lambda2 = l2;
        return ba_solve(src, spec, c).point;
    };

    for (int outer = 0; outer < 60; ++outer) {
        // achieved d_o grows with lambda1, so plain bisection per axis works
        double lo = kHardSlope;
        double hi = -1e-12;
        for (int i = 0; i < 40; ++i) {
            const double mid = 0.5 * (lo + hi);
            point = solve(mid, run.lambda2);
            if (std::abs(point.d_o - target_d_o) <= 0.2 * tol) break;
            (point.d_o > target_d_o ? hi : lo) = mid;
            run.lambda1 = mid;
        }
        run.lambda1 = point.alpha1;

        lo = kHardSlope;
        hi = -1e-12;
        for (int i = 0; i < 40; ++i) {
            const double mid = 0.5 * (lo + hi);
            point = solve(run.lambda1, mid);
            if (std::abs(point.d_s - target_d_s) <= 0.2 * tol) break;
            (point.d_s > target_d_s ? hi : lo) = mid;
            run.lambda2 = mid;
        }
        run.lambda2 = point.alpha2;

        if (std::abs(point.d_o - target_d_o) <= tol && std::abs(point.d_s - target_d_s) <= tol)
            break;
    }
    return point;
}

VerifyReport verify_points(const std::string& points_path, const VerifyOptions& options) {
    VerifyReport report;
    const std::vector<PointsRow> rows = read_points_csv(points_path);
    const auto record = [&](bool ok, const std::string& check, const std::string& detail) {
        report.ok = report.ok && ok;
        report.lines.push_back(std::string(ok ? "[PASS] " : "[FAIL] ") + check +
                               (detail.empty() ? "" : ": " + detail));
    };

    bool ok = true;
    std::string detail;
    for (std::size_t i = 0; i < rows.size() && ok; ++i) {
        const RDPoint& p = rows[i].point;
        if (p.rate_nats < -1e-12 || p.rate_bits < -1e-12) {
            ok = false;
            detail = "negative rate in row " + std::to_string(i + 1);
        } else if (std::abs(p.rate_bits - p.rate_nats / kLn2) >
                   1e-9 * std::max(1.0, std::abs(p.rate_bits))) {
            ok = false;
            detail = "bits/nats mismatch in row " + std::to_string(i + 1);
        } else if (p.alpha1 > 1e-12 || p.alpha2 > 1e-12) {
            ok = false;
            detail = "positive slope in row " + std::to_string(i + 1);
        } else if (p.d_o < -1e-12 || p.d_s < -1e-12) {
            ok = false;
            detail = "negative distortion in row " + std::to_string(i + 1);
        }
    }
    record(ok, "row invariants", detail);

    ok = true;
    detail.clear();
    for (std::size_t i = 0; i < rows.size() && ok; ++i) {
        for (std::size_t j = 0; j < rows.size() && ok; ++j) {
            const RDPoint& a = rows[i].point;
            const RDPoint& b = rows[j].point;
            // comparable pair: a dominated by b in both distortions
            if (a.d_o <= b.d_o + 1e-12 && a.d_s <= b.d_s + 1e-12) {
                if (a.rate_bits < b.rate_bits - options.eps_bits) {
                    ok = false;
                    detail = "rows " + std::to_string(i + 1) + "," + std::to_string(j + 1);
                }
            }
        }
    }
    record(ok, "monotonicity on comparable pairs", detail);

    bool have_bounds = false;
    ok = true;
    detail.clear();
    for (std::size_t i = 0; i < rows.size() && ok; ++i) {
        if (!rows[i].r_o_bits || !rows[i].r_s_bits) continue;
        have_bounds = true;
        const double r = rows[i].point.rate_bits;
        const double lo = std::max(*rows[i].r_o_bits, *rows[i].r_s_bits);
        const double hi = *rows[i].r_o_bits + *rows[i].r_s_bits;
        if (r < lo - options.eps_bits || r > hi + options.eps_bits) {
            ok = false;
            detail = "row " + std::to_string(i + 1);
        }
    }
    if (have_bounds) record(ok, "rate bounds", detail);

    if (options.capacity_bits) {
        ok = true;
        detail.clear();
        for (std::size_t i = 0; i < rows.size() && ok; ++i) {
            if (!achievable(rows[i].point, *options.capacity_bits)) {
                ok = false;
                detail = "row " + std::to_string(i + 1) + " exceeds capacity";
            }
        }
        record(ok, "achievability", detail);
    }
    return report;
}

namespace {

std::vector<PointsRow> run_discrete_mode(const json& cfg, const std::string& mode,
                                         std::uint64_t seed, unsigned workers, int& exit_code) {
    const DiscreteInstance inst = make_discrete_instance(cfg, seed);
    const BAConfig ba = parse_ba(cfg, seed);
    std::vector<PointsRow> rows;

    if (mode == "ba" && cfg.contains("ba") && cfg.at("ba").contains("targets")) {
        const json& t = cfg.at("ba").at("targets");
        if (!t.is_array() || t.size() != 2) throw ConfigError("ba.targets is [d_o, d_s]");
        rows.push_back(
            {bisect_to_target(inst.source, inst.spec, t[0].get<double>(), t[1].get<double>(), ba),
             {},
             {}});
        return rows;
    }

    const auto grid = parse_grid(cfg);
    const auto entries = ba_sweep(inst.source, inst.spec, grid, ba, workers);
    const bool emit_bounds = cfg.contains("ba") &&
                             get_or<bool>(cfg.at("ba"), "emit_bounds", false);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].point) {
            PointsRow row{*entries[i].point, {}, {}};
            if (emit_bounds) {
                // companion released-axis curves at the achieved distortions
                row.r_o_bits = conventional_rd_at_distortion(inst.source.px, inst.spec.d_o,
                                                             entries[i].point->d_o, ba)
                                   .rate_bits;
                row.r_s_bits = conventional_rd_at_distortion(inst.source.px, inst.spec.d_hat_s,
                                                             entries[i].point->d_s, ba)
                                   .rate_bits;
            }
            rows.push_back(std::move(row));
        } else {
            std::cerr << "point " << i << " failed: " << entries[i].error << '\n';
            exit_code = 2;
        }
    }
    return rows;
}

std::vector<PointsRow> run_oracle_mode(const json& cfg, std::uint64_t seed) {
    const DiscreteInstance inst = make_discrete_instance(cfg, seed);
    if (!cfg.contains("oracle")) throw ConfigError("oracle mode needs an oracle section");
    const json& j = cfg.at("oracle");
    check_keys(j, {"restarts", "max_steps", "targets"}, "oracle");
    OracleConfig oc;
    oc.seed = seed;
    oc.restarts = get_or<int>(j, "restarts", oc.restarts);
    oc.max_steps = get_or<int>(j, "max_steps", oc.max_steps);
    if (!j.contains("targets")) throw ConfigError("oracle mode needs targets");
    std::vector<PointsRow> rows;
    for (const auto& t : j.at("targets")) {
        if (!t.is_array() || t.size() != 2) throw ConfigError("oracle.targets entries are [d_o, d_s]");
        const OracleResult res =
            brute_force_srdf(inst.source, inst.spec, t[0].get<double>(), t[1].get<double>(), oc);
        rows.push_back({res.point, {}, {}});
    }
    return rows;
}

std::vector<PointsRow> run_nesrd_mode(const json& cfg, std::uint64_t seed) {
    const json& src_cfg = cfg.at("source");
    const std::string kind = src_cfg.at("kind").get<std::string>();
    if (!cfg.contains("nesrd")) throw ConfigError("nesrd mode needs a nesrd section");
    const json& j = cfg.at("nesrd");
    const TrainConfig tc = parse_train(j, "nesrd", seed);

    const std::vector<int> layers = get_or<std::vector<int>>(j, "layers", {10, 5, 5});
    const std::string sem_name = get_or<std::string>(j, "semantic", "squared-error");
    SemanticLoss sem;
    if (sem_name == "squared-error")
        sem = SemanticLoss::squared_error;
    else if (sem_name == "cross-entropy")
        sem = SemanticLoss::cross_entropy;
    else
        throw ConfigError("nesrd.semantic must be squared-error or cross-entropy");

    const Eigen::Index train_n1 = get_or<Eigen::Index>(j, "train_n1", 10000);
    const Eigen::Index train_n2 = get_or<Eigen::Index>(j, "train_n2", 1);
    const Eigen::Index eval_n1 = get_or<Eigen::Index>(j, "eval_n1", 4096);
    const Eigen::Index eval_m = get_or<Eigen::Index>(j, "eval_m", 4096);

    SampleSet train_set;
    SampleSet eval_set;
    if (kind == "gaussian" || kind == "gaussian-benchmark") {
        GaussianSourceSpec g =
            kind == "gaussian-benchmark"
                ? benchmark_gaussian()
                : parse_gaussian_spec(src_cfg.contains("spec") ? src_cfg.at("spec")
                                                               : json("benchmark"),
                                      "source.spec", seed);
        if (kind == "gaussian") check_keys(src_cfg, {"kind", "spec"}, "source");
        g.seed = seed;
        train_set = sample_gaussian(g, train_n1, train_n2);
        g.seed = seed + 50021;
        eval_set = sample_gaussian(g, eval_n1, train_n2);
    } else if (kind == "gaussian-discretized") {
        json inst_cfg = cfg;
        const DiscretizedSource d = [&] {
            const GaussianSourceSpec g = parse_gaussian_spec(
                src_cfg.contains("base") ? src_cfg.at("base") : json("benchmark"), "source.base",
                seed);
            const DiscretizationGrid grid = default_grid(
                g, get_or<int>(src_cfg, "x_levels", 3), get_or<int>(src_cfg, "s_levels", 3));
            return discretize_gaussian(g, grid,
                                       get_or<Eigen::Index>(src_cfg, "mc_samples", 1000000));
        }();
        train_set = sample_discretized(d, train_n1, train_n2, seed + 1);
        eval_set = sample_discretized(d, eval_n1, train_n2, seed + 50021);
    } else if (kind == "file") {
        check_keys(src_cfg, {"kind", "path", "format"}, "source");
        const std::string format = get_or<std::string>(src_cfg, "format", "csv");
        const LoadedSamples loaded = load_samples(
            src_cfg.at("path").get<std::string>(),
            format == "csv" ? SampleFormat::csv : SampleFormat::jsonl);
        if (!std::holds_alternative<SampleSet>(loaded))
            throw ConfigError("nesrd mode needs vector-valued semantic samples");
        train_set = std::get<SampleSet>(loaded);
        eval_set = train_set;
    } else {
        throw ConfigError("source.kind '" + kind + "' is not usable for nesrd");
    }

    const int latent_dim = layers.front();
    const int shat_dim = get_or<int>(j, "shat_dim", static_cast<int>(train_set.s_dim()));
    const int xhat_dim = get_or<int>(j, "xhat_dim", static_cast<int>(train_set.x_dim()));
    eval_set.latent_bank = sample_latents(latent_dim, eval_m, seed + 90001);

    std::vector<PointsRow> rows;
    for (const auto& [a1, a2] : parse_grid(cfg)) {
        const DualParams params{a1, a2};
        GenerativeNetwork net = make_generative_network(layers, shat_dim, xhat_dim, seed + 3);
        const TrainResult trained = train_nesrd(train_set, params, tc, std::move(net), sem);
        rows.push_back({estimate_point(trained.net, eval_set, params, sem), {}, {}});
    }
    return rows;
}

std::vector<PointsRow> run_cascade_mode(const json& cfg, std::uint64_t seed) {
    const json& src_cfg = cfg.at("source");
    const std::string kind = src_cfg.at("kind").get<std::string>();
    LabeledDataset data;
    if (kind == "synthetic-labeled") {
        check_keys(src_cfg, {"kind", "classes", "means", "cov", "n"}, "source");
        data = synth_labeled(src_cfg.at("classes").get<int>(),
                             parse_matrix(src_cfg.at("means"), "source.means"),
                             parse_matrix(src_cfg.at("cov"), "source.cov"),
                             get_or<Eigen::Index>(src_cfg, "n", 4000), seed);
    } else if (kind == "file") {
        check_keys(src_cfg, {"kind", "path", "format"}, "source");
        const std::string format = get_or<std::string>(src_cfg, "format", "csv");
        const LoadedSamples loaded = load_samples(
            src_cfg.at("path").get<std::string>(),
            format == "csv" ? SampleFormat::csv : SampleFormat::jsonl);
        if (!std::holds_alternative<LabeledDataset>(loaded))
            throw ConfigError("cascade mode needs labeled data");
        data = std::get<LabeledDataset>(loaded);
    } else {
        throw ConfigError("source.kind '" + kind + "' is not usable for cascade");
    }

    if (!cfg.contains("cascade")) throw ConfigError("cascade mode needs a cascade section");
    const json& j = cfg.at("cascade");
    CascadeTrainConfig cc;
    cc.joint = parse_train(j, "cascade", seed);
    cc.generator_epochs = get_or<int>(j, "generator_epochs", cc.generator_epochs);
    cc.classifier_epochs = get_or<int>(j, "classifier_epochs", cc.classifier_epochs);
    cc.generator_lr = get_or<double>(j, "generator_lr", cc.generator_lr);
    cc.classifier_lr = get_or<double>(j, "classifier_lr", cc.classifier_lr);
    cc.eval_latents = get_or<Eigen::Index>(j, "eval_m", cc.eval_latents);

    const int x_dim = static_cast<int>(data.observations.cols());
    const std::vector<int> g_layers =
        get_or<std::vector<int>>(j, "generator_layers", {8, 16, x_dim});
    const std::vector<int> f_layers =
        get_or<std::vector<int>>(j, "classifier_layers", {x_dim, 16, data.class_count});

    std::vector<PointsRow> rows;
    for (const auto& [a1, a2] : parse_grid(cfg)) {
        CascadeNetwork net = make_cascade_network(g_layers, f_layers, data.class_count, seed + 3);
        const CascadeResult res = train_cascade(data, DualParams{a1, a2}, cc, std::move(net));
        rows.push_back({res.point, {}, {}});
    }
    return rows;
}

}  // namespace

int run_config(const std::string& config_path, const RunOptions& options) {
    json cfg;
    std::string raw;
    try {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot open config: " + config_path);
        std::stringstream buffer;
        buffer << in.rdbuf();
        raw = buffer.str();
        cfg = json::parse(raw);
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    }

    int exit_code = 0;
    const auto started = std::chrono::steady_clock::now();
    try {
        check_keys(cfg,
                   {"version", "mode", "seed", "workers", "output", "source", "distortion",
                    "grid", "ba", "oracle", "nesrd", "cascade", "gaussian"},
                   "config");
        if (get_or<int>(cfg, "version", 1) != 1) throw ConfigError("unsupported config version");
        if (!cfg.contains("mode")) throw ConfigError("config needs a mode");
        const std::string mode = cfg.at("mode").get<std::string>();
        std::uint64_t seed = get_or<std::uint64_t>(cfg, "seed", 1);
        if (options.seed_override) seed = *options.seed_override;
        const unsigned workers = resolve_workers(cfg, options);
        const OutputSpec output = parse_output(cfg);
        if (!cfg.contains("source")) throw ConfigError("config needs a source");

        if (mode == "gaussian-gen") {
            const json& src_cfg = cfg.at("source");
            check_keys(src_cfg, {"kind", "spec"}, "source");
            GaussianSourceSpec g = parse_gaussian_spec(
                src_cfg.contains("spec") ? src_cfg.at("spec") : json("benchmark"), "source.spec",
                seed);
            g.seed = seed;
            json gen = cfg.contains("gaussian") ? cfg.at("gaussian") : json::object();
            check_keys(gen, {"n1", "n2"}, "gaussian");
            const SampleSet samples = sample_gaussian(g, get_or<Eigen::Index>(gen, "n1", 1000),
                                                      get_or<Eigen::Index>(gen, "n2", 1));
            save_samples(output.path, samples,
                         output.path.size() > 6 &&
                                 output.path.substr(output.path.size() - 6) == ".jsonl"
                             ? SampleFormat::jsonl
                             : SampleFormat::csv);
            if (!options.quiet)
                std::cout << "wrote " << samples.n1() << " samples to " << output.path << '\n';
            return 0;
        }

        std::vector<PointsRow> rows;
        if (mode == "ba" || mode == "sweep") {
            rows = run_discrete_mode(cfg, mode, seed, workers, exit_code);
        } else if (mode == "oracle") {
            rows = run_oracle_mode(cfg, seed);
        } else if (mode == "nesrd") {
            rows = run_nesrd_mode(cfg, seed);
        } else if (mode == "cascade") {
            rows = run_cascade_mode(cfg, seed);
        } else {
            throw ConfigError("unknown mode '" + mode + "'");
        }

        write_points_csv(output.path, rows);
        if (output.json_mirror) write_points_json(json_mirror_path(output.path), rows);

        Manifest manifest;
        manifest.mode = mode;
        manifest.config_hash = content_hash(raw);
        manifest.seed = seed;
        manifest.workers = workers;
        manifest.version = kVersion;
        manifest.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        manifest.rows = rows.size();
        manifest.created_unix = static_cast<std::int64_t>(std::time(nullptr));
        write_manifest(output.path + ".manifest.json", manifest);
        if (!options.quiet)
            std::cout << "wrote " << rows.size() << " points to " << output.path << '\n';
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        std::cerr << "run failed: " << e.what() << '\n';
        return 1;
    }
    return exit_code;
}

}  // namespace semrd
