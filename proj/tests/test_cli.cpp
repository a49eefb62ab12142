#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "semrd/cli.hpp"
#include "semrd/error.hpp"
#include "semrd/numerics.hpp"
#include "semrd/points_io.hpp"

using namespace semrd;

namespace {

DiscreteSemanticSource binary_identity() {
    Eigen::MatrixXd joint(2, 2);
    joint << 0.5, 0.0, 0.0, 0.5;
    return build_source(joint);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

struct TempFiles {
    std::vector<std::string> paths;
    ~TempFiles() {
        for (const auto& p : paths) std::remove(p.c_str());
    }
    std::string track(std::string p) {
        paths.push_back(p);
        return p;
    }
};

std::string row(double alpha1, double d_o, double d_s, double rate_bits) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "ba,%g,%g,%g,%g,%.17g,%.17g,10,1", alpha1, alpha1, d_o, d_s,
                  rate_bits, rate_bits * kLn2);
    return buf;
}

const char* kBinaryBaConfig = R"({
  "mode": "ba",
  "seed": 3,
  "source": {"kind": "inline-joint", "joint": [[0.5, 0.0], [0.0, 0.5]]},
  "distortion": {"observation": "hamming", "semantic": "hamming"},
  "grid": {"pairs": [[0.0, 0.0]]},
  "output": {"path": "OUTPATH"}
})";

std::string config_with_output(const char* base, const std::string& out_path) {
    std::string text = base;
    const auto pos = text.find("OUTPATH");
    text.replace(pos, 7, out_path);
    return text;
}

}  // namespace

TEST_CASE("bisection hits the closed-form binary point") {
    const auto src = binary_identity();
    const auto spec =
        make_distortion_spec(src, hamming_distortion(2, 2), hamming_distortion(2, 2));
    BAConfig cfg;
    cfg.tol = 1e-11;
    cfg.max_iters = 50000;
    const auto p = bisect_to_target(src, spec, 0.1, 0.5, cfg);
    CHECK(std::abs(p.d_o - 0.1) <= 1e-4);
    CHECK(p.rate_bits == doctest::Approx(0.5310).epsilon(2e-3));
}

TEST_CASE("bisection reaches the zero-rate corner at generous targets") {
    const auto src = binary_identity();
    const auto spec =
        make_distortion_spec(src, hamming_distortion(2, 2), hamming_distortion(2, 2));
    BAConfig cfg;
    const auto [dm_o, dm_s] = d_max(src, spec);
    const auto p = bisect_to_target(src, spec, dm_o, dm_s, cfg);
    CHECK(p.rate_nats < 1e-6);
    CHECK(std::abs(p.d_o - dm_o) <= 1e-4);
    CHECK(std::abs(p.d_s - dm_s) <= 1e-4);
}

TEST_CASE("bisection rejects targets outside the reachable band") {
    const auto src = binary_identity();
    const auto spec =
        make_distortion_spec(src, hamming_distortion(2, 2), hamming_distortion(2, 2));
    BAConfig cfg;
    CHECK_THROWS_AS(bisect_to_target(src, spec, -0.1, 0.2, cfg), TargetUnreachable);
    CHECK_THROWS_AS(bisect_to_target(src, spec, 0.1, 0.9, cfg), TargetUnreachable);
}

TEST_CASE("points files round-trip through csv") {
    TempFiles tmp;
    const auto path = tmp.track("points_roundtrip.csv");
    std::vector<PointsRow> rows(2);
    rows[0].point.alpha1 = -1.25;
    rows[0].point.d_o = 0.125;
    rows[0].point.rate_nats = 0.5;
    rows[0].point.rate_bits = 0.5 / kLn2;
    rows[0].point.iterations = 7;
    rows[0].point.converged = true;
    rows[1].point.method = Method::oracle;
    rows[1].r_o_bits = 0.25;
    rows[1].r_s_bits = 0.5;
    write_points_csv(path, rows);
    const auto back = read_points_csv(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].point.alpha1 == -1.25);
    CHECK(back[0].point.iterations == 7);
    CHECK(back[0].point.converged);
    CHECK(back[1].point.method == Method::oracle);
    REQUIRE(back[1].r_o_bits.has_value());
    CHECK(*back[1].r_o_bits == 0.25);
}

TEST_CASE("verify passes an all-zero-rate table") {
    TempFiles tmp;
    const auto path = tmp.track("verify_zero.csv");
    std::vector<PointsRow> rows(3);
    for (auto& r : rows) r.point.converged = true;
    rows[0].point.d_o = 0.1;
    rows[1].point.d_o = 0.2;
    rows[2].point.d_o = 0.3;
    write_points_csv(path, rows);
    const auto report = verify_points(path, {});
    CHECK(report.ok);
}

TEST_CASE("verify flags a corrupted row by id") {
    TempFiles tmp;
    const auto path = tmp.track("verify_bad.csv");
    spit(path,
         "method,alpha1,alpha2,d_o,d_s,rate_bits,rate_nats,iterations,converged\n" +
             row(-1.0, 0.1, 0.1, 0.5) + "\n" + row(-1.0, 0.2, 0.2, -0.25) + "\n");
    const auto report = verify_points(path, {});
    CHECK_FALSE(report.ok);
    bool mentioned = false;
    for (const auto& line : report.lines)
        mentioned = mentioned || line.find("row 2") != std::string::npos;
    CHECK(mentioned);
}

TEST_CASE("verify checks monotonicity, bounds, and achievability") {
    TempFiles tmp;
    const auto path = tmp.track("verify_mono.csv");
    // second row dominates the first in both distortions yet costs more rate
    spit(path,
         "method,alpha1,alpha2,d_o,d_s,rate_bits,rate_nats,iterations,converged\n" +
             row(-1.0, 0.1, 0.1, 0.5) + "\n" + row(-1.0, 0.2, 0.2, 0.9) + "\n");
    CHECK_FALSE(verify_points(path, {}).ok);

    const auto bounds_path = tmp.track("verify_bounds.csv");
    spit(bounds_path,
         "method,alpha1,alpha2,d_o,d_s,rate_bits,rate_nats,iterations,converged,r_o_bits,r_s_bits\n" +
             row(-1.0, 0.1, 0.1, 0.9) + ",0.5,0.3\n");
    CHECK_FALSE(verify_points(bounds_path, {}).ok);  // 0.9 > 0.5 + 0.3 + eps

    const auto cap_path = tmp.track("verify_cap.csv");
    spit(cap_path,
         "method,alpha1,alpha2,d_o,d_s,rate_bits,rate_nats,iterations,converged\n" +
             row(-1.0, 0.1, 0.1, 0.8) + "\n");
    VerifyOptions opts;
    opts.capacity_bits = 0.5;
    CHECK_FALSE(verify_points(cap_path, opts).ok);
    opts.capacity_bits = 1.0;
    CHECK(verify_points(cap_path, opts).ok);
}

TEST_CASE("run executes a minimal solver config end to end") {
    TempFiles tmp;
    const auto out = tmp.track("run_points.csv");
    tmp.track(out + ".manifest.json");
    const auto cfg_path = tmp.track("run_cfg.json");
    spit(cfg_path, config_with_output(kBinaryBaConfig, out));
    CHECK(run_config(cfg_path, {{}, {}, true}) == 0);
    const auto rows = read_points_csv(out);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].point.rate_bits == doctest::Approx(0.0));
    CHECK(slurp(out + ".manifest.json").find("config_hash") != std::string::npos);
}

TEST_CASE("unknown keys and bad values fail with exit code 1") {
    TempFiles tmp;
    const auto cfg_path = tmp.track("bad_cfg.json");
    spit(cfg_path, R"({"mode": "ba", "surprise": 1,
        "source": {"kind": "inline-joint", "joint": [[1.0]]},
        "distortion": {"observation": "hamming", "semantic": "hamming"},
        "grid": {"pairs": [[0,0]]}})");
    CHECK(run_config(cfg_path, {{}, {}, true}) == 1);

    spit(cfg_path, R"({"mode": "ba",
        "source": {"kind": "inline-joint", "joint": [[1.0]]},
        "distortion": {"observation": "hamming", "semantic": "hamming"},
        "grid": {"pairs": [[0.5, 0]]}})");
    CHECK(run_config(cfg_path, {{}, {}, true}) == 1);

    CHECK(run_config("does_not_exist.json", {{}, {}, true}) == 1);
}

TEST_CASE("identical config and seed give byte-identical points files") {
    TempFiles tmp;
    const char* sweep_cfg = R"({
      "mode": "sweep",
      "seed": 11,
      "workers": 2,
      "source": {"kind": "inline-joint", "joint": [[0.4, 0.1], [0.2, 0.3]]},
      "distortion": {"observation": "hamming", "semantic": "hamming"},
      "grid": {"lambda1": [-2.0, -1.0, -0.5], "lambda2": [-1.0, -0.25]},
      "ba": {"emit_bounds": true},
      "output": {"path": "OUTPATH", "json_mirror": true}
    })";
    const auto out_a = tmp.track("det_a.csv");
    tmp.track("det_a.json");
    tmp.track(out_a + ".manifest.json");
    const auto cfg_a = tmp.track("det_a_cfg.json");
    spit(cfg_a, config_with_output(sweep_cfg, out_a));
    REQUIRE(run_config(cfg_a, {{}, {}, true}) == 0);

    const auto out_b = tmp.track("det_b.csv");
    tmp.track("det_b.json");
    tmp.track(out_b + ".manifest.json");
    const auto cfg_b = tmp.track("det_b_cfg.json");
    spit(cfg_b, config_with_output(sweep_cfg, out_b));
    REQUIRE(run_config(cfg_b, {{}, {}, true}) == 0);

    CHECK(slurp(out_a) == slurp(out_b));
    CHECK(slurp("det_a.json") == slurp("det_b.json"));

    // the emitted sweep also survives its own audit
    const auto report = verify_points(out_a, {});
    CHECK(report.ok);

    // single-worker run of the same grid matches too
    const auto out_c = tmp.track("det_c.csv");
    tmp.track("det_c.json");
    tmp.track(out_c + ".manifest.json");
    const auto cfg_c = tmp.track("det_c_cfg.json");
    std::string one_worker = config_with_output(sweep_cfg, out_c);
    one_worker.replace(one_worker.find("\"workers\": 2"), 12, "\"workers\": 1");
    spit(cfg_c, one_worker);
    REQUIRE(run_config(cfg_c, {{}, {}, true}) == 0);
    CHECK(slurp(out_a) == slurp(out_c));
}

TEST_CASE("targets mode routes through the bisection wrapper") {
    TempFiles tmp;
    const auto out = tmp.track("target_points.csv");
    tmp.track(out + ".manifest.json");
    const auto cfg_path = tmp.track("target_cfg.json");
    spit(cfg_path, config_with_output(R"({
      "mode": "ba",
      "source": {"kind": "inline-joint", "joint": [[0.5, 0.0], [0.0, 0.5]]},
      "distortion": {"observation": "hamming", "semantic": "hamming"},
      "ba": {"targets": [0.1, 0.5], "tol": 1e-11, "max_iters": 50000},
      "output": {"path": "OUTPATH"}
    })",
                                      out));
    REQUIRE(run_config(cfg_path, {{}, {}, true}) == 0);
    const auto rows = read_points_csv(out);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].point.rate_bits == doctest::Approx(0.531).epsilon(2e-3));
}

TEST_CASE("oracle mode emits oracle-tagged rows") {
    TempFiles tmp;
    const auto out = tmp.track("oracle_points.csv");
    tmp.track(out + ".manifest.json");
    const auto cfg_path = tmp.track("oracle_cfg.json");
    spit(cfg_path, config_with_output(R"({
      "mode": "oracle",
      "source": {"kind": "inline-joint", "joint": [[0.5, 0.0], [0.0, 0.5]]},
      "distortion": {"observation": "hamming", "semantic": "hamming"},
      "oracle": {"restarts": 6, "targets": [[0.1, 0.5]]},
      "output": {"path": "OUTPATH"}
    })",
                                      out));
    REQUIRE(run_config(cfg_path, {{}, {}, true}) == 0);
    const auto rows = read_points_csv(out);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].point.method == Method::oracle);
    CHECK(rows[0].point.rate_bits == doctest::Approx(0.531).epsilon(5e-3));
}

TEST_CASE("gaussian-gen mode writes a loadable sample file") {
    TempFiles tmp;
    const auto out = tmp.track("gen_samples.csv");
    const auto cfg_path = tmp.track("gen_cfg.json");
    spit(cfg_path, config_with_output(R"({
      "mode": "gaussian-gen",
      "seed": 4,
      "source": {"kind": "gaussian", "spec": "benchmark"},
      "gaussian": {"n1": 25, "n2": 1},
      "output": {"path": "OUTPATH"}
    })",
                                      out));
    REQUIRE(run_config(cfg_path, {{}, {}, true}) == 0);
    const std::string text = slurp(out);
    CHECK(text.rfind("x0,x1,x2,s0,s1", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 26);
}

TEST_CASE("format_double renders consistently") {
    CHECK(format_double(0.0) == "0");
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(1.0 / 3.0) == "0.333333333333");
}
