#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "semrd/core.hpp"
#include "semrd/error.hpp"

namespace semrd::testing {

struct FixturePoint {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double target_d_o = 0.0;
    double target_d_s = 0.0;
    double rate_nats = 0.0;
};

struct Fixture {
    std::string name;
    DiscreteSemanticSource src;
    DistortionSpec spec;
    std::vector<FixturePoint> oracle_points;
};

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    Eigen::MatrixXd m(j.size(), j[0].size());
    for (std::size_t r = 0; r < j.size(); ++r)
        for (std::size_t c = 0; c < j[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    return m;
}

inline Fixture load_fixture(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open fixture: " + path);
    nlohmann::json j;
    in >> j;
    Fixture f;
    f.name = j.at("name").get<std::string>();
    f.src = build_source(matrix_from_json(j.at("joint")));
    f.spec = make_distortion_spec(f.src, matrix_from_json(j.at("d_o")),
                                  matrix_from_json(j.at("d_s")));
    for (const auto& p : j.at("oracle_points")) {
        f.oracle_points.push_back({p.at("lambda1").get<double>(), p.at("lambda2").get<double>(),
                                   p.at("target_d_o").get<double>(),
                                   p.at("target_d_s").get<double>(),
                                   p.at("rate_nats").get<double>()});
    }
    return f;
}

inline std::vector<Fixture> load_tiny_fixtures(const std::string& dir) {
    std::vector<Fixture> out;
    for (int i = 0; i < 5; ++i)
        out.push_back(load_fixture(dir + "/tiny_" + std::to_string(i) + ".json"));
    return out;
}

}  // namespace semrd::testing
